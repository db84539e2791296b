#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "d2lv/augment.hpp"
#include "d2lv/matching.hpp"
#include "d2lv/patches.hpp"

namespace d2lv {

// Minimal INI reader: [section] headers, key = value lines, '#'/';' comments.
// All lookups are string-in, typed-out with defaults; parse failures throw
// ConfigError with the offending line.
class Ini {
public:
  static Ini parse(std::istream& source);
  static Ini load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback = "") const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                const std::vector<int>& fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Everything a pipeline run needs, assembled from one config file. Sections:
// [augment], [patches], [features], [matching], [pipeline]. Key list lives in
// the README; every key has a default so an empty file is a valid config.
struct PipelineConfig {
  AugmentConfig augment;
  std::string underlay_dir; // asset pools; empty means none
  std::string overlay_dir;
  std::string face_dir;

  PatchPlan query_plan = PatchPlan::default_query();
  PatchPlan reference_plan = PatchPlan::default_reference();

  std::string model_id = "tiled-8";
  int descriptor_grid = 8;
  std::vector<int> scales = {200, 256, 320};
  std::string pca_path; // empty means no reduction
  bool whiten = false;

  std::string specs_path; // empty means completeness over all models
  TrickConfig tricks;
  std::size_t top_t = 50; // 0 disables pruning

  std::uint64_t seed = 42;
  unsigned jobs = 0;

  static PipelineConfig from_ini(const Ini& ini);
  static PipelineConfig load(const std::filesystem::path& path);

  void validate() const;
};

} // namespace d2lv
