#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "d2lv/types.hpp"

namespace d2lv {

// Synthetic copy-detection benchmark: procedural references, overlay queries
// (a reference pasted at 15-35% area onto a distractor composition), crop
// queries (a 25-50% area sub-window of a reference), and distractor queries
// with no true match. Fully determined by the seed.
struct SynthConfig {
  int n_refs = 200;
  int n_overlay_queries = 50;
  int n_crop_queries = 50;
  int n_distractors = 100;
  std::uint64_t seed = 7;
  int side = 256; // generated image side length
  unsigned jobs = 0;

  void validate() const; // counts must be >= 0, side >= 32
};

struct SynthResult {
  std::vector<std::pair<ImageId, std::filesystem::path>> references;
  std::vector<std::pair<ImageId, std::filesystem::path>> queries;
  std::vector<std::pair<ImageId, ImageId>> ground_truth;

  struct OverlayBox {
    ImageId query;
    BoundingBox box; // pasted region, recorded exactly as used
  };
  std::vector<OverlayBox> overlay_boxes;

  std::filesystem::path gt_csv;
  std::filesystem::path boxes_csv;
};

// Writes refs/ and queries/ PPM trees plus gt.csv and overlay_boxes.csv under
// out_dir. Byte-identical across runs and worker counts for a fixed config.
SynthResult synth_bench(const SynthConfig& config, const std::filesystem::path& out_dir);

} // namespace d2lv
