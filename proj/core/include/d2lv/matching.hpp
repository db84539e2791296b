#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "d2lv/evaluation.hpp"
#include "d2lv/image.hpp"
#include "d2lv/types.hpp"

namespace d2lv {

// Raw similarity entries keyed by (query, query patch, reference, reference
// patch, model, scale). Names are interned; entries carry indices.
class ScoreTable {
public:
  struct Entry {
    std::uint32_t query = 0;
    std::uint32_t query_patch = 0;
    std::uint32_t reference = 0;
    std::uint32_t reference_patch = 0;
    std::uint32_t model = 0;
    std::uint32_t scale = 0;
    float score = 0.0f;
  };

  std::uint32_t intern_query(std::string_view id);
  std::uint32_t intern_reference(std::string_view id);
  std::uint32_t intern_patch(std::string_view id);
  std::uint32_t intern_model(std::string_view id);

  // Throws DomainError on a non-finite score.
  void add(const Entry& entry);

  const std::vector<std::string>& queries() const { return queries_; }
  const std::vector<std::string>& references() const { return references_; }
  const std::vector<std::string>& patch_ids() const { return patches_; }
  const std::vector<std::string>& models() const { return models_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& mutable_entries() { return entries_; }

private:
  std::uint32_t intern(std::vector<std::string>& names,
                       std::unordered_map<std::string, std::uint32_t>& index,
                       std::string_view id);

  std::vector<std::string> queries_, references_, patches_, models_;
  std::unordered_map<std::string, std::uint32_t> query_index_, reference_index_, patch_index_,
      model_index_;
  std::vector<Entry> entries_;
};

// C[i * rows_b + j] = <a_i, b_j> over row-major matrices, tiled, double
// accumulation. Deterministic for any worker count.
std::vector<float> blocked_dot(std::span<const float> a, std::size_t rows_a,
                               std::span<const float> b, std::size_t rows_b, std::size_t dim,
                               unsigned jobs = 0);

// Inner products for the three matching modes: global-global (orig x orig),
// global-local (every query patch x reference orig), local-global (query orig
// x reference non-orig patches). Scores pair records sharing (model, scale).
ScoreTable pairwise_scores(const FeatureStore& queries, const FeatureStore& references,
                           unsigned jobs = 0);

struct EnsembleSpec {
  enum class Criterion { kConfidence, kCompleteness };

  Criterion criterion = Criterion::kCompleteness;
  std::vector<std::string> models;
  std::vector<double> thresholds; // parallel to models; confidence only

  void validate() const;

  // Line format: "confidence model:threshold ..." or "completeness model ...";
  // '#' starts a comment.
  static std::vector<EnsembleSpec> parse(std::istream& source);
  static std::vector<EnsembleSpec> parse_file(const std::filesystem::path& path);
};

// All scores must strictly exceed their thresholds; then the max wins,
// otherwise the pair contributes nothing.
std::optional<double> confidence_ensemble(
    const std::vector<std::pair<double, double>>& score_threshold);

// Unconditional max.
double completeness_ensemble(const std::vector<double>& scores);

// max(max(gl), max(lg)); with top2_average, the mean of the two largest
// values of the pooled multiset (a lone value is returned as-is). Both lists
// empty -> no score.
std::optional<double> patch_ensemble(const std::vector<double>& gl, const std::vector<double>& lg,
                                     bool top2_average = false);

using FaceSkipHook = std::function<bool(const ImageId&, const ImageBuffer&)>;

struct TrickConfig {
  double partial_penalty = 0.95; // gamma, multiplies scores involving partial patches
  int min_patch_side = 32;       // enforced upstream by the patch planner
  FaceSkipHook face_skip;        // empty hook: never skip
  bool top2_average = false;

  void validate() const; // gamma must lie in (0, 1]
};

// Gamma-penalizes entries where either side is a partial (non-whole-frame)
// patch and drops reference-patch entries for face-skipped references.
ScoreTable apply_tricks(const ScoreTable& table, const TrickConfig& config,
                        const std::vector<std::pair<ImageId, ImageBuffer>>& reference_images);

struct MatchOptions {
  std::vector<EnsembleSpec> specs; // empty: completeness over every model present
  TrickConfig tricks;
  std::size_t top_t = 50; // candidate references per query patch; 0 = unlimited
  unsigned jobs = 0;
  std::vector<std::pair<ImageId, ImageBuffer>> reference_images; // face_skip input
};

// Full scoring pipeline: pairwise scores, tricks, model-level ensembles per
// patch pair, patch ensemble, ranking. Candidate generation keeps the top-T
// references per query patch by raw score.
eval::RankedPairList match_pipeline(const FeatureStore& queries, const FeatureStore& references,
                                    const MatchOptions& options);

} // namespace d2lv
