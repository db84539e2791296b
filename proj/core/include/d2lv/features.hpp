#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "d2lv/image.hpp"
#include "d2lv/patches.hpp"
#include "d2lv/types.hpp"

namespace d2lv {

// Descriptor plug point. Implementations must be deterministic and safe for
// concurrent compute() calls (they are shared across extraction workers).
class DescriptorModel {
public:
  virtual ~DescriptorModel() = default;

  virtual const std::string& model_id() const = 0;
  virtual std::uint32_t output_dim() const = 0;

  // img arrives already resampled to scale x scale. Raw, unnormalized output.
  virtual std::vector<float> compute(const ImageBuffer& img) const = 0;
};

// Reference descriptor: G x G cells, each contributing mean R/G/B plus an
// 8-bin gradient-orientation histogram (normalized to unit mass per cell), so
// D_raw = G^2 * 11. Cheap, deterministic, and stable under proportional
// resampling — a desk-scale stand-in for learned embeddings.
class TiledDescriptor final : public DescriptorModel {
public:
  explicit TiledDescriptor(std::string model_id = "tiled-8", int grid = 8);

  const std::string& model_id() const override { return id_; }
  std::uint32_t output_dim() const override { return static_cast<std::uint32_t>(grid_ * grid_ * 11); }
  std::vector<float> compute(const ImageBuffer& img) const override;

  int grid() const { return grid_; }

private:
  std::string id_;
  int grid_;
};

// Resamples the patch to scale x scale, runs the model, L2-normalizes.
// A zero raw descriptor (possible on degenerate flat-black input) maps to the
// deterministic first basis vector.
std::vector<float> describe(const DescriptorModel& model, const ImageBuffer& patch_pixels,
                            int scale);

struct PcaModel {
  std::uint32_t d_raw = 0;
  std::uint32_t d_out = 0;
  // Kept in double precision in memory (distance preservation to 1e-8 needs
  // it); the D2PC file stores f32, so a save/load round trip quantizes.
  std::vector<double> mean;       // d_raw
  std::vector<double> components; // row-major d_out x d_raw; rows orthonormal
                                  // unless whitening was baked in at fit time

  // Populated by pca_fit (descending), not persisted.
  std::vector<double> explained_variance;
  double total_variance = 0.0;

  // Magic "D2PC", d_raw u32, d_out u32, mean f32s, components row-major f32s,
  // all little-endian.
  void save(const std::filesystem::path& path) const;
  static PcaModel load(const std::filesystem::path& path);
};

// Top-d_out principal directions of the mean-centered samples. Requires
// sample count >= d_out; d_out above the data rank is reduced to the rank
// with a stderr warning; rank 0 (all samples identical) throws DomainError.
// With whiten, rows are scaled by 1/sqrt(eigenvalue).
PcaModel pca_fit(const std::vector<std::vector<float>>& samples, std::uint32_t d_out,
                 bool whiten = false);

// components * (v - mean), no normalization. Exposed for oracle tests.
std::vector<double> pca_project_raw(const PcaModel& model, std::span<const float> v);

struct Projection {
  std::vector<float> vector;
  bool flagged_zero = false; // input projected to ~0; output is the epsilon basis vector
};

// Projection followed by L2 normalization.
Projection pca_project(const PcaModel& model, std::span<const float> v);

struct ExtractOptions {
  std::vector<int> scales = {200, 256, 320};
  const PcaModel* pca = nullptr; // optional reduction before storage
  bool queries = false;          // query plans filter small patches & may use the detector
  DetectorHook detector = {};
  unsigned jobs = 0;
};

// One record per (image, patch, model, scale), ordered by record key.
// Unreadable images are skipped with a stderr warning.
FeatureStore extract_all(const std::vector<std::pair<ImageId, std::filesystem::path>>& images,
                         const PatchPlan& plan, const DescriptorModel& model,
                         const ExtractOptions& options);

} // namespace d2lv
