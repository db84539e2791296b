#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d2lv/image.hpp"
#include "d2lv/rng.hpp"
#include "d2lv/types.hpp"

namespace d2lv {

// The fifteen basic transforms. Each kind maps to exactly one parameterized
// transform; parameters are drawn from AugmentConfig ranges.
enum class TransformKind {
  kResizedCrop,
  kRotation,
  kPixelization,
  kPixelShuffle,
  kPerspective,
  kPadding,
  kImageUnderlay,
  kColorJitter,
  kBlur,
  kGrayscale,
  kHorizontalFlip,
  kEmojiOverlay,
  kTextOverlay,
  kImageOverlay,
  kResize,
};

inline constexpr int kTransformKindCount = 15;

enum class AdvancedKind {
  kSuperBlur,
  kSuperColor,
  kSuperDark,
  kSuperFace,
  kSuperOpaque,
  kSuperOcclude,
};

inline constexpr int kAdvancedKindCount = 6;

std::string_view to_string(TransformKind kind);
std::string_view to_string(AdvancedKind kind);
TransformKind parse_transform_kind(std::string_view name);
AdvancedKind parse_advanced_kind(std::string_view name);

// Parameter ranges for every transform. The set composition is fixed by the
// pipeline; magnitudes are tunable and documented in the README.
struct AugmentConfig {
  int side = 256;            // every emitted image is side x side
  double probability = 0.25; // per-transform fire probability (resize: always)

  double crop_scale_min = 0.3;
  double crop_scale_max = 1.0;
  double crop_aspect_min = 0.75;
  double crop_aspect_max = 4.0 / 3.0;

  double rotation_max_degrees = 45.0;
  double rotation_discrete_prob = 0.5; // chance the rotation snaps to {90,180,270}

  int pixelize_block_min = 4;
  int pixelize_block_max = 16;

  int shuffle_grid = 8; // pixel-shuffle operates on an NxN tile grid

  double perspective_strength = 0.3; // max corner displacement as a fraction of half-extent

  double pad_min = 0.05;
  double pad_max = 0.25;

  double underlay_scale_min = 0.4;
  double underlay_scale_max = 0.8;
  double overlay_scale_min = 0.3;
  double overlay_scale_max = 0.6;

  double jitter_brightness = 0.4;
  double jitter_contrast = 0.4;
  double jitter_saturation = 0.4;
  double jitter_hue = 0.1; // fraction of a full hue turn

  double blur_sigma_min = 0.5;
  double blur_sigma_max = 2.0;

  int emoji_count_min = 1;
  int emoji_count_max = 3;
  double emoji_scale_min = 0.1;
  double emoji_scale_max = 0.3;

  int text_len_min = 4;
  int text_len_max = 10;
  double text_scale_min = 0.04;
  double text_scale_max = 0.12;

  double super_blur_sigma_min = 2.0;
  double super_blur_sigma_max = 8.0;
  double super_color_factor = 2.0; // jitter strength multiplier for super-color
  double super_dark_min = 0.1;
  double super_dark_max = 0.5;
  double super_face_scale_min = 0.2;
  double super_face_scale_max = 0.5;
  double super_opaque_min = 0.35;
  double super_opaque_max = 0.65;
  int occlude_count_min = 1;
  int occlude_count_max = 4;
  double occlude_area_max = 0.25; // per-rectangle area cap, fraction of the frame

  // Throws ConfigError when a range is inverted or a bound is out of domain.
  void validate() const;
};

struct AugmentationSet {
  std::string name;
  std::vector<std::pair<TransformKind, double>> basic; // (kind, fire probability)
  std::optional<AdvancedKind> advanced;
  bool black_white = false;
};

// Derives one RNG stream per (image, variant) pair so corpus generation is
// schedule-independent.
struct SeedPolicy {
  std::uint64_t global_seed = 42;

  Rng stream(std::string_view image_id, std::uint32_t variant_index) const {
    return Rng(derive_stream_seed(global_seed, image_id, variant_index));
  }
};

// Read-only image pools backing the compositing transforms. Loaded once,
// shared across workers.
struct AssetPool {
  std::vector<ImageBuffer> images;

  bool empty() const { return images.empty(); }
  std::size_t size() const { return images.size(); }

  // Loads every .ppm under `dir` (non-recursive), sorted by filename.
  static AssetPool from_directory(const std::filesystem::path& dir);
};

struct AssetPools {
  AssetPool underlays;
  AssetPool overlays;
  AssetPool faces;
};

// Deterministic primitives behind the advanced transforms, exposed so their
// closed-form behavior can be checked directly.
ImageBuffer black_white(const ImageBuffer& img);
ImageBuffer super_dark(const ImageBuffer& img, double factor);
ImageBuffer super_opaque(const ImageBuffer& img, const ImageBuffer& overlay, double alpha);
ImageBuffer occlude_rect(const ImageBuffer& img, const BoundingBox& box,
                         std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Applies a single basic transform unconditionally (no probability gate).
ImageBuffer apply_transform(const ImageBuffer& img, TransformKind kind,
                            const AugmentConfig& config, const AssetPools& pools, Rng& rng);

// Runs the set's basic transforms in declared order, gating each on its fire
// probability, then resizes to config.side. One uniform draw is consumed per
// gate regardless of outcome, keeping the stream aligned across sets.
ImageBuffer apply_basic(const ImageBuffer& img, const AugmentationSet& set,
                        const AugmentConfig& config, const AssetPools& pools, Rng& rng);

ImageBuffer apply_advanced(const ImageBuffer& img, AdvancedKind kind,
                           const AugmentConfig& config, const AssetPools& pools, Rng& rng);

// The 11-set composition: basic, basic plus each advanced kind, and
// black-white variants of basic / super-blur / super-color / super-face.
std::vector<AugmentationSet> enumerate_sets(const AugmentConfig& config);

struct CorpusManifest {
  struct Entry {
    std::string identity;
    std::uint32_t variant_index = 0;
    std::string path;
  };

  std::vector<Entry> entries;
  std::vector<std::string> skipped; // unreadable source paths

  void write(const std::filesystem::path& path) const;
  static CorpusManifest read(const std::filesystem::path& path);
};

inline constexpr int kVariantsPerIdentity = 20; // resized original + 19 augmented

// Selects every 10th source (indices 0, 10, 20, ...), emits 20 variants per
// selected image under one identity label, and writes PPM files into out_dir.
// Unreadable sources are skipped with a stderr warning and recorded in the
// manifest. Parallel across identities; output is schedule-independent.
CorpusManifest generate_corpus(const std::vector<std::filesystem::path>& sources,
                               const AugmentationSet& set, const AugmentConfig& config,
                               const AssetPools& pools, const SeedPolicy& policy,
                               const std::filesystem::path& out_dir, int jobs = 0);

} // namespace d2lv
