#include "d2lv/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "d2lv/errors.hpp"
#include "d2lv/io.hpp"
#include "d2lv/parallel.hpp"
#include "glyphs.hpp"

namespace fs = std::filesystem;

namespace d2lv {
namespace {

constexpr std::string_view kTransformNames[kTransformKindCount] = {
    "resized-crop", "rotation",       "pixelization", "pixel-shuffle", "perspective",
    "padding",      "image-underlay", "color-jitter", "blur",          "grayscale",
    "horizontal-flip", "emoji-overlay", "text-overlay", "image-overlay", "resize",
};

constexpr std::string_view kAdvancedNames[kAdvancedKindCount] = {
    "super-blur", "super-color", "super-dark", "super-face", "super-opaque", "super-occlude",
};

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx == 0.0 ? 0.0 : d / mx;
  if (d == 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = (g - b) / d;
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = std::min(5, static_cast<int>(hh));
  const double f = hh - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// Brightness -> contrast -> saturation -> hue, each factor drawn once.
ImageBuffer color_jitter(const ImageBuffer& img, double brightness, double contrast,
                         double saturation, double hue_range, Rng& rng) {
  const double fb = rng.uniform(std::max(0.0, 1.0 - brightness), 1.0 + brightness);
  const double fc = rng.uniform(std::max(0.0, 1.0 - contrast), 1.0 + contrast);
  const double fs = rng.uniform(std::max(0.0, 1.0 - saturation), 1.0 + saturation);
  const double fh = rng.uniform(-hue_range, hue_range);

  double mean = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      mean += 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    }
  }
  mean /= 255.0 * img.width * img.height;

  ImageBuffer out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double c[3];
      for (int ch = 0; ch < 3; ++ch) c[ch] = img.at(x, y, ch) / 255.0;
      for (double& v : c) v = std::clamp(v * fb, 0.0, 1.0);
      for (double& v : c) v = std::clamp(mean + (v - mean) * fc, 0.0, 1.0);
      const double gray = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
      for (double& v : c) v = std::clamp(gray + (v - gray) * fs, 0.0, 1.0);
      double h, s, v;
      rgb_to_hsv(c[0], c[1], c[2], h, s, v);
      hsv_to_rgb(h + fh, s, v, c[0], c[1], c[2]);
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = clamp_byte(c[ch] * 255.0);
    }
  }
  return out;
}

ImageBuffer procedural_background(int w, int h, Rng& rng) {
  std::uint8_t c0[3], c1[3];
  for (int i = 0; i < 3; ++i) c0[i] = static_cast<std::uint8_t>(rng.index(256));
  for (int i = 0; i < 3; ++i) c1[i] = static_cast<std::uint8_t>(rng.index(256));
  const bool horizontal = rng.chance(0.5);
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int pos = horizontal ? x : y;
      const int extent = horizontal ? w : h;
      const double t = extent > 1 ? static_cast<double>(pos) / (extent - 1) : 0.0;
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = clamp_byte(c0[c] + (static_cast<double>(c1[c]) - c0[c]) * t);
      }
    }
  }
  return out;
}

ImageBuffer pick_pool_image(const AssetPool& pool, int w, int h, Rng& rng) {
  if (pool.empty()) return procedural_background(w, h, rng);
  const ImageBuffer& src = pool.images[rng.index(pool.size())];
  return img::resize_bilinear(src, w, h);
}

ImageBuffer resized_crop(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  const int W = src.width, H = src.height;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double area = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max) *
                        static_cast<double>(W) * H;
    const double aspect = rng.uniform(cfg.crop_aspect_min, cfg.crop_aspect_max);
    const int w = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    if (w < 1 || h < 1 || w > W || h > H) continue;
    const int x = static_cast<int>(rng.index(static_cast<std::size_t>(W - w) + 1));
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(H - h) + 1));
    return img::crop(src, BoundingBox{x, y, w, h});
  }
  return src; // identity crop after exhausted retries
}

ImageBuffer pixelize(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  const int block = rng.uniform_int(cfg.pixelize_block_min, cfg.pixelize_block_max);
  const int sw = std::max(1, src.width / block);
  const int sh = std::max(1, src.height / block);
  return img::resize_bilinear(img::resize_bilinear(src, sw, sh), src.width, src.height);
}

ImageBuffer pixel_shuffle(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  const int g = cfg.shuffle_grid;
  const int cw = src.width / g;
  const int ch = src.height / g;
  if (cw < 1 || ch < 1) return src;
  std::vector<std::size_t> perm(static_cast<std::size_t>(g) * g);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  ImageBuffer out = src; // margins beyond g*cw x g*ch stay put
  for (int ty = 0; ty < g; ++ty) {
    for (int tx = 0; tx < g; ++tx) {
      const std::size_t from = perm[static_cast<std::size_t>(ty) * g + tx];
      const int sx = static_cast<int>(from % g) * cw;
      const int sy = static_cast<int>(from / g) * ch;
      for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
          for (int c = 0; c < 3; ++c) {
            out.at(tx * cw + x, ty * ch + y, c) = src.at(sx + x, sy + y, c);
          }
        }
      }
    }
  }
  return out;
}

ImageBuffer perspective(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  const int W = src.width, HH = src.height;
  const double dx = (W - 1) / 2.0 * cfg.perspective_strength;
  const double dy = (HH - 1) / 2.0 * cfg.perspective_strength;
  const std::array<std::array<double, 2>, 4> dst = {{
      {0.0, 0.0}, {W - 1.0, 0.0}, {W - 1.0, HH - 1.0}, {0.0, HH - 1.0}}};
  std::array<std::array<double, 2>, 4> src_quad;
  // Corners move inward only, so the warped content stays inside the frame.
  src_quad[0] = {rng.uniform() * dx, rng.uniform() * dy};
  src_quad[1] = {W - 1.0 - rng.uniform() * dx, rng.uniform() * dy};
  src_quad[2] = {W - 1.0 - rng.uniform() * dx, HH - 1.0 - rng.uniform() * dy};
  src_quad[3] = {rng.uniform() * dx, HH - 1.0 - rng.uniform() * dy};
  const img::Homography h = img::homography_from_quads(dst, src_quad);
  return img::warp_perspective(src, h, W, HH);
}

ImageBuffer padding(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  const auto side = [&] {
    return static_cast<int>(std::lround(rng.uniform(cfg.pad_min, cfg.pad_max) * src.width));
  };
  const auto side_v = [&] {
    return static_cast<int>(std::lround(rng.uniform(cfg.pad_min, cfg.pad_max) * src.height));
  };
  const int l = side(), r = side(), t = side_v(), b = side_v();
  const std::uint8_t cr = static_cast<std::uint8_t>(rng.index(256));
  const std::uint8_t cg = static_cast<std::uint8_t>(rng.index(256));
  const std::uint8_t cb = static_cast<std::uint8_t>(rng.index(256));
  ImageBuffer out = ImageBuffer::filled(src.width + l + r, src.height + t + b, cr, cg, cb);
  img::paste(out, src, l, t);
  return out;
}

ImageBuffer image_underlay(const ImageBuffer& src, const AugmentConfig& cfg,
                           const AssetPools& pools, Rng& rng) {
  ImageBuffer canvas = pick_pool_image(pools.underlays, src.width, src.height, rng);
  const double s = rng.uniform(cfg.underlay_scale_min, cfg.underlay_scale_max);
  const int w = std::max(1, static_cast<int>(std::lround(src.width * s)));
  const int h = std::max(1, static_cast<int>(std::lround(src.height * s)));
  const ImageBuffer small = img::resize_bilinear(src, w, h);
  const int x = static_cast<int>(rng.index(static_cast<std::size_t>(src.width - w) + 1));
  const int y = static_cast<int>(rng.index(static_cast<std::size_t>(src.height - h) + 1));
  img::paste(canvas, small, x, y);
  return canvas;
}

ImageBuffer image_overlay(const ImageBuffer& src, const AugmentConfig& cfg,
                          const AssetPools& pools, Rng& rng) {
  const double s = rng.uniform(cfg.overlay_scale_min, cfg.overlay_scale_max);
  const int w = std::max(1, static_cast<int>(std::lround(src.width * s)));
  const int h = std::max(1, static_cast<int>(std::lround(src.height * s)));
  const ImageBuffer patch = pick_pool_image(pools.overlays, w, h, rng);
  const int x = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(0, src.width - w)) + 1));
  const int y = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(0, src.height - h)) + 1));
  ImageBuffer out = src;
  img::paste(out, patch, x, y);
  return out;
}

void draw_sprite(ImageBuffer& dst, const std::array<std::uint16_t, 16>& rows, int x0, int y0,
                 int side, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (int j = 0; j < side; ++j) {
    const int py = y0 + j;
    if (py < 0 || py >= dst.height) continue;
    const int sy = j * 16 / side;
    for (int i = 0; i < side; ++i) {
      const int px = x0 + i;
      if (px < 0 || px >= dst.width) continue;
      const int sx = i * 16 / side;
      if ((rows[sy] >> (15 - sx)) & 1u) {
        dst.at(px, py, 0) = r;
        dst.at(px, py, 1) = g;
        dst.at(px, py, 2) = b;
      }
    }
  }
}

ImageBuffer emoji_overlay(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  ImageBuffer out = src;
  const int count = rng.uniform_int(cfg.emoji_count_min, cfg.emoji_count_max);
  for (int k = 0; k < count; ++k) {
    const std::size_t which = rng.index(glyphs::emoji_count());
    const double frac = rng.uniform(cfg.emoji_scale_min, cfg.emoji_scale_max);
    const int side = std::max(4, static_cast<int>(std::lround(
                                      frac * std::min(src.width, src.height))));
    const std::uint8_t r = static_cast<std::uint8_t>(rng.index(256));
    const std::uint8_t g = static_cast<std::uint8_t>(rng.index(256));
    const std::uint8_t b = static_cast<std::uint8_t>(rng.index(256));
    const int x = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, src.width - side + 1))));
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, src.height - side + 1))));
    draw_sprite(out, glyphs::emoji_sprite(which), x, y, side, r, g, b);
  }
  return out;
}

void draw_glyph(ImageBuffer& dst, const std::uint8_t* rows, int x0, int y0, int scale,
                std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (int ry = 0; ry < 7; ++ry) {
    for (int rx = 0; rx < 5; ++rx) {
      if (!((rows[ry] >> (4 - rx)) & 1u)) continue;
      for (int j = 0; j < scale; ++j) {
        const int py = y0 + ry * scale + j;
        if (py < 0 || py >= dst.height) continue;
        for (int i = 0; i < scale; ++i) {
          const int px = x0 + rx * scale + i;
          if (px < 0 || px >= dst.width) continue;
          dst.at(px, py, 0) = r;
          dst.at(px, py, 1) = g;
          dst.at(px, py, 2) = b;
        }
      }
    }
  }
}

ImageBuffer text_overlay(const ImageBuffer& src, const AugmentConfig& cfg, Rng& rng) {
  ImageBuffer out = src;
  const int len = rng.uniform_int(cfg.text_len_min, cfg.text_len_max);
  std::string text(static_cast<std::size_t>(len), '?');
  for (char& c : text) c = glyphs::kCharset[rng.index(glyphs::kCharset.size())];
  const double frac = rng.uniform(cfg.text_scale_min, cfg.text_scale_max);
  const int scale = std::max(1, static_cast<int>(std::lround(frac * src.height / 7.0)));
  const int total_w = len * 6 * scale - scale; // 5 columns + 1 spacing per glyph
  const int total_h = 7 * scale;
  const std::uint8_t r = static_cast<std::uint8_t>(rng.index(256));
  const std::uint8_t g = static_cast<std::uint8_t>(rng.index(256));
  const std::uint8_t b = static_cast<std::uint8_t>(rng.index(256));
  const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, src.width - total_w + 1))));
  const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, src.height - total_h + 1))));
  for (int k = 0; k < len; ++k) {
    const std::uint8_t* rows = glyphs::font5x7(text[static_cast<std::size_t>(k)]);
    if (rows == nullptr) continue;
    draw_glyph(out, rows, x0 + k * 6 * scale, y0, scale, r, g, b);
  }
  return out;
}

std::string identity_label(std::size_t ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "id%06zu", ordinal);
  return buf;
}

std::string variant_filename(const std::string& identity, std::uint32_t variant) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "_v%02u", variant);
  return identity + buf + ".ppm";
}

void require(bool ok, const char* message) {
  if (!ok) throw ConfigError(std::string("augment config: ") + message);
}

} // namespace

std::string_view to_string(TransformKind kind) {
  return kTransformNames[static_cast<int>(kind)];
}

std::string_view to_string(AdvancedKind kind) {
  return kAdvancedNames[static_cast<int>(kind)];
}

TransformKind parse_transform_kind(std::string_view name) {
  for (int i = 0; i < kTransformKindCount; ++i) {
    if (kTransformNames[i] == name) return static_cast<TransformKind>(i);
  }
  throw ConfigError("unknown transform kind: " + std::string(name));
}

AdvancedKind parse_advanced_kind(std::string_view name) {
  for (int i = 0; i < kAdvancedKindCount; ++i) {
    if (kAdvancedNames[i] == name) return static_cast<AdvancedKind>(i);
  }
  throw ConfigError("unknown advanced kind: " + std::string(name));
}

void AugmentConfig::validate() const {
  require(side >= 8, "side must be >= 8");
  require(probability >= 0.0 && probability <= 1.0, "probability must be in [0, 1]");
  require(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0,
          "crop scale range must satisfy 0 < min <= max <= 1");
  require(crop_aspect_min > 0.0 && crop_aspect_min <= crop_aspect_max,
          "crop aspect range must satisfy 0 < min <= max");
  require(rotation_max_degrees >= 0.0 && rotation_max_degrees <= 180.0,
          "rotation_max_degrees must be in [0, 180]");
  require(rotation_discrete_prob >= 0.0 && rotation_discrete_prob <= 1.0,
          "rotation_discrete_prob must be in [0, 1]");
  require(pixelize_block_min >= 1 && pixelize_block_min <= pixelize_block_max,
          "pixelize block range must satisfy 1 <= min <= max");
  require(shuffle_grid >= 1, "shuffle_grid must be >= 1");
  require(perspective_strength >= 0.0 && perspective_strength <= 0.9,
          "perspective_strength must be in [0, 0.9]");
  require(pad_min >= 0.0 && pad_min <= pad_max && pad_max <= 1.0,
          "pad range must satisfy 0 <= min <= max <= 1");
  require(underlay_scale_min > 0.0 && underlay_scale_min <= underlay_scale_max &&
              underlay_scale_max <= 1.0,
          "underlay scale range must satisfy 0 < min <= max <= 1");
  require(overlay_scale_min > 0.0 && overlay_scale_min <= overlay_scale_max &&
              overlay_scale_max <= 1.0,
          "overlay scale range must satisfy 0 < min <= max <= 1");
  require(jitter_brightness >= 0.0 && jitter_contrast >= 0.0 && jitter_saturation >= 0.0,
          "jitter strengths must be >= 0");
  require(jitter_hue >= 0.0 && jitter_hue <= 0.5, "jitter_hue must be in [0, 0.5]");
  require(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max,
          "blur sigma range must satisfy 0 < min <= max");
  require(emoji_count_min >= 1 && emoji_count_min <= emoji_count_max,
          "emoji count range must satisfy 1 <= min <= max");
  require(emoji_scale_min > 0.0 && emoji_scale_min <= emoji_scale_max && emoji_scale_max <= 1.0,
          "emoji scale range must satisfy 0 < min <= max <= 1");
  require(text_len_min >= 1 && text_len_min <= text_len_max,
          "text length range must satisfy 1 <= min <= max");
  require(text_scale_min > 0.0 && text_scale_min <= text_scale_max && text_scale_max <= 1.0,
          "text scale range must satisfy 0 < min <= max <= 1");
  require(super_blur_sigma_min > 0.0 && super_blur_sigma_min <= super_blur_sigma_max,
          "super-blur sigma range must satisfy 0 < min <= max");
  require(super_color_factor > 0.0, "super_color_factor must be > 0");
  require(super_dark_min > 0.0 && super_dark_min <= super_dark_max && super_dark_max <= 1.0,
          "super-dark range must satisfy 0 < min <= max <= 1");
  require(super_face_scale_min > 0.0 && super_face_scale_min <= super_face_scale_max &&
              super_face_scale_max <= 1.0,
          "super-face scale range must satisfy 0 < min <= max <= 1");
  require(super_opaque_min >= 0.0 && super_opaque_min <= super_opaque_max &&
              super_opaque_max <= 1.0,
          "super-opaque range must satisfy 0 <= min <= max <= 1");
  require(occlude_count_min >= 1 && occlude_count_min <= occlude_count_max,
          "occlusion count range must satisfy 1 <= min <= max");
  require(occlude_area_max > 0.0 && occlude_area_max <= 1.0,
          "occlude_area_max must be in (0, 1]");
}

ImageBuffer black_white(const ImageBuffer& img) { return img::to_grayscale(img); }

ImageBuffer super_dark(const ImageBuffer& img, double factor) {
  if (!(factor >= 0.0 && factor <= 1.0)) {
    throw DomainError("super_dark: factor must be in [0, 1]");
  }
  ImageBuffer out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = clamp_byte(img.data[i] * factor);
  }
  return out;
}

ImageBuffer super_opaque(const ImageBuffer& img, const ImageBuffer& overlay, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("super_opaque: alpha must be in [0, 1]");
  }
  ImageBuffer out = img;
  if (overlay.width == img.width && overlay.height == img.height) {
    img::blend_over(out, overlay, alpha);
  } else {
    img::blend_over(out, img::resize_bilinear(overlay, img.width, img.height), alpha);
  }
  return out;
}

ImageBuffer occlude_rect(const ImageBuffer& img, const BoundingBox& box,
                         std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  ImageBuffer out = img;
  img::fill_rect(out, box.clipped(img.width, img.height), r, g, b);
  return out;
}

ImageBuffer apply_transform(const ImageBuffer& img, TransformKind kind,
                            const AugmentConfig& config, const AssetPools& pools, Rng& rng) {
  switch (kind) {
    case TransformKind::kResizedCrop: return resized_crop(img, config, rng);
    case TransformKind::kRotation: {
      if (rng.chance(config.rotation_discrete_prob)) {
        const int deg = 90 * (1 + static_cast<int>(rng.index(3)));
        return img::rotate_right_angle(img, deg);
      }
      const double angle = rng.uniform(-config.rotation_max_degrees, config.rotation_max_degrees);
      return img::rotate_arbitrary(img, angle);
    }
    case TransformKind::kPixelization: return pixelize(img, config, rng);
    case TransformKind::kPixelShuffle: return pixel_shuffle(img, config, rng);
    case TransformKind::kPerspective: return perspective(img, config, rng);
    case TransformKind::kPadding: return padding(img, config, rng);
    case TransformKind::kImageUnderlay: return image_underlay(img, config, pools, rng);
    case TransformKind::kColorJitter:
      return color_jitter(img, config.jitter_brightness, config.jitter_contrast,
                          config.jitter_saturation, config.jitter_hue, rng);
    case TransformKind::kBlur:
      return img::gaussian_blur(img, rng.uniform(config.blur_sigma_min, config.blur_sigma_max));
    case TransformKind::kGrayscale: return img::to_grayscale(img);
    case TransformKind::kHorizontalFlip: return img::flip_horizontal(img);
    case TransformKind::kEmojiOverlay: return emoji_overlay(img, config, rng);
    case TransformKind::kTextOverlay: return text_overlay(img, config, rng);
    case TransformKind::kImageOverlay: return image_overlay(img, config, pools, rng);
    case TransformKind::kResize: return img::resize_bilinear(img, config.side, config.side);
  }
  throw DomainError("apply_transform: unknown kind");
}

ImageBuffer apply_basic(const ImageBuffer& img, const AugmentationSet& set,
                        const AugmentConfig& config, const AssetPools& pools, Rng& rng) {
  if (!img.valid()) throw DomainError("apply_basic: invalid image");
  if (set.basic.empty()) throw DomainError("apply_basic: set has no basic transforms");
  ImageBuffer current = img;
  for (const auto& [kind, probability] : set.basic) {
    if (kind == TransformKind::kResize) continue; // always applied, once, below
    const double gate = rng.uniform();            // consumed even when the gate fails
    if (gate >= probability) continue;
    current = apply_transform(current, kind, config, pools, rng);
  }
  return img::resize_bilinear(current, config.side, config.side);
}

ImageBuffer apply_advanced(const ImageBuffer& img, AdvancedKind kind,
                           const AugmentConfig& config, const AssetPools& pools, Rng& rng) {
  switch (kind) {
    case AdvancedKind::kSuperBlur:
      return img::gaussian_blur(
          img, rng.uniform(config.super_blur_sigma_min, config.super_blur_sigma_max));
    case AdvancedKind::kSuperColor:
      return color_jitter(img, config.jitter_brightness * config.super_color_factor,
                          config.jitter_contrast * config.super_color_factor,
                          config.jitter_saturation * config.super_color_factor,
                          std::min(0.5, config.jitter_hue * config.super_color_factor), rng);
    case AdvancedKind::kSuperDark:
      return super_dark(img, rng.uniform(config.super_dark_min, config.super_dark_max));
    case AdvancedKind::kSuperFace: {
      if (pools.faces.empty()) {
        throw ConfigError("super-face requires a non-empty face asset pool");
      }
      const ImageBuffer& face = pools.faces.images[rng.index(pools.faces.size())];
      const double s = rng.uniform(config.super_face_scale_min, config.super_face_scale_max);
      const int w = std::max(1, static_cast<int>(std::lround(img.width * s)));
      const int h = std::max(1, static_cast<int>(std::lround(img.height * s)));
      const ImageBuffer small = img::resize_bilinear(face, w, h);
      const int x = static_cast<int>(rng.index(static_cast<std::size_t>(img.width - w) + 1));
      const int y = static_cast<int>(rng.index(static_cast<std::size_t>(img.height - h) + 1));
      ImageBuffer out = img;
      img::paste(out, small, x, y);
      return out;
    }
    case AdvancedKind::kSuperOpaque: {
      if (pools.underlays.empty()) {
        throw ConfigError("super-opaque requires a non-empty underlay asset pool");
      }
      const ImageBuffer& pick = pools.underlays.images[rng.index(pools.underlays.size())];
      const double alpha = rng.uniform(config.super_opaque_min, config.super_opaque_max);
      return super_opaque(img, pick, alpha);
    }
    case AdvancedKind::kSuperOcclude: {
      ImageBuffer out = img;
      const int count = rng.uniform_int(config.occlude_count_min, config.occlude_count_max);
      for (int k = 0; k < count; ++k) {
        const double area = rng.uniform(0.0, config.occlude_area_max) *
                            static_cast<double>(img.width) * img.height;
        const double aspect = rng.uniform(0.5, 2.0);
        int w = std::max(1, static_cast<int>(std::lround(std::sqrt(area * aspect))));
        int h = std::max(1, static_cast<int>(std::lround(std::sqrt(area / aspect))));
        w = std::min(w, img.width);
        h = std::min(h, img.height);
        const int x = static_cast<int>(rng.index(static_cast<std::size_t>(img.width - w) + 1));
        const int y = static_cast<int>(rng.index(static_cast<std::size_t>(img.height - h) + 1));
        const std::uint8_t r = static_cast<std::uint8_t>(rng.index(256));
        const std::uint8_t g = static_cast<std::uint8_t>(rng.index(256));
        const std::uint8_t b = static_cast<std::uint8_t>(rng.index(256));
        img::fill_rect(out, BoundingBox{x, y, w, h}, r, g, b);
      }
      return out;
    }
  }
  throw DomainError("apply_advanced: unknown kind");
}

std::vector<AugmentationSet> enumerate_sets(const AugmentConfig& config) {
  config.validate();
  std::vector<std::pair<TransformKind, double>> basic;
  basic.reserve(kTransformKindCount);
  for (int i = 0; i < kTransformKindCount; ++i) {
    const auto kind = static_cast<TransformKind>(i);
    basic.emplace_back(kind, kind == TransformKind::kResize ? 1.0 : config.probability);
  }

  std::vector<AugmentationSet> sets;
  sets.push_back({"basic", basic, std::nullopt, false});
  for (int i = 0; i < kAdvancedKindCount; ++i) {
    const auto kind = static_cast<AdvancedKind>(i);
    sets.push_back({"basic+" + std::string(to_string(kind)), basic, kind, false});
  }
  sets.push_back({"basic+bw", basic, std::nullopt, true});
  sets.push_back({"basic+super-blur+bw", basic, AdvancedKind::kSuperBlur, true});
  sets.push_back({"basic+super-color+bw", basic, AdvancedKind::kSuperColor, true});
  sets.push_back({"basic+super-face+bw", basic, AdvancedKind::kSuperFace, true});
  return sets;
}

AssetPool AssetPool::from_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("asset directory not found: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  AssetPool pool;
  pool.images.reserve(files.size());
  for (const auto& f : files) pool.images.push_back(io::load_ppm(f));
  return pool;
}

void CorpusManifest::write(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open manifest for writing: " + path.string());
  out << "identity,variant_index,path\n";
  for (const auto& e : entries) {
    out << e.identity << ',' << e.variant_index << ',' << e.path << '\n';
  }
  for (const auto& s : skipped) {
    out << "# skipped: " << s << '\n';
  }
  if (!out) throw IoError("manifest write failed: " + path.string());
}

CorpusManifest CorpusManifest::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  CorpusManifest manifest;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kSkipPrefix = "# skipped: ";
      if (line.size() > kSkipPrefix.size() && line.compare(0, kSkipPrefix.size(), kSkipPrefix) == 0) {
        manifest.skipped.push_back(line.substr(kSkipPrefix.size()));
      }
      continue;
    }
    if (!saw_header) {
      if (line != "identity,variant_index,path") {
        throw FormatError("manifest: bad header: " + line);
      }
      saw_header = true;
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw FormatError("manifest: bad row: " + line);
    CorpusManifest::Entry entry;
    entry.identity = line.substr(0, c1);
    try {
      entry.variant_index = static_cast<std::uint32_t>(std::stoul(line.substr(c1 + 1, c2 - c1 - 1)));
    } catch (const std::exception&) {
      throw FormatError("manifest: bad variant index: " + line);
    }
    entry.path = line.substr(c2 + 1);
    manifest.entries.push_back(std::move(entry));
  }
  if (!saw_header) throw FormatError("manifest: missing header");
  return manifest;
}

CorpusManifest generate_corpus(const std::vector<fs::path>& sources, const AugmentationSet& set,
                               const AugmentConfig& config, const AssetPools& pools,
                               const SeedPolicy& policy, const fs::path& out_dir, int jobs) {
  if (sources.empty()) throw DomainError("generate_corpus: source listing is empty");
  config.validate();
  fs::create_directories(out_dir);

  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < sources.size(); i += 10) selected.push_back(i);

  std::vector<char> succeeded(selected.size(), 0);
  parallel_for(selected.size(), static_cast<unsigned>(std::max(0, jobs)),
               [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const fs::path& source = sources[selected[k]];
      ImageBuffer base;
      try {
        base = io::load_ppm(source);
      } catch (const Error& e) {
        std::cerr << "warning: skipping unreadable source " << source.string() << ": "
                  << e.what() << "\n";
        continue;
      }
      const std::string identity = identity_label(k);
      for (std::uint32_t v = 0; v < kVariantsPerIdentity; ++v) {
        ImageBuffer out_img;
        if (v == 0) {
          out_img = img::resize_bilinear(base, config.side, config.side);
        } else {
          Rng rng = policy.stream(identity, v);
          out_img = apply_basic(base, set, config, pools, rng);
          if (set.advanced) out_img = apply_advanced(out_img, *set.advanced, config, pools, rng);
          if (set.black_white) out_img = black_white(out_img);
        }
        io::save_ppm(out_img, out_dir / variant_filename(identity, v));
      }
      succeeded[k] = 1;
    }
  });

  CorpusManifest manifest;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (!succeeded[k]) {
      manifest.skipped.push_back(sources[selected[k]].string());
      continue;
    }
    const std::string identity = identity_label(k);
    for (std::uint32_t v = 0; v < kVariantsPerIdentity; ++v) {
      manifest.entries.push_back({identity, v, (out_dir / variant_filename(identity, v)).string()});
    }
  }
  return manifest;
}

} // namespace d2lv
