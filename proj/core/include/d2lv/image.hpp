#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "d2lv/types.hpp"

namespace d2lv::img {

// Bilinear resample. Sampling tables are built for the left/top half and
// mirrored to the other half, so resizing commutes bit-exactly with
// horizontal/vertical flips. Same-size calls return a copy.
ImageBuffer resize_bilinear(const ImageBuffer& src, int out_w, int out_h);

ImageBuffer crop(const ImageBuffer& src, const BoundingBox& box);

// Right-angle rotations are index permutations: lossless, no resampling.
ImageBuffer rotate90(const ImageBuffer& src);
ImageBuffer rotate180(const ImageBuffer& src);
ImageBuffer rotate270(const ImageBuffer& src);
ImageBuffer rotate_right_angle(const ImageBuffer& src, int degrees);

// Arbitrary-angle rotation about the center, bilinear, black fill.
ImageBuffer rotate_arbitrary(const ImageBuffer& src, double degrees);

ImageBuffer flip_horizontal(const ImageBuffer& src);

// Integer luma (BT.601 weights, fixed point). Idempotent.
ImageBuffer to_grayscale(const ImageBuffer& src);

ImageBuffer gaussian_blur(const ImageBuffer& src, double sigma);

// dst[p] = round(alpha * src[p] + (1 - alpha) * dst[p]); sizes must match.
void blend_over(ImageBuffer& dst, const ImageBuffer& src, double alpha);

// Opaque copy of src onto dst at (x, y), clipped to the frame.
void paste(ImageBuffer& dst, const ImageBuffer& src, int x, int y);

void fill_rect(ImageBuffer& dst, const BoundingBox& box,
               std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Luma plane scaled to [0, 1].
std::vector<float> luma_f32(const ImageBuffer& src);

// 3x3 homography mapping (x, y, 1) dest pixel coordinates to source.
using Homography = std::array<double, 9>;

// Solves for H such that H * dst_quad[i] ~ src_quad[i] (pixel coordinates).
Homography homography_from_quads(const std::array<std::array<double, 2>, 4>& dst_quad,
                                 const std::array<std::array<double, 2>, 4>& src_quad);

// Inverse-maps every output pixel through H, bilinear, black outside.
ImageBuffer warp_perspective(const ImageBuffer& src, const Homography& dest_to_src,
                             int out_w, int out_h);

} // namespace d2lv::img
