#include "d2lv/image.hpp"

#include <algorithm>
#include <cmath>

#include "d2lv/errors.hpp"

namespace d2lv::img {

namespace {

struct AxisTap {
    int i0;
    int i1;
    double w0;
    double w1;
};

// Canonical taps for the first half, mirrored for the second half. The mirror
// entry reuses the canonical weights with reflected indices, which keeps
// resampling exactly reflection-symmetric.
std::vector<AxisTap> build_axis(int in_n, int out_n) {
    std::vector<AxisTap> taps(out_n);
    for (int i = 0; i < (out_n + 1) / 2; ++i) {
        double src = (i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
        int i0 = static_cast<int>(std::floor(src));
        double f = src - i0;
        int i1 = std::min(i0 + 1, in_n - 1);
        taps[i] = AxisTap{i0, i1, 1.0 - f, f};
        int j = out_n - 1 - i;
        taps[j] = AxisTap{in_n - 1 - i0, in_n - 1 - i1, 1.0 - f, f};
    }
    return taps;
}

std::uint8_t to_byte(double v) {
    long r = std::lround(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

} // namespace

ImageBuffer resize_bilinear(const ImageBuffer& src, int out_w, int out_h) {
    if (!src.valid()) {
        throw DomainError("resize_bilinear: invalid source image");
    }
    if (out_w < 1 || out_h < 1) {
        throw DomainError("resize_bilinear: output must be at least 1x1");
    }
    if (out_w == src.width && out_h == src.height) {
        return src;
    }
    const auto xs = build_axis(src.width, out_w);
    const auto ys = build_axis(src.height, out_h);
    ImageBuffer out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const AxisTap& ty = ys[y];
        for (int x = 0; x < out_w; ++x) {
            const AxisTap& tx = xs[x];
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                double top = tx.w0 * src.at(tx.i0, ty.i0, c) + tx.w1 * src.at(tx.i1, ty.i0, c);
                double bot = tx.w0 * src.at(tx.i0, ty.i1, c) + tx.w1 * src.at(tx.i1, ty.i1, c);
                out.at(x, y, c) = to_byte(ty.w0 * top + ty.w1 * bot);
            }
        }
    }
    return out;
}

ImageBuffer crop(const ImageBuffer& src, const BoundingBox& box) {
    if (!box.inside(src.width, src.height)) {
        throw DomainError("crop: box does not fit inside the frame");
    }
    ImageBuffer out(box.w, box.h);
    for (int y = 0; y < box.h; ++y) {
        auto src_begin = src.data.begin() +
            (static_cast<std::size_t>(box.y + y) * src.width + box.x) * ImageBuffer::kChannels;
        std::copy_n(src_begin, static_cast<std::size_t>(box.w) * ImageBuffer::kChannels,
                    out.data.begin() + static_cast<std::size_t>(y) * box.w * ImageBuffer::kChannels);
    }
    return out;
}

ImageBuffer rotate90(const ImageBuffer& src) {
    ImageBuffer out(src.height, src.width);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                out.at(x, y, c) = src.at(y, src.height - 1 - x, c);
            }
        }
    }
    return out;
}

ImageBuffer rotate180(const ImageBuffer& src) {
    ImageBuffer out(src.width, src.height);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                out.at(x, y, c) = src.at(src.width - 1 - x, src.height - 1 - y, c);
            }
        }
    }
    return out;
}

ImageBuffer rotate270(const ImageBuffer& src) {
    ImageBuffer out(src.height, src.width);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                out.at(x, y, c) = src.at(src.width - 1 - y, x, c);
            }
        }
    }
    return out;
}

ImageBuffer rotate_right_angle(const ImageBuffer& src, int degrees) {
    switch (((degrees % 360) + 360) % 360) {
        case 0: return src;
        case 90: return rotate90(src);
        case 180: return rotate180(src);
        case 270: return rotate270(src);
        default: throw DomainError("rotate_right_angle: degrees must be a multiple of 90");
    }
}

ImageBuffer rotate_arbitrary(const ImageBuffer& src, double degrees) {
    double rad = degrees * M_PI / 180.0;
    double cs = std::cos(rad);
    double sn = std::sin(rad);
    double cx = (src.width - 1) * 0.5;
    double cy = (src.height - 1) * 0.5;
    ImageBuffer out(src.width, src.height);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            double dx = x - cx;
            double dy = y - cy;
            double sx = cx + cs * dx + sn * dy;
            double sy = cy - sn * dx + cs * dy;
            if (sx < 0 || sy < 0 || sx > src.width - 1 || sy > src.height - 1) {
                continue;
            }
            int x0 = static_cast<int>(sx);
            int y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, src.width - 1);
            int y1 = std::min(y0 + 1, src.height - 1);
            double fx = sx - x0;
            double fy = sy - y0;
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                double top = (1 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
                double bot = (1 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
                out.at(x, y, c) = to_byte((1 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

ImageBuffer flip_horizontal(const ImageBuffer& src) {
    ImageBuffer out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                out.at(x, y, c) = src.at(src.width - 1 - x, y, c);
            }
        }
    }
    return out;
}

ImageBuffer to_grayscale(const ImageBuffer& src) {
    ImageBuffer out(src.width, src.height);
    for (std::size_t i = 0; i < src.data.size(); i += 3) {
        unsigned luma = (299u * src.data[i] + 587u * src.data[i + 1] +
                         114u * src.data[i + 2] + 500u) / 1000u;
        out.data[i] = out.data[i + 1] = out.data[i + 2] = static_cast<std::uint8_t>(luma);
    }
    return out;
}

ImageBuffer gaussian_blur(const ImageBuffer& src, double sigma) {
    if (sigma <= 0.0) {
        return src;
    }
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
        kernel[k + radius] = w;
        sum += w;
    }
    for (double& w : kernel) {
        w /= sum;
    }

    auto clamp_x = [&](int v) { return std::clamp(v, 0, src.width - 1); };
    auto clamp_y = [&](int v) { return std::clamp(v, 0, src.height - 1); };

    std::vector<double> tmp(src.data.size());
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += kernel[k + radius] * src.at(clamp_x(x + k), y, c);
                }
                tmp[(static_cast<std::size_t>(y) * src.width + x) * 3 + c] = acc;
            }
        }
    }
    ImageBuffer out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += kernel[k + radius] *
                           tmp[(static_cast<std::size_t>(clamp_y(y + k)) * src.width + x) * 3 + c];
                }
                out.at(x, y, c) = to_byte(acc);
            }
        }
    }
    return out;
}

void blend_over(ImageBuffer& dst, const ImageBuffer& src, double alpha) {
    if (dst.width != src.width || dst.height != src.height) {
        throw DomainError("blend_over: size mismatch");
    }
    for (std::size_t i = 0; i < dst.data.size(); ++i) {
        dst.data[i] = to_byte(alpha * src.data[i] + (1.0 - alpha) * dst.data[i]);
    }
}

void paste(ImageBuffer& dst, const ImageBuffer& src, int x, int y) {
    int x0 = std::max(0, x);
    int y0 = std::max(0, y);
    int x1 = std::min(dst.width, x + src.width);
    int y1 = std::min(dst.height, y + src.height);
    for (int dy = y0; dy < y1; ++dy) {
        for (int dx = x0; dx < x1; ++dx) {
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                dst.at(dx, dy, c) = src.at(dx - x, dy - y, c);
            }
        }
    }
}

void fill_rect(ImageBuffer& dst, const BoundingBox& box,
               std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    BoundingBox clipped = box.clipped(dst.width, dst.height);
    for (int y = clipped.y; y < clipped.y + clipped.h; ++y) {
        for (int x = clipped.x; x < clipped.x + clipped.w; ++x) {
            dst.at(x, y, 0) = r;
            dst.at(x, y, 1) = g;
            dst.at(x, y, 2) = b;
        }
    }
}

std::vector<float> luma_f32(const ImageBuffer& src) {
    std::vector<float> out(static_cast<std::size_t>(src.width) * src.height);
    for (std::size_t p = 0, i = 0; i < src.data.size(); i += 3, ++p) {
        out[p] = (0.299f * src.data[i] + 0.587f * src.data[i + 1] +
                  0.114f * src.data[i + 2]) / 255.0f;
    }
    return out;
}

Homography homography_from_quads(const std::array<std::array<double, 2>, 4>& dst_quad,
                                 const std::array<std::array<double, 2>, 4>& src_quad) {
    // 8 unknowns (h22 = 1), Gaussian elimination with partial pivoting.
    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        double xd = dst_quad[i][0], yd = dst_quad[i][1];
        double xs = src_quad[i][0], ys = src_quad[i][1];
        double* r0 = a[2 * i];
        double* r1 = a[2 * i + 1];
        r0[0] = xd; r0[1] = yd; r0[2] = 1; r0[6] = -xd * xs; r0[7] = -yd * xs; r0[8] = xs;
        r1[3] = xd; r1[4] = yd; r1[5] = 1; r1[6] = -xd * ys; r1[7] = -yd * ys; r1[8] = ys;
    }
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 8; ++row) {
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) {
                pivot = row;
            }
        }
        if (std::abs(a[pivot][col]) < 1e-12) {
            throw DomainError("homography_from_quads: degenerate quad");
        }
        std::swap_ranges(a[col], a[col] + 9, a[pivot]);
        for (int row = 0; row < 8; ++row) {
            if (row == col) {
                continue;
            }
            double factor = a[row][col] / a[col][col];
            for (int k = col; k < 9; ++k) {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    Homography h;
    for (int i = 0; i < 8; ++i) {
        h[i] = a[i][8] / a[i][i];
    }
    h[8] = 1.0;
    return h;
}

ImageBuffer warp_perspective(const ImageBuffer& src, const Homography& m,
                             int out_w, int out_h) {
    ImageBuffer out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double w = m[6] * x + m[7] * y + m[8];
            if (std::abs(w) < 1e-12) {
                continue;
            }
            double sx = (m[0] * x + m[1] * y + m[2]) / w;
            double sy = (m[3] * x + m[4] * y + m[5]) / w;
            if (sx < 0 || sy < 0 || sx > src.width - 1 || sy > src.height - 1) {
                continue;
            }
            int x0 = static_cast<int>(sx);
            int y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, src.width - 1);
            int y1 = std::min(y0 + 1, src.height - 1);
            double fx = sx - x0;
            double fy = sy - y0;
            for (int c = 0; c < ImageBuffer::kChannels; ++c) {
                double top = (1 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
                double bot = (1 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
                out.at(x, y, c) = to_byte((1 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

} // namespace d2lv::img
