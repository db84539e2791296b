#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "d2lv/errors.hpp"

namespace d2lv {

// Opaque image identifier ("Q00031", "R000512"). Kept CSV-safe at construction.
class ImageId {
public:
    ImageId() = default;
    explicit ImageId(std::string value);

    const std::string& str() const { return value_; }
    bool empty() const { return value_.empty(); }

    friend bool operator==(const ImageId&, const ImageId&) = default;
    friend auto operator<=>(const ImageId&, const ImageId&) = default;

private:
    std::string value_;
};

// Decoded RGB raster, row-major, 8 bits per sample.
struct ImageBuffer {
    static constexpr int kChannels = 3;

    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h);

    static ImageBuffer filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }

    bool valid() const {
        return width >= 1 && height >= 1 &&
               data.size() == static_cast<std::size_t>(width) * height * kChannels;
    }

    bool operator==(const ImageBuffer&) const = default;
};

struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    std::int64_t area() const { return static_cast<std::int64_t>(w) * h; }
    bool inside(int frame_w, int frame_h) const {
        return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= frame_w && y + h <= frame_h;
    }
    BoundingBox clipped(int frame_w, int frame_h) const;
    double iou(const BoundingBox& other) const;

    bool operator==(const BoundingBox&) const = default;
};

// One unit-norm descriptor row, keyed by (image, patch, model, scale).
struct FeatureRecord {
    ImageId image;
    std::string patch;
    std::string model;
    std::uint32_t scale = 0;
    std::vector<float> vector;

    std::string key() const;
};

class FeatureStore {
public:
    explicit FeatureStore(std::uint32_t dim);

    void append(FeatureRecord record);

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const std::vector<FeatureRecord>& records() const { return records_; }
    const FeatureRecord& operator[](std::size_t i) const { return records_[i]; }

private:
    std::uint32_t dim_;
    std::vector<FeatureRecord> records_;
    std::unordered_set<std::string> keys_;
};

struct PairScore {
    ImageId query;
    ImageId reference;
    double score = 0.0;
};

// Norm tolerance applied to every stored descriptor row.
inline constexpr double kUnitNormTolerance = 1e-6;

} // namespace d2lv
