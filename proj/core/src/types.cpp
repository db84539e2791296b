#include "d2lv/types.hpp"

#include <cmath>

namespace d2lv {

ImageId::ImageId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) {
        throw DomainError("image id must be non-empty");
    }
    if (value_.find_first_of(",\n\r") != std::string::npos) {
        throw DomainError("image id '" + value_ + "' contains a comma or newline");
    }
}

ImageBuffer::ImageBuffer(int w, int h)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, 0) {
    if (w < 1 || h < 1) {
        throw DomainError("image dimensions must be at least 1x1");
    }
}

ImageBuffer ImageBuffer::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ImageBuffer img(w, h);
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
        img.data[i] = r;
        img.data[i + 1] = g;
        img.data[i + 2] = b;
    }
    return img;
}

BoundingBox BoundingBox::clipped(int frame_w, int frame_h) const {
    int x0 = std::clamp(x, 0, frame_w);
    int y0 = std::clamp(y, 0, frame_h);
    int x1 = std::clamp(x + w, 0, frame_w);
    int y1 = std::clamp(y + h, 0, frame_h);
    return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

double BoundingBox::iou(const BoundingBox& other) const {
    std::int64_t ix0 = std::max(x, other.x);
    std::int64_t iy0 = std::max(y, other.y);
    std::int64_t ix1 = std::min<std::int64_t>(x + w, other.x + other.w);
    std::int64_t iy1 = std::min<std::int64_t>(y + h, other.y + other.h);
    std::int64_t inter = std::max<std::int64_t>(0, ix1 - ix0) * std::max<std::int64_t>(0, iy1 - iy0);
    std::int64_t uni = area() + other.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::string FeatureRecord::key() const {
    std::string k;
    k.reserve(image.str().size() + patch.size() + model.size() + 16);
    k += image.str();
    k += '\x1f';
    k += patch;
    k += '\x1f';
    k += model;
    k += '\x1f';
    k += std::to_string(scale);
    return k;
}

FeatureStore::FeatureStore(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) {
        throw DomainError("feature store dimension must be positive");
    }
}

void FeatureStore::append(FeatureRecord record) {
    if (record.vector.size() != dim_) {
        throw DomainError("record dimension " + std::to_string(record.vector.size()) +
                          " does not match store dimension " + std::to_string(dim_));
    }
    double norm_sq = 0.0;
    for (float v : record.vector) {
        if (!std::isfinite(v)) {
            throw DomainError("record for " + record.image.str() + " has a non-finite component");
        }
        norm_sq += static_cast<double>(v) * v;
    }
    if (std::abs(std::sqrt(norm_sq) - 1.0) > kUnitNormTolerance) {
        throw DomainError("record for " + record.image.str() + " is not unit-norm");
    }
    std::string key = record.key();
    if (!keys_.insert(key).second) {
        throw DomainError("duplicate feature key: " + key);
    }
    records_.push_back(std::move(record));
}

} // namespace d2lv
