#pragma once

#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "d2lv/types.hpp"

namespace d2lv::io {

// Feature store container: magic "D2LV", version u32 LE (=1), record count
// u64 LE, dim u32 LE; per record three u16-length-prefixed UTF-8 strings
// (image, patch, model), scale u32 LE, then dim float32 LE values.
void write_feature_store(const FeatureStore& store, std::ostream& sink);
FeatureStore read_feature_store(std::istream& source);
void save_feature_store(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore load_feature_store(const std::filesystem::path& path);

// Pair CSV: header "query_id,reference_id,score", scores at 6 decimals.
void write_pairs(const std::vector<PairScore>& pairs, std::ostream& sink);
std::vector<PairScore> read_pairs(std::istream& source);
void save_pairs(const std::vector<PairScore>& pairs, const std::filesystem::path& path);
std::vector<PairScore> load_pairs(const std::filesystem::path& path);

// Ground-truth CSV: header "query_id,reference_id".
void write_ground_truth(const std::vector<std::pair<ImageId, ImageId>>& pairs, std::ostream& sink);
std::vector<std::pair<ImageId, ImageId>> read_ground_truth(std::istream& source);
std::vector<std::pair<ImageId, ImageId>> load_ground_truth(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255), the one raster format the artifact speaks.
void write_ppm(const ImageBuffer& img, std::ostream& sink);
ImageBuffer read_ppm(std::istream& source);
void save_ppm(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer load_ppm(const std::filesystem::path& path);

} // namespace d2lv::io
