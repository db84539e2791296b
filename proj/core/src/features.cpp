#include "d2lv/features.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>

#include "d2lv/errors.hpp"
#include "d2lv/io.hpp"
#include "d2lv/parallel.hpp"

namespace d2lv {
namespace {

constexpr char kPcaMagic[4] = {'D', '2', 'P', 'C'};

void put_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed");
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void get_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw TruncationError("stream ended inside a PCA model");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

// Cell index lookup matching the integer boundaries i*dim/g.
std::vector<int> cell_of_coordinate(int dim, int g) {
  std::vector<int> lut(static_cast<std::size_t>(dim), g - 1);
  for (int c = 0; c < g; ++c) {
    const int lo = c * dim / g;
    const int hi = (c + 1) * dim / g;
    for (int x = lo; x < hi; ++x) lut[static_cast<std::size_t>(x)] = c;
  }
  return lut;
}

} // namespace

TiledDescriptor::TiledDescriptor(std::string model_id, int grid)
    : id_(std::move(model_id)), grid_(grid) {
  if (grid_ < 1) throw ConfigError("TiledDescriptor: grid must be >= 1");
  if (id_.empty()) throw ConfigError("TiledDescriptor: model id must be non-empty");
}

std::vector<float> TiledDescriptor::compute(const ImageBuffer& img) const {
  if (!img.valid()) throw DomainError("TiledDescriptor: invalid image");
  const int g = grid_;
  const int w = img.width, h = img.height;
  std::vector<float> out(output_dim(), 0.0f);

  const std::vector<int> col_of = cell_of_coordinate(w, g);
  const std::vector<int> row_of = cell_of_coordinate(h, g);

  // Per-cell color means in [0, 1].
  std::vector<double> sums(static_cast<std::size_t>(g) * g * 3, 0.0);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(g) * g, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t cell = static_cast<std::size_t>(row_of[y]) * g + col_of[x];
      for (int c = 0; c < 3; ++c) sums[cell * 3 + c] += img.at(x, y, c);
      ++counts[cell];
    }
  }
  for (std::size_t cell = 0; cell < counts.size(); ++cell) {
    if (counts[cell] == 0) continue;
    for (int c = 0; c < 3; ++c) {
      out[cell * 11 + c] = static_cast<float>(sums[cell * 3 + c] / (255.0 * counts[cell]));
    }
  }

  // Per-cell 8-bin orientation histogram, magnitude-weighted, then each
  // cell's histogram normalized to unit mass so the descriptor is stable
  // under proportional resampling.
  const std::vector<float> luma = img::luma_f32(img);
  std::vector<double> hist(static_cast<std::size_t>(g) * g * 8, 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = (luma[static_cast<std::size_t>(y) * w + x + 1] -
                         luma[static_cast<std::size_t>(y) * w + x - 1]) * 0.5;
      const double gy = (luma[(static_cast<std::size_t>(y) + 1) * w + x] -
                         luma[(static_cast<std::size_t>(y) - 1) * w + x]) * 0.5;
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag <= 0.0) continue;
      const double angle = std::atan2(gy, gx); // [-pi, pi]
      int bin = static_cast<int>((angle + M_PI) / (2.0 * M_PI) * 8.0);
      bin = std::clamp(bin, 0, 7);
      const std::size_t cell = static_cast<std::size_t>(row_of[y]) * g + col_of[x];
      hist[cell * 8 + bin] += mag;
    }
  }
  for (std::size_t cell = 0; cell < counts.size(); ++cell) {
    double mass = 0.0;
    for (int b = 0; b < 8; ++b) mass += hist[cell * 8 + b];
    if (mass <= 0.0) continue;
    for (int b = 0; b < 8; ++b) {
      out[cell * 11 + 3 + b] = static_cast<float>(hist[cell * 8 + b] / mass);
    }
  }
  return out;
}

std::vector<float> describe(const DescriptorModel& model, const ImageBuffer& patch_pixels,
                            int scale) {
  if (scale < 1) throw DomainError("describe: scale must be positive");
  std::vector<float> raw = model.compute(img::resize_bilinear(patch_pixels, scale, scale));
  if (raw.size() != model.output_dim()) {
    throw DomainError("describe: model returned wrong dimension");
  }
  double norm_sq = 0.0;
  for (float v : raw) {
    if (!std::isfinite(v)) throw DomainError("describe: non-finite descriptor value");
    norm_sq += static_cast<double>(v) * v;
  }
  if (norm_sq < 1e-24) {
    std::fill(raw.begin(), raw.end(), 0.0f);
    raw[0] = 1.0f;
    return raw;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (float& v : raw) v = static_cast<float>(v * inv);
  return raw;
}

PcaModel pca_fit(const std::vector<std::vector<float>>& samples, std::uint32_t d_out,
                 bool whiten) {
  if (samples.empty()) throw DomainError("pca_fit: no samples");
  const std::size_t d = samples[0].size();
  if (d == 0) throw DomainError("pca_fit: zero-dimensional samples");
  for (const auto& s : samples) {
    if (s.size() != d) throw DomainError("pca_fit: inconsistent sample dimensions");
  }
  if (d_out == 0) throw DomainError("pca_fit: d_out must be >= 1");
  if (samples.size() < d_out) {
    throw DomainError("pca_fit: sample count must be >= d_out");
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto dim = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      x(i, j) = samples[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw DomainError("pca_fit: eigendecomposition failed");
  }
  const Eigen::VectorXd evals = solver.eigenvalues(); // ascending
  const Eigen::MatrixXd evecs = solver.eigenvectors();

  const double lambda_max = std::max(0.0, evals(dim - 1));
  const double tol = lambda_max * 1e-12;
  std::uint32_t rank = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (evals(i) > tol && evals(i) > 0.0) ++rank;
  }
  if (rank == 0) throw DomainError("pca_fit: sample covariance has rank 0");
  if (d_out > rank) {
    std::cerr << "warning: pca_fit: requested d_out " << d_out << " exceeds data rank " << rank
              << "; reducing\n";
    d_out = rank;
  }

  PcaModel model;
  model.d_raw = static_cast<std::uint32_t>(d);
  model.d_out = d_out;
  model.mean.resize(d);
  for (Eigen::Index j = 0; j < dim; ++j) model.mean[static_cast<std::size_t>(j)] = mean(j);
  model.components.resize(static_cast<std::size_t>(d_out) * d);
  model.explained_variance.resize(d_out);
  model.total_variance = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) model.total_variance += std::max(0.0, evals(i));

  for (std::uint32_t r = 0; r < d_out; ++r) {
    const Eigen::Index src = dim - 1 - static_cast<Eigen::Index>(r); // descending variance
    Eigen::VectorXd row = evecs.col(src);
    // Canonical sign: the largest-magnitude element is positive.
    Eigen::Index arg_max = 0;
    row.cwiseAbs().maxCoeff(&arg_max);
    if (row(arg_max) < 0.0) row = -row;
    const double lambda = std::max(0.0, evals(src));
    model.explained_variance[r] = lambda;
    const double scale = whiten ? 1.0 / std::sqrt(std::max(lambda, 1e-12)) : 1.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      model.components[static_cast<std::size_t>(r) * d + static_cast<std::size_t>(j)] =
          row(j) * scale;
    }
  }
  return model;
}

std::vector<double> pca_project_raw(const PcaModel& model, std::span<const float> v) {
  if (v.size() != model.d_raw) throw DomainError("pca_project: dimension mismatch");
  std::vector<double> out(model.d_out, 0.0);
  for (std::uint32_t r = 0; r < model.d_out; ++r) {
    double acc = 0.0;
    const double* row = model.components.data() + static_cast<std::size_t>(r) * model.d_raw;
    for (std::uint32_t j = 0; j < model.d_raw; ++j) {
      acc += row[j] * (static_cast<double>(v[j]) - model.mean[j]);
    }
    out[r] = acc;
  }
  return out;
}

Projection pca_project(const PcaModel& model, std::span<const float> v) {
  const std::vector<double> raw = pca_project_raw(model, v);
  Projection result;
  result.vector.resize(raw.size(), 0.0f);
  double norm_sq = 0.0;
  for (double x : raw) norm_sq += x * x;
  if (norm_sq < 1e-24) {
    result.vector[0] = 1.0f;
    result.flagged_zero = true;
    return result;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    result.vector[i] = static_cast<float>(raw[i] * inv);
  }
  return result;
}

void PcaModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open PCA model for writing: " + path.string());
  try {
    put_bytes(out, kPcaMagic, 4);
    put_u32(out, d_raw);
    put_u32(out, d_out);
    for (double v : mean) put_f32(out, static_cast<float>(v));
    for (double v : components) put_f32(out, static_cast<float>(v));
  } catch (const IoError&) {
    throw IoError("PCA model write failed: " + path.string());
  }
  out.flush();
  if (!out) throw IoError("PCA model write failed: " + path.string());
}

PcaModel PcaModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PCA model: " + path.string());
  char magic[4];
  get_bytes(in, magic, 4);
  if (std::memcmp(magic, kPcaMagic, 4) != 0) {
    throw FormatError("not a PCA model file (bad magic): " + path.string());
  }
  PcaModel model;
  model.d_raw = get_u32(in);
  model.d_out = get_u32(in);
  if (model.d_raw == 0 || model.d_out == 0 || model.d_out > model.d_raw) {
    throw CorruptionError("PCA model has invalid dimensions: " + path.string());
  }
  model.mean.resize(model.d_raw);
  for (double& v : model.mean) {
    const float f = get_f32(in);
    if (!std::isfinite(f)) throw CorruptionError("PCA model mean has non-finite value");
    v = f;
  }
  model.components.resize(static_cast<std::size_t>(model.d_out) * model.d_raw);
  for (double& v : model.components) {
    const float f = get_f32(in);
    if (!std::isfinite(f)) throw CorruptionError("PCA model components have non-finite value");
    v = f;
  }
  return model;
}

FeatureStore extract_all(const std::vector<std::pair<ImageId, std::filesystem::path>>& images,
                         const PatchPlan& plan, const DescriptorModel& model,
                         const ExtractOptions& options) {
  if (options.scales.empty()) throw ConfigError("extract_all: scale set is empty");
  for (int s : options.scales) {
    if (s < 1) throw ConfigError("extract_all: scales must be positive");
  }
  if (options.pca != nullptr && options.pca->d_raw != model.output_dim()) {
    throw ConfigError("extract_all: PCA input dimension does not match the descriptor");
  }

  std::vector<std::vector<FeatureRecord>> slots(images.size());
  parallel_for(images.size(), options.jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& [id, path] = images[i];
      ImageBuffer img;
      try {
        img = io::load_ppm(path);
      } catch (const Error& e) {
        std::cerr << "warning: skipping unreadable image " << path.string() << ": " << e.what()
                  << "\n";
        continue;
      }
      const std::vector<Patch> patches =
          options.queries ? query_patches(id, img, plan, options.detector)
                          : reference_patches(id, img, plan);
      for (const Patch& patch : patches) {
        for (int scale : options.scales) {
          std::vector<float> vec = describe(model, patch.pixels, scale);
          if (options.pca != nullptr) vec = pca_project(*options.pca, vec).vector;
          FeatureRecord record;
          record.image = id;
          record.patch = patch.patch_id;
          record.model = model.model_id();
          record.scale = static_cast<std::uint32_t>(scale);
          record.vector = std::move(vec);
          slots[i].push_back(std::move(record));
        }
      }
    }
  });

  std::vector<FeatureRecord> all;
  for (auto& slot : slots) {
    for (auto& record : slot) all.push_back(std::move(record));
  }
  std::sort(all.begin(), all.end(), [](const FeatureRecord& a, const FeatureRecord& b) {
    return a.key() < b.key();
  });

  const std::uint32_t dim =
      options.pca != nullptr ? options.pca->d_out : model.output_dim();
  FeatureStore store(dim);
  for (auto& record : all) store.append(std::move(record));
  return store;
}

} // namespace d2lv
