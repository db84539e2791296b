#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "d2lv/errors.hpp"
#include "d2lv/features.hpp"
#include "d2lv/image.hpp"
#include "d2lv/io.hpp"
#include "d2lv/patches.hpp"
#include "d2lv/rng.hpp"

using namespace d2lv;
namespace fs = std::filesystem;

namespace {

ImageBuffer random_image(Rng& rng, int w, int h) {
  ImageBuffer img(w, h);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

template <typename A, typename B>
double cosine(const A& a, const B& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  return dot / std::sqrt(na * nb);
}

template <typename A, typename B>
double euclid(const A& a, const B& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Brute-force cyclic Jacobi eigendecomposition of a symmetric matrix,
// independent of the library's solver. Returns eigenvalues descending.
std::vector<double> jacobi_eigenvalues(std::vector<double> m, int dim) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < dim; ++p) {
      for (int q = p + 1; q < dim; ++q) off += m[p * dim + q] * m[p * dim + q];
    }
    if (off < 1e-24) break;
    for (int p = 0; p < dim; ++p) {
      for (int q = p + 1; q < dim; ++q) {
        const double apq = m[p * dim + q];
        if (std::abs(apq) < 1e-30) continue;
        const double app = m[p * dim + p];
        const double aqq = m[q * dim + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < dim; ++k) {
          const double akp = m[k * dim + p];
          const double akq = m[k * dim + q];
          m[k * dim + p] = c * akp - s * akq;
          m[k * dim + q] = s * akp + c * akq;
        }
        for (int k = 0; k < dim; ++k) {
          const double apk = m[p * dim + k];
          const double aqk = m[q * dim + k];
          m[p * dim + k] = c * apk - s * aqk;
          m[q * dim + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(dim);
  for (int i = 0; i < dim; ++i) eig[i] = m[i * dim + i];
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

// Covariance (X^T X / n) of mean-centered samples, row-major dim x dim.
std::vector<double> covariance_of(const std::vector<std::vector<float>>& samples, int dim) {
  const std::size_t n = samples.size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& s : samples) {
    for (int j = 0; j < dim; ++j) mean[j] += s[j];
  }
  for (auto& v : mean) v /= static_cast<double>(n);
  std::vector<double> cov(static_cast<std::size_t>(dim) * dim, 0.0);
  for (const auto& s : samples) {
    for (int i = 0; i < dim; ++i) {
      const double di = s[i] - mean[i];
      for (int j = i; j < dim; ++j) cov[i * dim + j] += di * (s[j] - mean[j]);
    }
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      cov[i * dim + j] /= static_cast<double>(n);
      cov[j * dim + i] = cov[i * dim + j];
    }
  }
  return cov;
}

} // namespace

TEST_CASE("flat gray patch: zero gradient bins, equal color means, unit norm") {
  const TiledDescriptor model;
  const ImageBuffer flat = ImageBuffer::filled(64, 64, 128, 128, 128);
  const auto raw = model.compute(flat);
  REQUIRE(raw.size() == model.output_dim());
  // Layout per cell: 3 color means then 8 orientation bins.
  for (std::size_t cell = 0; cell < 64; ++cell) {
    const std::size_t base = cell * 11;
    CHECK(raw[base + 0] == raw[base + 1]);
    CHECK(raw[base + 1] == raw[base + 2]);
    for (int b = 0; b < 8; ++b) CHECK(raw[base + 3 + b] == 0.0f);
  }
  const auto v = describe(model, flat, 64);
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("describe is deterministic") {
  Rng rng(51);
  const TiledDescriptor model;
  const ImageBuffer img = random_image(rng, 77, 53);
  CHECK(describe(model, img, 256) == describe(model, img, 256));
}

TEST_CASE("2x upsampling keeps cosine at 0.95 or above") {
  Rng rng(52);
  const TiledDescriptor model;
  for (int trial = 0; trial < 5; ++trial) {
    // Smooth-ish content: random image downsampled, so upsampling is faithful.
    const ImageBuffer base = img::resize_bilinear(random_image(rng, 24, 24), 96, 96);
    const ImageBuffer up = img::resize_bilinear(base, 192, 192);
    const auto a = describe(model, base, 256);
    const auto b = describe(model, up, 256);
    CHECK(cosine(a, b) >= 0.95);
  }
}

TEST_CASE("pca recovers a rank-2 plane") {
  Rng rng(53);
  const int dim = 5;
  std::vector<float> u = {1, 0, 0, 0, 0};
  std::vector<float> w = {0, 1, 1, 0, 0};
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    std::vector<float> s(dim);
    for (int j = 0; j < dim; ++j) {
      s[j] = static_cast<float>(a * u[j] + b * w[j] + 0.5); // offset exercises centering
    }
    samples.push_back(std::move(s));
  }
  const PcaModel model = pca_fit(samples, 2);
  REQUIRE(model.d_out == 2);
  const double retained = model.explained_variance[0] + model.explained_variance[1];
  CHECK(retained / model.total_variance >= 0.999);

  // Eigenvalue agreement with the independent Jacobi oracle.
  const auto oracle = jacobi_eigenvalues(covariance_of(samples, dim), dim);
  CHECK(model.explained_variance[0] == doctest::Approx(oracle[0]).epsilon(1e-8));
  CHECK(model.explained_variance[1] == doctest::Approx(oracle[1]).epsilon(1e-8));
  double oracle_total = 0.0;
  for (double e : oracle) oracle_total += e;
  CHECK(model.total_variance == doctest::Approx(oracle_total).epsilon(1e-8));
}

TEST_CASE("full-dimensional pca preserves pairwise distances") {
  Rng rng(54);
  const int dim = 12;
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 60; ++i) {
    std::vector<float> s(dim);
    for (auto& x : s) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    samples.push_back(std::move(s));
  }
  const PcaModel model = pca_fit(samples, dim);
  REQUIRE(model.d_out == dim);
  for (int trial = 0; trial < 20; ++trial) {
    const auto& a = samples[rng.index(samples.size())];
    const auto& b = samples[rng.index(samples.size())];
    const auto pa = pca_project_raw(model, a);
    const auto pb = pca_project_raw(model, b);
    CHECK(euclid(pa, pb) == doctest::Approx(euclid(a, b)).epsilon(1e-8));
  }
}

TEST_CASE("pca on identical samples reports rank 0") {
  std::vector<std::vector<float>> samples(10, std::vector<float>{1.0f, 2.0f, 3.0f});
  CHECK_THROWS_AS(pca_fit(samples, 2), DomainError);
}

TEST_CASE("pca requires enough samples") {
  std::vector<std::vector<float>> samples(3, std::vector<float>(8, 0.0f));
  CHECK_THROWS_AS(pca_fit(samples, 4), DomainError);
}

TEST_CASE("pca d_out above rank is reduced") {
  Rng rng(55);
  std::vector<std::vector<float>> samples; // rank-1 data in 4-D
  for (int i = 0; i < 20; ++i) {
    const float a = static_cast<float>(rng.uniform(-1.0, 1.0));
    samples.push_back({a, 2 * a, 0.0f, -a});
  }
  const PcaModel model = pca_fit(samples, 3);
  CHECK(model.d_out == 1);
}

TEST_CASE("pca component rows are orthonormal") {
  Rng rng(56);
  const int dim = 16;
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 100; ++i) {
    std::vector<float> s(dim);
    for (auto& x : s) x = static_cast<float>(rng.uniform(0.0, 1.0));
    samples.push_back(std::move(s));
  }
  const PcaModel model = pca_fit(samples, 8);
  for (std::uint32_t i = 0; i < model.d_out; ++i) {
    for (std::uint32_t j = 0; j < model.d_out; ++j) {
      double dot = 0.0;
      for (std::uint32_t k = 0; k < model.d_raw; ++k) {
        dot += static_cast<double>(model.components[i * model.d_raw + k]) *
               model.components[j * model.d_raw + k];
      }
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) <= 1e-10);
    }
  }
}

TEST_CASE("whitening scales projected training variance to one") {
  Rng rng(57);
  const int dim = 6;
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 500; ++i) {
    std::vector<float> s(dim);
    for (int j = 0; j < dim; ++j) {
      s[j] = static_cast<float>(rng.uniform(-1.0, 1.0) * (j + 1)); // anisotropic
    }
    samples.push_back(std::move(s));
  }
  const PcaModel model = pca_fit(samples, dim, true);
  std::vector<double> var(model.d_out, 0.0);
  std::vector<double> mean(model.d_out, 0.0);
  std::vector<std::vector<double>> projected;
  for (const auto& s : samples) projected.push_back(pca_project_raw(model, s));
  for (const auto& p : projected) {
    for (std::uint32_t j = 0; j < model.d_out; ++j) mean[j] += p[j];
  }
  for (auto& v : mean) v /= static_cast<double>(projected.size());
  for (const auto& p : projected) {
    for (std::uint32_t j = 0; j < model.d_out; ++j) {
      var[j] += (p[j] - mean[j]) * (p[j] - mean[j]);
    }
  }
  for (std::uint32_t j = 0; j < model.d_out; ++j) {
    CHECK(var[j] / static_cast<double>(projected.size()) == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("projecting the mean flags the epsilon fallback") {
  // Hand-built model with an f32-exact mean: v = mean projects to exactly 0.
  PcaModel model;
  model.d_raw = 3;
  model.d_out = 2;
  model.mean = {0.5, 0.25, 1.0};
  model.components = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  const std::vector<float> v = {0.5f, 0.25f, 1.0f};
  const Projection proj = pca_project(model, v);
  CHECK(proj.flagged_zero);
  CHECK(proj.vector[0] == 1.0f); // deterministic first basis vector
  CHECK(proj.vector[1] == 0.0f);

  // Any other vector: unit norm output, not flagged.
  Rng rng(58);
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 30; ++i) {
    samples.push_back({static_cast<float>(rng.uniform(0.0, 1.0)),
                       static_cast<float>(rng.uniform(0.0, 1.0)),
                       static_cast<float>(rng.uniform(0.0, 1.0))});
  }
  const PcaModel fitted = pca_fit(samples, 2);
  const Projection p2 = pca_project(fitted, samples[0]);
  CHECK(!p2.flagged_zero);
  double n2 = 0.0;
  for (float x : p2.vector) n2 += static_cast<double>(x) * x;
  CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("in-span directions survive projection with cosine 1") {
  Rng rng(59);
  const int dim = 6;
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 200; ++i) {
    std::vector<float> s(dim);
    for (auto& x : s) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    samples.push_back(std::move(s));
  }
  const PcaModel model = pca_fit(samples, dim);
  // Two raws on the same ray from the mean: centered cosine exactly 1.
  std::vector<float> dir(dim);
  for (auto& x : dir) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::vector<float> a(dim), b(dim);
  for (int j = 0; j < dim; ++j) {
    a[j] = static_cast<float>(model.mean[j] + 0.5 * dir[j]);
    b[j] = static_cast<float>(model.mean[j] + 2.0 * dir[j]);
  }
  const auto pa = pca_project(model, a);
  const auto pb = pca_project(model, b);
  CHECK(cosine(pa.vector, pb.vector) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pca model round-trips through the D2PC format") {
  Rng rng(60);
  std::vector<std::vector<float>> samples;
  for (int i = 0; i < 40; ++i) {
    std::vector<float> s(7);
    for (auto& x : s) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    samples.push_back(std::move(s));
  }
  const PcaModel model = pca_fit(samples, 4);
  const fs::path path = fs::temp_directory_path() / "d2lv_test_pca.d2pc";
  model.save(path);
  const PcaModel back = PcaModel::load(path);
  CHECK(back.d_raw == model.d_raw);
  CHECK(back.d_out == model.d_out);
  // The file quantizes to f32; the loaded values must match that rounding
  // exactly, and a second save/load cycle must be lossless.
  REQUIRE(back.mean.size() == model.mean.size());
  for (std::size_t i = 0; i < model.mean.size(); ++i) {
    CHECK(back.mean[i] == static_cast<double>(static_cast<float>(model.mean[i])));
  }
  REQUIRE(back.components.size() == model.components.size());
  for (std::size_t i = 0; i < model.components.size(); ++i) {
    CHECK(back.components[i] == static_cast<double>(static_cast<float>(model.components[i])));
  }
  const fs::path path2 = fs::temp_directory_path() / "d2lv_test_pca2.d2pc";
  back.save(path2);
  const PcaModel again = PcaModel::load(path2);
  CHECK(again.mean == back.mean);
  CHECK(again.components == back.components);
  fs::remove(path2);

  // Corrupt the magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  CHECK_THROWS_AS(PcaModel::load(path), FormatError);
  model.save(path);
  fs::resize_file(path, fs::file_size(path) - 5);
  CHECK_THROWS_AS(PcaModel::load(path), TruncationError);
  fs::remove(path);
}

TEST_CASE("extract_all record counts match plan * scales") {
  Rng rng(61);
  const fs::path dir = fs::temp_directory_path() / "d2lv_test_extract";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::save_ppm(random_image(rng, 120, 90), dir / "R1.ppm");
  io::save_ppm(random_image(rng, 100, 100), dir / "R2.ppm");

  const TiledDescriptor model("tiled-4", 4);

  ExtractOptions ref_opt;
  ref_opt.scales = {64};
  ref_opt.jobs = 1;
  const auto ref_store = extract_all({{ImageId("R1"), dir / "R1.ppm"},
                                      {ImageId("R2"), dir / "R2.ppm"}},
                                     PatchPlan::default_reference(), model, ref_opt);
  CHECK(ref_store.size() == 38); // 2 images x 19 patches x 1 scale

  PatchPlan qplan = PatchPlan::default_query();
  qplan.max_proposals = 0;
  ExtractOptions q_opt;
  q_opt.scales = {48, 64, 80};
  q_opt.queries = true;
  q_opt.jobs = 1;
  // On 120x90 the c-third crop is 40x30 and falls below min_query_side.
  const auto filtered =
      extract_all({{ImageId("Q1"), dir / "R1.ppm"}}, qplan, model, q_opt);
  CHECK(filtered.size() == 15); // 5 surviving patches x 3 scales

  qplan.min_query_side = 30;
  const auto q_store =
      extract_all({{ImageId("Q1"), dir / "R1.ppm"}}, qplan, model, q_opt);
  CHECK(q_store.size() == 18); // 6 deterministic patches x 3 scales

  // Rerun: byte-identical serialized store.
  const auto q_store2 =
      extract_all({{ImageId("Q1"), dir / "R1.ppm"}}, qplan, model, q_opt);
  std::ostringstream s1, s2;
  io::write_feature_store(q_store, s1);
  io::write_feature_store(q_store2, s2);
  CHECK(s1.str() == s2.str());

  // Unreadable image: skipped, extraction continues.
  const auto partial = extract_all({{ImageId("X"), dir / "missing.ppm"},
                                    {ImageId("R2"), dir / "R2.ppm"}},
                                   PatchPlan::default_reference(), model, ref_opt);
  CHECK(partial.size() == 19);
  fs::remove_all(dir);
}

TEST_CASE("extract_all validates scales and pca dimensionality") {
  const TiledDescriptor model("tiled-4", 4);
  ExtractOptions bad_scales;
  bad_scales.scales = {};
  CHECK_THROWS_AS(extract_all({}, PatchPlan::default_reference(), model, bad_scales),
                  ConfigError);

  PcaModel wrong;
  wrong.d_raw = 10; // model emits 4*4*11 = 176
  wrong.d_out = 2;
  wrong.mean.resize(10);
  wrong.components.resize(20);
  ExtractOptions opt;
  opt.pca = &wrong;
  CHECK_THROWS_AS(extract_all({}, PatchPlan::default_reference(), model, opt), ConfigError);
}
