#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "d2lv/evaluation.hpp"
#include "d2lv/features.hpp"
#include "d2lv/image.hpp"
#include "d2lv/learncore.hpp"
#include "d2lv/matching.hpp"
#include "d2lv/rng.hpp"

namespace {

std::vector<float> random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  d2lv::Rng rng(seed);
  std::vector<float> m(rows * dim);
  for (auto& v : m) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return m;
}

d2lv::ImageBuffer random_image(int w, int h, std::uint64_t seed) {
  d2lv::Rng rng(seed);
  d2lv::ImageBuffer img(w, h);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

void BM_blocked_dot(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 704;
  const auto a = random_matrix(rows, dim, 1);
  const auto b = random_matrix(rows, dim, 2);
  for (auto _ : state) {
    auto scores = d2lv::blocked_dot(a, rows, b, rows, dim, 1);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * rows));
}
BENCHMARK(BM_blocked_dot)->Arg(64)->Arg(256)->Arg(1024);

void BM_descriptor(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto img = random_image(side, side, 3);
  const d2lv::TiledDescriptor model("tiled-8", 8);
  for (auto _ : state) {
    auto desc = model.compute(img);
    benchmark::DoNotOptimize(desc.data());
  }
}
BENCHMARK(BM_descriptor)->Arg(128)->Arg(256)->Arg(512);

void BM_micro_ap(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  d2lv::Rng rng(4);
  std::vector<d2lv::PairScore> rows;
  rows.reserve(n);
  std::vector<std::pair<d2lv::ImageId, d2lv::ImageId>> positives;
  for (std::size_t i = 0; i < n; ++i) {
    d2lv::ImageId q("Q" + std::to_string(i % 128));
    d2lv::ImageId r("R" + std::to_string(i));
    rows.push_back(d2lv::PairScore{q, r, rng.uniform(0.0, 1.0)});
    if (rng.chance(0.3)) positives.emplace_back(q, r);
  }
  const auto ranked = d2lv::eval::RankedPairList::from_pairs(std::move(rows));
  const auto gt = d2lv::eval::GroundTruth::from_pairs(positives);
  for (auto _ : state) {
    benchmark::DoNotOptimize(d2lv::eval::micro_ap(ranked, gt));
  }
}
BENCHMARK(BM_micro_ap)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_gem_pool(benchmark::State& state) {
  d2lv::Rng rng(5);
  std::vector<double> cells(static_cast<std::size_t>(state.range(0)));
  for (auto& c : cells) c = rng.uniform(0.0, 2.0);
  d2lv::learncore::GemParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(d2lv::learncore::gem_pool(cells, params));
  }
}
BENCHMARK(BM_gem_pool)->Arg(64)->Arg(4096);

void BM_resize_bilinear(benchmark::State& state) {
  const auto img = random_image(640, 480, 6);
  const int side = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto out = d2lv::img::resize_bilinear(img, side, side);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_resize_bilinear)->Arg(128)->Arg(320);

} // namespace

BENCHMARK_MAIN();
