#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <vector>

#include "doctest.h"

#include "d2lv/errors.hpp"
#include "d2lv/learncore.hpp"
#include "d2lv/rng.hpp"

using namespace d2lv;
using namespace d2lv::learncore;

namespace {

// Independent piecewise transcription of the schedule.
double schedule_oracle(double e) {
  if (e < 5.0) return 0.99 * e / 5.0 + 0.01;
  if (e < 10.0) return 1.0;
  return 0.5 * (std::cos((e - 10.0) / 15.0 * std::numbers::pi) + 1.0);
}

struct MiningReport {
  double loss = 0.0;
  double min_active_margin = std::numeric_limits<double>::infinity(); // min |active|
  double min_tie_gap = std::numeric_limits<double>::infinity();       // argmax/argmin slack
  double min_distance = std::numeric_limits<double>::infinity();      // sqrt smoothness
};

// Brute-force batch-hard mining, written independently of the library.
MiningReport triplet_oracle(const std::vector<double>& emb, std::size_t dim,
                            const std::vector<int>& labels, double margin) {
  const std::size_t n = labels.size();
  MiningReport report;
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> pos, neg;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      double acc = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = emb[a * dim + d] - emb[j * dim + d];
        acc += diff * diff;
      }
      const double dist = std::sqrt(acc);
      report.min_distance = std::min(report.min_distance, dist);
      (labels[j] == labels[a] ? pos : neg).push_back(dist);
    }
    std::sort(pos.begin(), pos.end(), std::greater<>());
    std::sort(neg.begin(), neg.end());
    const double active = pos[0] - neg[0] + margin;
    total += std::max(0.0, active);
    report.min_active_margin = std::min(report.min_active_margin, std::abs(active));
    if (pos.size() > 1) report.min_tie_gap = std::min(report.min_tie_gap, pos[0] - pos[1]);
    if (neg.size() > 1) report.min_tie_gap = std::min(report.min_tie_gap, neg[1] - neg[0]);
  }
  report.loss = total / static_cast<double>(n);
  return report;
}

// Central finite differences against the analytic gradient; returns the
// relative L2 error.
template <typename LossFn>
double gradient_error(LossFn loss_fn, std::vector<double> x, const std::vector<double>& analytic,
                      double h) {
  double diff_sq = 0.0, analytic_sq = 0.0, fd_sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss_fn(x);
    x[i] = saved - h;
    const double down = loss_fn(x);
    x[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    diff_sq += (fd - analytic[i]) * (fd - analytic[i]);
    analytic_sq += analytic[i] * analytic[i];
    fd_sq += fd * fd;
  }
  const double scale = std::max(std::sqrt(analytic_sq), std::sqrt(fd_sq));
  if (scale < 1e-12) return std::sqrt(diff_sq);
  return std::sqrt(diff_sq) / scale;
}

} // namespace

TEST_CASE("lr_ratio fixtures") {
  CHECK(lr_ratio(0.0) == 0.01);
  CHECK(lr_ratio(7.0) == 1.0);
  CHECK(lr_ratio(17.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lr_ratio(1.0) == doctest::Approx(0.208).epsilon(1e-12));
}

TEST_CASE("lr_ratio matches an independent piecewise transcription") {
  for (int e = 0; e < 25; ++e) {
    CHECK(lr_ratio(static_cast<double>(e)) ==
          doctest::Approx(schedule_oracle(static_cast<double>(e))).epsilon(1e-12));
  }
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const double e = rng.uniform(0.0, 25.0);
    CHECK(lr_ratio(e) == doctest::Approx(schedule_oracle(e)).epsilon(1e-12));
  }
}

TEST_CASE("lr_ratio is continuous at the breakpoints and decays to zero") {
  const double at5 = lr_ratio(5.0);
  const double before5 = lr_ratio(std::nextafter(5.0, 0.0));
  CHECK(std::abs(at5 - before5) < 1e-12);
  CHECK(at5 == 1.0);

  const double at10 = lr_ratio(10.0);
  const double before10 = lr_ratio(std::nextafter(10.0, 0.0));
  CHECK(std::abs(at10 - before10) < 1e-12);
  CHECK(at10 == doctest::Approx(1.0).epsilon(1e-15));

  CHECK(lr_ratio(25.0 - 1e-6) < 1e-12);
}

TEST_CASE("lr_ratio domain and config errors") {
  CHECK_THROWS_AS(lr_ratio(-0.1), DomainError);
  CHECK_THROWS_AS(lr_ratio(25.0), DomainError);
  CHECK_THROWS_AS(lr_ratio(100.0), DomainError);

  ScheduleConfig bad;
  bad.warmup_end = 10.0;
  bad.hold_end = 5.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = {};
  bad.floor = 1.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_NOTHROW(ScheduleConfig{}.validate());
}

TEST_CASE("gem_pool fixtures") {
  const std::vector<double> cells = {0.2, 0.4, 0.9, 0.1};
  GemParams p1;
  p1.p = 1.0;
  CHECK(gem_pool(cells, p1) == doctest::Approx(0.4).epsilon(1e-12));

  GemParams p3;
  for (double c : {0.3, 1.0, 2.5}) {
    const std::vector<double> constant(5, c);
    CHECK(gem_pool(constant, p3) == doctest::Approx(c).epsilon(1e-12));
  }

  GemParams p2;
  p2.p = 2.0;
  const std::vector<double> two = {0.0, 2.0}; // zero clamps to epsilon
  CHECK(gem_pool(two, p2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("gem_pool bounds and monotonicity in p") {
  Rng rng(42);
  const GemParams base;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> cells(1 + rng.index(8));
    for (auto& c : cells) c = rng.chance(0.2) ? 0.0 : rng.uniform(0.0, 2.0);
    double clamped_max = base.epsilon;
    for (double c : cells) clamped_max = std::max(clamped_max, c);
    const double n = static_cast<double>(cells.size());

    double previous = 0.0;
    bool first = true;
    for (double p : {1.0, 1.5, 2.0, 3.0, 5.0, 10.0}) {
      GemParams params;
      params.p = p;
      const double g = gem_pool(cells, params);
      CHECK(g <= clamped_max + 1e-12);
      CHECK(g >= clamped_max * std::pow(1.0 / n, 1.0 / p) - 1e-12);
      if (!first) CHECK(g >= previous - 1e-12);
      previous = g;
      first = false;
    }
  }
}

TEST_CASE("gem_pool domain errors") {
  GemParams params;
  CHECK_THROWS_AS(gem_pool({}, params), DomainError);
  params.p = 0.0;
  CHECK_THROWS_AS(gem_pool(std::vector<double>{1.0}, params), DomainError);
  params.p = -2.0;
  CHECK_THROWS_AS(gem_pool(std::vector<double>{1.0}, params), DomainError);
}

TEST_CASE("triplet_hard_loss fixtures") {
  TripletConfig cfg; // margin 0.3
  // Separated clusters: every hinge inactive.
  {
    const std::vector<double> emb = {0.0, 0.1, 1.0, 0.9};
    const std::vector<int> labels = {0, 0, 1, 1};
    const LossResult r = triplet_hard_loss(emb, 1, labels, cfg);
    CHECK(r.loss == 0.0);
    for (double g : r.gradient) CHECK(g == 0.0);
  }
  // Interleaved: anchors 0 and 1 active, (0.8 + 0.9) / 4.
  {
    const std::vector<double> emb = {0.0, 1.0, 0.5, 0.6};
    const std::vector<int> labels = {0, 0, 1, 1};
    const LossResult r = triplet_hard_loss(emb, 1, labels, cfg);
    CHECK(r.loss == doctest::Approx(0.425).epsilon(1e-12));
  }
  // Margin 0 on separated clusters.
  {
    TripletConfig zero;
    zero.margin = 0.0;
    const std::vector<double> emb = {0.0, 0.1, 5.0, 5.1};
    const std::vector<int> labels = {0, 0, 1, 1};
    CHECK(triplet_hard_loss(emb, 1, labels, zero).loss == 0.0);
  }
}

TEST_CASE("triplet_hard_loss equals the brute-force oracle on random batches") {
  Rng rng(43);
  TripletConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.index(4);
    const std::vector<int> labels = {0, 0, 0, 1, 1, 2, 2};
    std::vector<double> emb(labels.size() * dim);
    for (auto& v : emb) v = rng.uniform(-1.0, 1.0);
    const MiningReport want = triplet_oracle(emb, dim, labels, cfg.margin);
    const LossResult got = triplet_hard_loss(emb, dim, labels, cfg);
    CHECK(got.loss == doctest::Approx(want.loss).epsilon(1e-12));
  }
}

TEST_CASE("triplet_hard_loss batch preconditions") {
  TripletConfig cfg;
  const std::vector<int> labels = {0, 0, 1, 1};
  CHECK_THROWS_AS(triplet_hard_loss(std::vector<double>{1.0, 2.0, 3.0}, 2, labels, cfg),
                  BatchError);
  CHECK_THROWS_AS(
      triplet_hard_loss(std::vector<double>{1.0, 2.0, 3.0}, 1, labels, cfg), BatchError);
  CHECK_THROWS_AS(triplet_hard_loss(std::vector<double>{1.0, 2.0, 3.0, 4.0}, 1,
                                    std::vector<int>{0, 0, 0, 0}, cfg),
                  BatchError);
  CHECK_THROWS_AS(triplet_hard_loss(std::vector<double>{1.0, 2.0, 3.0, 4.0}, 1,
                                    std::vector<int>{0, 0, 0, 1}, cfg),
                  BatchError);
}

TEST_CASE("triplet gradient matches central differences away from ties") {
  Rng rng(44);
  TripletConfig cfg;
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
  const std::size_t dim = 3;
  int checked = 0;
  int attempts = 0;
  while (checked < 100 && attempts < 2000) {
    ++attempts;
    std::vector<double> emb(labels.size() * dim);
    for (auto& v : emb) v = rng.uniform(-1.0, 1.0);
    const MiningReport report = triplet_oracle(emb, dim, labels, cfg.margin);
    // Stay clear of the hinge, mining ties, and the sqrt kink.
    if (report.min_active_margin < 1e-3 || report.min_tie_gap < 1e-3 ||
        report.min_distance < 1e-2 || report.loss == 0.0) {
      continue;
    }
    const LossResult r = triplet_hard_loss(emb, dim, labels, cfg);
    const auto loss_at = [&](const std::vector<double>& x) {
      return triplet_hard_loss(x, dim, labels, cfg).loss;
    };
    CHECK(gradient_error(loss_at, emb, r.gradient, 1e-6) < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("triplet gradient with normalized embeddings matches central differences") {
  Rng rng(45);
  TripletConfig cfg;
  cfg.normalize_embeddings = true;
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::size_t dim = 4;
  int checked = 0;
  int attempts = 0;
  while (checked < 30 && attempts < 1000) {
    ++attempts;
    std::vector<double> emb(labels.size() * dim);
    for (auto& v : emb) v = rng.uniform(0.5, 1.5); // norms well away from zero
    // Degeneracy screen on the normalized points, where mining happens.
    std::vector<double> unit = emb;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      double norm = 0.0;
      for (std::size_t d = 0; d < dim; ++d) norm += unit[i * dim + d] * unit[i * dim + d];
      norm = std::sqrt(norm);
      for (std::size_t d = 0; d < dim; ++d) unit[i * dim + d] /= norm;
    }
    const MiningReport report = triplet_oracle(unit, dim, labels, cfg.margin);
    if (report.min_active_margin < 1e-3 || report.min_tie_gap < 1e-3 ||
        report.min_distance < 1e-2 || report.loss == 0.0) {
      continue;
    }
    const LossResult r = triplet_hard_loss(emb, dim, labels, cfg);
    CHECK(r.loss == doctest::Approx(report.loss).epsilon(1e-12));
    const auto loss_at = [&](const std::vector<double>& x) {
      return triplet_hard_loss(x, dim, labels, cfg).loss;
    };
    CHECK(gradient_error(loss_at, emb, r.gradient, 1e-6) < 1e-4);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("ce_label_smooth fixtures") {
  SmoothConfig two;
  two.classes = 2;
  two.epsilon = 0.1;
  const std::vector<double> logits = {std::log(3.0), 0.0};
  const LossResult r = ce_label_smooth(logits, 0, two);
  // softmax (0.75, 0.25), q (0.95, 0.05)
  const double want = -(0.95 * std::log(0.75) + 0.05 * std::log(0.25));
  CHECK(r.loss == doctest::Approx(want).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(0.342613).epsilon(1e-5));
  CHECK(r.gradient[0] == doctest::Approx(0.75 - 0.95).epsilon(1e-12));
  CHECK(r.gradient[1] == doctest::Approx(0.25 - 0.05).epsilon(1e-12));
}

TEST_CASE("ce_label_smooth uniform logits give ln C for any epsilon") {
  for (int c : {2, 3, 7}) {
    for (double eps : {0.0, 0.1, 0.5}) {
      SmoothConfig cfg;
      cfg.classes = c;
      cfg.epsilon = eps;
      const std::vector<double> logits(static_cast<std::size_t>(c), 0.4);
      CHECK(ce_label_smooth(logits, c - 1, cfg).loss ==
            doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
    }
  }
}

TEST_CASE("ce_label_smooth reduces to plain cross-entropy at epsilon 0") {
  Rng rng(46);
  SmoothConfig cfg;
  cfg.classes = 5;
  cfg.epsilon = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(5);
    for (auto& z : logits) z = rng.uniform(-3.0, 3.0);
    const int target = static_cast<int>(rng.index(5));
    double max_z = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - max_z);
    const double want = -(logits[target] - max_z - std::log(sum));
    CHECK(ce_label_smooth(logits, target, cfg).loss == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("ce_label_smooth loss is bounded below by the target entropy") {
  Rng rng(47);
  SmoothConfig cfg;
  cfg.classes = 4;
  cfg.epsilon = 0.1;
  std::vector<double> q(4, cfg.epsilon / 4.0);
  q[2] += 1.0 - cfg.epsilon;
  double entropy = 0.0;
  for (double v : q) entropy -= v * std::log(v);

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(4);
    for (auto& z : logits) z = rng.uniform(-4.0, 4.0);
    CHECK(ce_label_smooth(logits, 2, cfg).loss >= entropy - 1e-12);
  }
  // Equality when softmax equals q exactly.
  std::vector<double> log_q(4);
  for (int k = 0; k < 4; ++k) log_q[static_cast<std::size_t>(k)] = std::log(q[static_cast<std::size_t>(k)]);
  CHECK(ce_label_smooth(log_q, 2, cfg).loss == doctest::Approx(entropy).epsilon(1e-12));
}

TEST_CASE("ce gradient matches central differences and sums to zero") {
  Rng rng(48);
  SmoothConfig cfg;
  cfg.classes = 6;
  cfg.epsilon = 0.1;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(6);
    for (auto& z : logits) z = rng.uniform(-2.0, 2.0);
    const int target = static_cast<int>(rng.index(6));
    const LossResult r = ce_label_smooth(logits, target, cfg);
    double sum = 0.0;
    for (double g : r.gradient) sum += g;
    CHECK(std::abs(sum) < 1e-12);
    const auto loss_at = [&](const std::vector<double>& x) {
      return ce_label_smooth(x, target, cfg).loss;
    };
    CHECK(gradient_error(loss_at, logits, r.gradient, 1e-6) < 1e-4);
  }
}

TEST_CASE("ce_label_smooth domain errors") {
  SmoothConfig cfg;
  cfg.classes = 1;
  CHECK_THROWS_AS(ce_label_smooth(std::vector<double>{0.0}, 0, cfg), DomainError);
  cfg.classes = 3;
  CHECK_THROWS_AS(ce_label_smooth(std::vector<double>{0.0, 0.0}, 0, cfg), DomainError);
  CHECK_THROWS_AS(ce_label_smooth(std::vector<double>{0.0, 0.0, 0.0}, 3, cfg), DomainError);
  CHECK_THROWS_AS(ce_label_smooth(std::vector<double>{0.0, 0.0, 0.0}, -1, cfg), DomainError);
  cfg.epsilon = 1.0;
  CHECK_THROWS_AS(ce_label_smooth(std::vector<double>{0.0, 0.0, 0.0}, 0, cfg), DomainError);
}

TEST_CASE("projector shape contract") {
  CHECK_NOTHROW(ProjectorShape{}.validate());
  ProjectorShape bad;
  bad.in_dim = 8192;
  bad.out_dim = 2048;
  bad.structure = {8192, 2048};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = {};
  bad.structure = {2048, 4096};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = {};
  bad.structure = {2048, 0, 8192};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  ProjectorShape deep;
  deep.structure = {2048, 4096, 8192};
  CHECK_NOTHROW(deep.validate());
}

TEST_CASE("pk_sample builds 32x4 batches with no repeats") {
  std::vector<int> labels;
  for (int id = 0; id < 40; ++id) {
    for (int i = 0; i < 5; ++i) labels.push_back(id);
  }
  Rng rng(123);
  const std::vector<std::size_t> batch = pk_sample(labels, 32, 4, rng);
  REQUIRE(batch.size() == 128);
  std::set<std::size_t> unique(batch.begin(), batch.end());
  CHECK(unique.size() == 128);
  std::map<int, int> per_id;
  for (std::size_t i : batch) {
    REQUIRE(i < labels.size());
    ++per_id[labels[i]];
  }
  CHECK(per_id.size() == 32);
  for (const auto& [id, count] : per_id) CHECK(count == 4);

  Rng again(123);
  CHECK(pk_sample(labels, 32, 4, again) == batch);
}

TEST_CASE("pk_sample exhaustion and errors") {
  const std::vector<int> pair = {7, 7};
  Rng rng(1);
  const auto batch = pk_sample(pair, 1, 2, rng);
  CHECK(std::set<std::size_t>(batch.begin(), batch.end()) == std::set<std::size_t>{0, 1});

  Rng r2(2);
  CHECK_THROWS_AS(pk_sample(pair, 0, 2, r2), BatchError);
  CHECK_THROWS_AS(pk_sample(pair, 1, 0, r2), BatchError);
  CHECK_THROWS_AS(pk_sample(pair, 2, 2, r2), BatchError);
  // Identities below K images are ineligible.
  const std::vector<int> mixed = {0, 0, 0, 1, 1, 2, 2, 3};
  CHECK_THROWS_AS(pk_sample(mixed, 2, 3, r2), BatchError);
}
