#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "d2lv/rng.hpp"

namespace d2lv::learncore {

// Piecewise learning-rate schedule: linear warmup to 1, hold, cosine decay.
struct ScheduleConfig {
    double warmup_end = 5.0;
    double hold_end = 10.0;
    double total = 25.0;
    double floor = 0.01;

    void validate() const;
};

double lr_ratio(double epoch, const ScheduleConfig& cfg = {});

// Generalized-mean pooling ((1/n) * sum x_i^p)^(1/p) over non-negative cells.
struct GemParams {
    double p = 3.0;
    double epsilon = 1e-6;
};

double gem_pool(std::span<const double> cells, const GemParams& params);

// Batch-hard triplet loss: per anchor, hardest positive (max same-label
// distance) vs hardest negative (min other-label distance), Euclidean,
// hinged at margin, averaged over anchors. Ties resolve to the lowest index.
struct TripletConfig {
    double margin = 0.3;
    bool normalize_embeddings = false;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> gradient; // same layout as the input values
};

LossResult triplet_hard_loss(std::span<const double> embeddings, std::size_t dim,
                             std::span<const int> labels, const TripletConfig& cfg = {});

// Cross-entropy against the smoothed target (1-eps) * one_hot + eps / C.
struct SmoothConfig {
    double epsilon = 0.1;
    int classes = 2;
};

LossResult ce_label_smooth(std::span<const double> logits, int target,
                           const SmoothConfig& cfg);

// Declared projector widths; the artifact asserts the 2048 -> 8192 contract
// without training anything.
struct ProjectorShape {
    int in_dim = 2048;
    int out_dim = 8192;
    std::vector<int> structure = {2048, 8192};

    void validate() const;
};

// PK batch: P identities, K images each, no index repeated.
std::vector<std::size_t> pk_sample(std::span<const int> labels, std::size_t p, std::size_t k,
                                   Rng& rng);

} // namespace d2lv::learncore
