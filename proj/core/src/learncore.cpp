#include "d2lv/learncore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "d2lv/errors.hpp"

namespace d2lv::learncore {

void ScheduleConfig::validate() const {
    if (!(0 < warmup_end && warmup_end < hold_end && hold_end < total)) {
        throw DomainError("schedule requires 0 < warmup_end < hold_end < total");
    }
    if (!(floor > 0 && floor < 1)) {
        throw DomainError("schedule floor must lie in (0, 1)");
    }
}

double lr_ratio(double epoch, const ScheduleConfig& cfg) {
    cfg.validate();
    if (!(epoch >= 0.0 && epoch < cfg.total)) {
        throw DomainError("epoch " + std::to_string(epoch) + " outside [0, total)");
    }
    if (epoch < cfg.warmup_end) {
        return (1.0 - cfg.floor) * epoch / cfg.warmup_end + cfg.floor;
    }
    if (epoch < cfg.hold_end) {
        return 1.0;
    }
    double t = (epoch - cfg.hold_end) / (cfg.total - cfg.hold_end);
    return 0.5 * (std::cos(t * std::numbers::pi) + 1.0);
}

double gem_pool(std::span<const double> cells, const GemParams& params) {
    if (cells.empty()) {
        throw DomainError("gem_pool requires at least one cell");
    }
    if (!(params.p > 0) || !std::isfinite(params.p)) {
        throw DomainError("gem_pool exponent must be positive and finite");
    }
    double acc = 0.0;
    for (double x : cells) {
        double clamped = std::max(x, params.epsilon);
        acc += std::pow(clamped, params.p);
    }
    return std::pow(acc / static_cast<double>(cells.size()), 1.0 / params.p);
}

namespace {

double euclidean(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

} // namespace

LossResult triplet_hard_loss(std::span<const double> embeddings, std::size_t dim,
                             std::span<const int> labels, const TripletConfig& cfg) {
    if (dim == 0 || embeddings.size() % dim != 0) {
        throw BatchError("embedding buffer size is not a multiple of dim");
    }
    std::size_t n = embeddings.size() / dim;
    if (labels.size() != n) {
        throw BatchError("label count does not match embedding count");
    }

    std::map<int, std::size_t> per_label;
    for (int l : labels) {
        ++per_label[l];
    }
    if (per_label.size() < 2) {
        throw BatchError("triplet batch needs at least two distinct labels");
    }
    for (const auto& [label, count] : per_label) {
        if (count < 2) {
            throw BatchError("label " + std::to_string(label) + " has fewer than 2 samples");
        }
    }

    std::vector<double> values(embeddings.begin(), embeddings.end());
    std::vector<double> norm_grad_chain; // used only when normalizing
    if (cfg.normalize_embeddings) {
        for (std::size_t i = 0; i < n; ++i) {
            double norm = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                norm += values[i * dim + d] * values[i * dim + d];
            }
            norm = std::sqrt(std::max(norm, 1e-24));
            for (std::size_t d = 0; d < dim; ++d) {
                values[i * dim + d] /= norm;
            }
        }
    }

    LossResult result;
    result.gradient.assign(embeddings.size(), 0.0);
    std::vector<double> grad_wrt_values(values.size(), 0.0);

    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        const double* xa = values.data() + a * dim;
        double hardest_pos = -1.0;
        std::size_t pos_idx = n;
        double hardest_neg = std::numeric_limits<double>::infinity();
        std::size_t neg_idx = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a) {
                continue;
            }
            double dist = euclidean(xa, values.data() + j * dim, dim);
            if (labels[j] == labels[a]) {
                if (dist > hardest_pos) {
                    hardest_pos = dist;
                    pos_idx = j;
                }
            } else if (dist < hardest_neg) {
                hardest_neg = dist;
                neg_idx = j;
            }
        }
        double active = hardest_pos - hardest_neg + cfg.margin;
        if (active <= 0.0) {
            continue;
        }
        total += active;
        const double* xp = values.data() + pos_idx * dim;
        const double* xn = values.data() + neg_idx * dim;
        double dp = std::max(hardest_pos, 1e-24);
        double dn = std::max(hardest_neg, 1e-24);
        for (std::size_t d = 0; d < dim; ++d) {
            double up = (xa[d] - xp[d]) / dp;
            double un = (xa[d] - xn[d]) / dn;
            grad_wrt_values[a * dim + d] += up - un;
            grad_wrt_values[pos_idx * dim + d] -= up;
            grad_wrt_values[neg_idx * dim + d] += un;
        }
    }

    double inv_n = 1.0 / static_cast<double>(n);
    result.loss = total * inv_n;
    for (double& g : grad_wrt_values) {
        g *= inv_n;
    }

    if (cfg.normalize_embeddings) {
        // chain rule through x / ||x||
        for (std::size_t i = 0; i < n; ++i) {
            double norm = 0.0;
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                norm += embeddings[i * dim + d] * embeddings[i * dim + d];
            }
            norm = std::sqrt(std::max(norm, 1e-24));
            for (std::size_t d = 0; d < dim; ++d) {
                dot += grad_wrt_values[i * dim + d] * values[i * dim + d];
            }
            for (std::size_t d = 0; d < dim; ++d) {
                result.gradient[i * dim + d] =
                    (grad_wrt_values[i * dim + d] - dot * values[i * dim + d]) / norm;
            }
        }
    } else {
        result.gradient = std::move(grad_wrt_values);
    }
    return result;
}

LossResult ce_label_smooth(std::span<const double> logits, int target,
                           const SmoothConfig& cfg) {
    if (cfg.classes < 2) {
        throw DomainError("label smoothing needs at least 2 classes");
    }
    if (static_cast<int>(logits.size()) != cfg.classes) {
        throw DomainError("logit count does not match configured classes");
    }
    if (target < 0 || target >= cfg.classes) {
        throw DomainError("target class out of range");
    }
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0)) {
        throw DomainError("smoothing epsilon must lie in [0, 1)");
    }

    double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum_exp = 0.0;
    for (double z : logits) {
        sum_exp += std::exp(z - max_logit);
    }
    double log_sum = std::log(sum_exp) + max_logit;

    double uniform = cfg.epsilon / cfg.classes;
    LossResult result;
    result.gradient.resize(logits.size());
    for (int k = 0; k < cfg.classes; ++k) {
        double q = uniform + (k == target ? 1.0 - cfg.epsilon : 0.0);
        double log_p = logits[k] - log_sum;
        result.loss -= q * log_p;
        result.gradient[k] = std::exp(log_p) - q;
    }
    return result;
}

void ProjectorShape::validate() const {
    if (in_dim >= out_dim) {
        throw DomainError("projector must expand: in_dim < out_dim");
    }
    if (structure.size() < 2 || structure.front() != in_dim || structure.back() != out_dim) {
        throw DomainError("projector structure must run from in_dim to out_dim");
    }
    for (int width : structure) {
        if (width < 1) {
            throw DomainError("projector layer widths must be positive");
        }
    }
}

std::vector<std::size_t> pk_sample(std::span<const int> labels, std::size_t p, std::size_t k,
                                   Rng& rng) {
    if (p == 0 || k == 0) {
        throw BatchError("pk_sample requires positive P and K");
    }
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_label[labels[i]].push_back(i);
    }
    std::vector<int> eligible;
    for (const auto& [label, indices] : by_label) {
        if (indices.size() >= k) {
            eligible.push_back(label);
        }
    }
    if (eligible.size() < p) {
        throw BatchError("need " + std::to_string(p) + " identities with at least " +
                         std::to_string(k) + " images, found " + std::to_string(eligible.size()));
    }
    rng.shuffle(eligible);
    eligible.resize(p);

    std::vector<std::size_t> batch;
    batch.reserve(p * k);
    for (int label : eligible) {
        std::vector<std::size_t> pool = by_label[label];
        rng.shuffle(pool);
        batch.insert(batch.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return batch;
}

} // namespace d2lv::learncore
