#include "d2lv/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "d2lv/errors.hpp"

namespace d2lv::eval {

RankedPairList RankedPairList::from_pairs(std::vector<PairScore> pairs) {
    for (const PairScore& p : pairs) {
        if (!std::isfinite(p.score)) {
            throw DomainError("pair (" + p.query.str() + ", " + p.reference.str() +
                              ") has a non-finite score");
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const PairScore& a, const PairScore& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.query != b.query) {
            return a.query < b.query;
        }
        return a.reference < b.reference;
    });
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        if (pairs[i].query == pairs[i - 1].query && pairs[i].reference == pairs[i - 1].reference) {
            throw DomainError("duplicate pair key (" + pairs[i].query.str() + ", " +
                              pairs[i].reference.str() + ")");
        }
    }
    RankedPairList list;
    list.pairs_ = std::move(pairs);
    return list;
}

GroundTruth GroundTruth::from_pairs(const std::vector<std::pair<ImageId, ImageId>>& pairs,
                                    std::size_t total_override) {
    GroundTruth gt;
    for (const auto& [q, r] : pairs) {
        gt.positives.insert({q.str(), r.str()});
    }
    gt.total_positives = total_override > 0 ? total_override : gt.positives.size();
    if (gt.total_positives < gt.positives.size()) {
        throw DomainError("total_positives override is below the listed positive count");
    }
    return gt;
}

double micro_ap(const RankedPairList& ranked, const GroundTruth& gt) {
    if (gt.total_positives == 0) {
        throw DomainError("micro_ap requires at least one positive");
    }
    double acc = 0.0;
    std::size_t hits = 0;
    std::size_t rank = 0;
    for (const PairScore& p : ranked.pairs()) {
        ++rank;
        if (gt.contains(p)) {
            ++hits;
            acc += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    return acc / static_cast<double>(gt.total_positives);
}

double recall_at_precision(const RankedPairList& ranked, const GroundTruth& gt,
                           double target) {
    if (gt.total_positives == 0) {
        throw DomainError("recall_at_precision requires at least one positive");
    }
    std::size_t hits = 0;
    std::size_t rank = 0;
    std::size_t best_hits = 0;
    for (const PairScore& p : ranked.pairs()) {
        ++rank;
        if (gt.contains(p)) {
            ++hits;
        }
        double precision = static_cast<double>(hits) / static_cast<double>(rank);
        if (precision >= target) {
            best_hits = hits; // recall is nondecreasing, so the latest prefix wins
        }
    }
    return static_cast<double>(best_hits) / static_cast<double>(gt.total_positives);
}

std::vector<std::pair<double, double>> pr_curve(const RankedPairList& ranked,
                                                const GroundTruth& gt) {
    if (gt.total_positives == 0) {
        throw DomainError("pr_curve requires at least one positive");
    }
    std::vector<std::pair<double, double>> curve;
    curve.reserve(ranked.size());
    std::size_t hits = 0;
    std::size_t rank = 0;
    for (const PairScore& p : ranked.pairs()) {
        ++rank;
        if (gt.contains(p)) {
            ++hits;
        }
        curve.emplace_back(static_cast<double>(hits) / static_cast<double>(gt.total_positives),
                           static_cast<double>(hits) / static_cast<double>(rank));
    }
    return curve;
}

} // namespace d2lv::eval
