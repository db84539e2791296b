#pragma once

#include <set>
#include <utility>
#include <vector>

#include "d2lv/types.hpp"

namespace d2lv::eval {

// Pooled candidate list, sorted by descending score. Score ties fall back to
// (query, reference) lexicographic order so evaluation is deterministic.
class RankedPairList {
public:
    static RankedPairList from_pairs(std::vector<PairScore> pairs);

    const std::vector<PairScore>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }

private:
    RankedPairList() = default;
    std::vector<PairScore> pairs_;
};

struct GroundTruth {
    std::set<std::pair<std::string, std::string>> positives;
    std::size_t total_positives = 0;

    static GroundTruth from_pairs(const std::vector<std::pair<ImageId, ImageId>>& pairs,
                                  std::size_t total_override = 0);
    bool contains(const PairScore& p) const {
        return positives.count({p.query.str(), p.reference.str()}) > 0;
    }
};

// Micro average precision over the pooled list: sum of precision@rank at each
// true positive, divided by the total positive count (retrieved or not).
double micro_ap(const RankedPairList& ranked, const GroundTruth& gt);

// Recall at the largest prefix whose precision still meets the target.
double recall_at_precision(const RankedPairList& ranked, const GroundTruth& gt,
                           double target = 0.90);

// (recall, precision) at every prefix rank.
std::vector<std::pair<double, double>> pr_curve(const RankedPairList& ranked,
                                                const GroundTruth& gt);

} // namespace d2lv::eval
