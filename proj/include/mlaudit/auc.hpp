#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mlaudit {

struct AucCell {
    std::string concept_name;
    std::string group;
    double auc = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

// ROC-AUC: probability that a random positive outscores a random negative,
// ties counted half. Computed from pooled mid-ranks, which agrees with the
// pairwise definition exactly (the rank sums are half-integers, so no
// rounding enters before the final division). NaN when a class is empty.
inline double roc_auc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty())
        return std::numeric_limits<double>::quiet_NaN();

    std::vector<std::pair<double, bool>> pooled;  // (score, is_positive)
    pooled.reserve(pos.size() + neg.size());
    for (double v : pos) pooled.emplace_back(v, true);
    for (double v : neg) pooled.emplace_back(v, false);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < pooled.size()) {
        std::size_t j = i + 1;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double mid_rank = 0.5 * (double(i + 1) + double(j));
        for (std::size_t k = i; k < j; ++k)
            if (pooled[k].second) pos_rank_sum += mid_rank;
        i = j;
    }

    const double np = double(pos.size());
    const double nn = double(neg.size());
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline AucCell make_auc_cell(std::string concept_name, std::string group,
                             std::span<const double> pos,
                             std::span<const double> neg) {
    AucCell cell;
    cell.concept_name = std::move(concept_name);
    cell.group = std::move(group);
    cell.n_pos = pos.size();
    cell.n_neg = neg.size();
    cell.auc = roc_auc(pos, neg);
    return cell;
}

}  // namespace mlaudit
