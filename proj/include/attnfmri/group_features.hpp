#ifndef ATTNFMRI_GROUP_FEATURES_HPP
#define ATTNFMRI_GROUP_FEATURES_HPP

#include "attention/train.hpp"
#include "core.hpp"
#include "data_model.hpp"
#include "text.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

/**
 * @file group_features.hpp
 *
 * @brief Column statistics of attention matrices, top-ROI selection and the
 * subjects x ROIs matrix of coefficients of variation.
 */

namespace attnfmri::features {

using attention::AttentionMatrix;

/**
 * Per-ROI column statistics of one attention matrix.
 */
struct RoiStats {
    std::string subject_id;
    Vector cv;
    Vector mean;
};

/**
 * Column mean and coefficient of variation (sample sd over |mean|, 0 when the
 * mean is 0).
 */
inline RoiStats column_stats(const Matrix& a, std::string subject_id = "") {
    const Eigen::Index r = a.rows();
    if (r < 2) {
        throw Error(ErrorCode::InvalidParams, "column statistics need at least 2 rows");
    }
    RoiStats s{std::move(subject_id), Vector::Zero(a.cols()), a.colwise().mean().transpose()};
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double m = s.mean[j];
        if (m == 0.0) {
            continue;
        }
        const double ss = (a.col(j).array() - m).square().sum();
        s.cv[j] = std::sqrt(ss / static_cast<double>(r - 1)) / std::abs(m);
    }
    return s;
}

inline RoiStats column_stats(const AttentionMatrix& a) {
    return column_stats(a.values, a.subject_id);
}

/**
 * Row i is subject i's CV vector.
 */
struct GroupRepMatrix {
    std::string group;
    Matrix values; ///< N_g x R.
    std::vector<std::string> subject_ids;
};

inline GroupRepMatrix build_group_matrix(const std::string& group, const std::vector<RoiStats>& stats) {
    if (stats.empty()) {
        throw Error(ErrorCode::InvalidParams, "group '" + group + "' has no subjects");
    }
    const Eigen::Index r = stats.front().cv.size();
    GroupRepMatrix out{group, Matrix(static_cast<Eigen::Index>(stats.size()), r), {}};
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (stats[i].cv.size() != r) {
            throw Error(ErrorCode::InconsistentR, "subject '" + stats[i].subject_id + "' has " + std::to_string(stats[i].cv.size()) + " ROIs, expected " + std::to_string(r));
        }
        out.values.row(static_cast<Eigen::Index>(i)) = stats[i].cv.transpose();
        out.subject_ids.push_back(stats[i].subject_id);
    }
    return out;
}

enum class Aggregation { mean, pooled };
enum class Selection { ranksum, intersection };

/**
 * Per-ROI average over subjects of cv and of mean. Each ROI's values are
 * summed in sorted order so the result does not depend on subject order.
 */
inline RoiStats aggregate_mean(const std::vector<RoiStats>& stats) {
    if (stats.empty()) {
        throw Error(ErrorCode::InvalidParams, "no statistics to aggregate");
    }
    const Eigen::Index r = stats.front().cv.size();
    RoiStats out{"aggregate", Vector::Zero(r), Vector::Zero(r)};
    std::vector<double> cvs(stats.size()), means(stats.size());
    for (Eigen::Index j = 0; j < r; ++j) {
        for (std::size_t i = 0; i < stats.size(); ++i) {
            if (stats[i].cv.size() != r || stats[i].mean.size() != r) {
                throw Error(ErrorCode::InconsistentR, "subject '" + stats[i].subject_id + "' has a different ROI count");
            }
            cvs[i] = stats[i].cv[j];
            means[i] = stats[i].mean[j];
        }
        std::sort(cvs.begin(), cvs.end());
        std::sort(means.begin(), means.end());
        out.cv[j] = std::accumulate(cvs.begin(), cvs.end(), 0.0) / static_cast<double>(stats.size());
        out.mean[j] = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(stats.size());
    }
    return out;
}

/**
 * Statistics of each column pooled over every subject's rows.
 */
inline RoiStats aggregate_pooled(const std::vector<AttentionMatrix>& mats) {
    if (mats.empty()) {
        throw Error(ErrorCode::InvalidParams, "no attention matrices to aggregate");
    }
    const Eigen::Index r = mats.front().values.cols();
    Eigen::Index rows = 0;
    for (const auto& m : mats) {
        if (m.values.cols() != r) {
            throw Error(ErrorCode::InconsistentR, "subject '" + m.subject_id + "' has a different ROI count");
        }
        rows += m.values.rows();
    }
    Matrix stacked(rows, r);
    Eigen::Index at = 0;
    for (const auto& m : mats) {
        stacked.middleRows(at, m.values.rows()) = m.values;
        at += m.values.rows();
    }
    auto s = column_stats(stacked, "pooled");
    return s;
}

/**
 * Selected ROIs (1-based) in selection order.
 */
struct TopRoiSet {
    std::string group;
    std::vector<int> rois;
};

/// Average ranks, rank 1 = largest value.
inline Vector descending_ranks(const Vector& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v[a] > v[b]; });
    Vector ranks(n);
    for (Eigen::Index start = 0; start < n;) {
        Eigen::Index stop = start + 1;
        while (stop < n && v[order[static_cast<std::size_t>(stop)]] == v[order[static_cast<std::size_t>(start)]]) ++stop;
        const double avg = 0.5 * static_cast<double>(start + 1 + stop);
        for (Eigen::Index k = start; k < stop; ++k) ranks[order[static_cast<std::size_t>(k)]] = avg;
        start = stop;
    }
    return ranks;
}

inline std::size_t top_count(std::size_t r, double q) {
    if (!(q > 0.0 && q <= 1.0)) {
        throw Error(ErrorCode::InvalidParams, "q must be in (0, 1]");
    }
    // guard against 0.25 * 116 landing a hair above 29
    const double raw = q * static_cast<double>(r);
    const double rounded = std::round(raw);
    const double k = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
    return std::min(r, static_cast<std::size_t>(k));
}

/**
 * Rank-sum selection takes the first ceil(q R) ROIs by (cv rank + mean rank),
 * ties to the smaller index. Intersection keeps ROIs in the top ceil(q R) of
 * both statistics, ordered the same way, and may return fewer.
 */
inline TopRoiSet select_top(const RoiStats& agg, double q, Selection sel, std::string group = "") {
    const auto r = static_cast<std::size_t>(agg.cv.size());
    const std::size_t k = top_count(r, q);
    const Vector cv_rank = descending_ranks(agg.cv);
    const Vector mean_rank = descending_ranks(agg.mean);
    const Vector score = cv_rank + mean_rank;

    std::vector<Eigen::Index> order(r);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return score[a] < score[b]; });

    TopRoiSet out{std::move(group), {}};
    for (auto j : order) {
        if (sel == Selection::ranksum) {
            if (out.rois.size() == k) break;
            out.rois.push_back(static_cast<int>(j) + 1);
        } else if (cv_rank[j] <= static_cast<double>(k) && mean_rank[j] <= static_cast<double>(k)) {
            out.rois.push_back(static_cast<int>(j) + 1);
        }
    }
    return out;
}

inline TopRoiSet top_quartile_rois(const std::vector<RoiStats>& stats, double q = 0.25, Selection sel = Selection::ranksum, std::string group = "") {
    return select_top(aggregate_mean(stats), q, sel, std::move(group));
}

/**
 * CSV with a `subject_id` column followed by one column per ROI name.
 */
inline std::string write_group_matrix_csv(const GroupRepMatrix& x, const RoiTable& table) {
    if (table.size() != static_cast<std::size_t>(x.values.cols())) {
        throw Error(ErrorCode::InconsistentR, "ROI table does not match the group matrix");
    }
    std::string out = "subject_id";
    for (const auto& e : table.entries()) out += "," + e.name;
    out += '\n';
    for (Eigen::Index i = 0; i < x.values.rows(); ++i) {
        out += x.subject_ids.at(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < x.values.cols(); ++j) out += "," + format_double(x.values(i, j));
        out += '\n';
    }
    return out;
}

struct ParsedGroupMatrix {
    GroupRepMatrix matrix;
    std::vector<std::string> roi_names;
};

inline ParsedGroupMatrix parse_group_matrix_csv(const std::string& content, std::string group = "") {
    auto lines = nonempty_lines(content);
    if (lines.size() < 2) {
        throw Error(ErrorCode::Format, "group matrix CSV needs a header and at least one subject row");
    }
    auto header = split(lines[0], ',');
    ParsedGroupMatrix out;
    for (std::size_t c = 1; c < header.size(); ++c) out.roi_names.emplace_back(trim(header[c]));
    const auto r = static_cast<Eigen::Index>(out.roi_names.size());
    out.matrix.group = std::move(group);
    out.matrix.values.resize(static_cast<Eigen::Index>(lines.size() - 1), r);
    for (std::size_t l = 1; l < lines.size(); ++l) {
        auto cells = split(lines[l], ',');
        if (static_cast<Eigen::Index>(cells.size()) != r + 1) {
            throw Error(ErrorCode::Format, "line " + std::to_string(l + 1) + " has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(r + 1));
        }
        out.matrix.subject_ids.emplace_back(trim(cells[0]));
        for (Eigen::Index j = 0; j < r; ++j) {
            auto v = parse_double(cells[static_cast<std::size_t>(j + 1)]);
            if (!v) {
                throw Error(ErrorCode::NonNumericCell, "line " + std::to_string(l + 1) + ", column " + std::to_string(j + 2));
            }
            out.matrix.values(static_cast<Eigen::Index>(l - 1), j) = *v;
        }
    }
    return out;
}

inline nlohmann::json top_rois_to_json(const TopRoiSet& t, const RoiTable* table = nullptr, double q = 0.25) {
    nlohmann::json names = nlohmann::json::array();
    if (table) {
        for (int idx : t.rois) names.push_back(table->name(static_cast<std::size_t>(idx - 1)));
    }
    nlohmann::json j = {{"group", t.group}, {"q", q}, {"rois", t.rois}};
    if (table) j["names"] = names;
    return j;
}

inline TopRoiSet top_rois_from_json(const nlohmann::json& j) {
    try {
        return {j.at("group").get<std::string>(), j.at("rois").get<std::vector<int>>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, std::string("top ROI JSON: ") + e.what());
    }
}

}

#endif
