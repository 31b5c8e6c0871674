#ifndef ATTNFMRI_LSIRM_SELECT_HPP
#define ATTNFMRI_LSIRM_SELECT_HPP

#include "../core.hpp"
#include "../group_features.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace attnfmri::lsirm {

/// Linear interpolation between order statistics (R's type 7).
inline double quantile_type7(std::vector<double> values, double q) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptyCandidates, "quantile of an empty set");
    }
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct NearOriginRoi {
    int roi; ///< 1-based.
    double norm;
};

/**
 * Candidate ROIs whose latent position norm is at most the `radius_quantile`
 * quantile of candidate norms, by ascending norm (ties to the smaller index).
 */
inline std::vector<NearOriginRoi> near_origin_rois(const Matrix& u_hat, const features::TopRoiSet& candidates, double radius_quantile = 0.5) {
    if (candidates.rois.empty()) {
        throw Error(ErrorCode::EmptyCandidates, "no candidate ROIs for group '" + candidates.group + "'");
    }
    if (!(radius_quantile >= 0.0 && radius_quantile <= 1.0)) {
        throw Error(ErrorCode::InvalidParams, "radius quantile must be in [0, 1]");
    }
    std::vector<NearOriginRoi> all;
    std::vector<double> norms;
    for (int roi : candidates.rois) {
        if (roi < 1 || roi > u_hat.rows()) {
            throw Error(ErrorCode::InvalidParams, "candidate ROI " + std::to_string(roi) + " outside 1.." + std::to_string(u_hat.rows()));
        }
        const double n = u_hat.row(roi - 1).norm();
        all.push_back({roi, n});
        norms.push_back(n);
    }
    const double cut = quantile_type7(norms, radius_quantile);
    std::vector<NearOriginRoi> out;
    for (const auto& c : all) {
        if (c.norm <= cut) out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const NearOriginRoi& a, const NearOriginRoi& b) { return a.norm != b.norm ? a.norm < b.norm : a.roi < b.roi; });
    return out;
}

inline std::vector<int> roi_indices(const std::vector<NearOriginRoi>& v) {
    std::vector<int> out;
    for (const auto& x : v) out.push_back(x.roi);
    return out;
}

}

#endif
