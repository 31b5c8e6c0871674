#ifndef ATTNFMRI_FCN_CORRELATION_HPP
#define ATTNFMRI_FCN_CORRELATION_HPP

#include "../core.hpp"
#include "../data_model.hpp"

#include <algorithm>
#include <cmath>

namespace attnfmri::fcn {

enum class CorrScale { pearson_r, fisher_z };

struct CorrMatrix {
    Matrix values;
    CorrScale scale = CorrScale::pearson_r;
};

/**
 * Sample Pearson correlation between every pair of ROI rows.
 * Throws `ZeroVarianceRow` naming the first constant ROI.
 */
inline CorrMatrix pearson_matrix(const BoldMatrix& b) {
    const Eigen::Index r = b.values.rows();
    Matrix centered = b.values.colwise() - b.values.rowwise().mean();
    Vector norms = centered.rowwise().norm();
    for (Eigen::Index i = 0; i < r; ++i) {
        if (!(norms[i] > 0.0)) {
            throw Error(ErrorCode::ZeroVarianceRow, "ROI " + std::to_string(i + 1) + " has zero variance");
        }
        centered.row(i) /= norms[i];
    }

    CorrMatrix out;
    out.values = centered * centered.transpose();
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = i + 1; j < r; ++j) {
            double v = std::clamp(0.5 * (out.values(i, j) + out.values(j, i)), -1.0, 1.0);
            out.values(i, j) = v;
            out.values(j, i) = v;
        }
        out.values(i, i) = 1.0;
    }
    return out;
}

/**
 * Elementwise atanh off the diagonal; the diagonal is stored as 0.
 */
inline CorrMatrix fisher_z(const CorrMatrix& c) {
    if (c.scale != CorrScale::pearson_r) {
        throw Error(ErrorCode::InvalidParams, "fisher_z expects a Pearson correlation matrix");
    }
    CorrMatrix out{Matrix::Zero(c.values.rows(), c.values.cols()), CorrScale::fisher_z};
    for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.values.cols(); ++j) {
            if (i == j) {
                continue;
            }
            const double r = c.values(i, j);
            if (std::abs(r) >= 1.0) {
                throw Error(ErrorCode::PerfectCorrelation, "|r| = 1 between ROIs " + std::to_string(i + 1) + " and " + std::to_string(j + 1));
            }
            out.values(i, j) = std::atanh(r);
        }
    }
    return out;
}

/**
 * Binary adjacency with an edge wherever |value| >= threshold off the diagonal.
 */
inline FcnAdjacency corr_to_adjacency(const CorrMatrix& c, double threshold, std::string subject_id = "") {
    if (!std::isfinite(threshold)) {
        throw Error(ErrorCode::InvalidParams, "threshold must be finite");
    }
    FcnAdjacency out;
    out.subject_id = std::move(subject_id);
    out.kind = AdjacencyKind::binary;
    out.values = Matrix::Zero(c.values.rows(), c.values.cols());
    for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.values.cols(); ++j) {
            if (i != j && std::abs(c.values(i, j)) >= threshold) {
                out.values(i, j) = 1.0;
            }
        }
    }
    return out;
}

}

#endif
