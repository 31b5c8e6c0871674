#ifndef ATTNFMRI_LSIRM_PROCRUSTES_HPP
#define ATTNFMRI_LSIRM_PROCRUSTES_HPP

#include "../core.hpp"

#include <Eigen/SVD>

namespace attnfmri::lsirm {

struct ProcrustesResult {
    Matrix u;
    Matrix v;
    Matrix rotation;          ///< Orthogonal d x d (reflections allowed).
    bool degenerate = false;  ///< Cross-covariance was rank deficient; identity used.
};

/**
 * Orthogonal Procrustes fit of `u` onto `ref_u` after centring both at their
 * column means. The fitted map (shift, rotate, shift to the reference
 * centroid) is applied to `u` and `v` alike, so item-respondent distances
 * are preserved.
 */
inline ProcrustesResult procrustes_align(const Matrix& u, const Matrix& v, const Matrix& ref_u) {
    if (u.cols() != ref_u.cols() || u.rows() != ref_u.rows() || v.cols() != u.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "Procrustes configurations must share shape and dimension");
    }
    const Eigen::RowVectorXd centre = u.colwise().mean();
    const Eigen::RowVectorXd ref_centre = ref_u.colwise().mean();
    const Matrix a = u.rowwise() - centre;
    const Matrix b = ref_u.rowwise() - ref_centre;

    ProcrustesResult out;
    const Matrix cross = a.transpose() * b;
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double tol = 1e-12 * std::max(1.0, s.size() ? s[0] : 0.0);
    if (s.size() == 0 || s[s.size() - 1] <= tol) {
        out.degenerate = true;
        out.rotation = Matrix::Identity(u.cols(), u.cols());
    } else {
        out.rotation = svd.matrixU() * svd.matrixV().transpose();
    }

    out.u = (a * out.rotation).rowwise() + ref_centre;
    out.v = ((v.rowwise() - centre) * out.rotation).rowwise() + ref_centre;
    return out;
}

}

#endif
