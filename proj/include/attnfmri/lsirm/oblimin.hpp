#ifndef ATTNFMRI_LSIRM_OBLIMIN_HPP
#define ATTNFMRI_LSIRM_OBLIMIN_HPP

#include "../core.hpp"

#include <Eigen/LU>
#include <vector>

namespace attnfmri::lsirm {

struct QuartiminValue {
    double f = 0.0;
    Matrix gradient; ///< d f / d L.
};

/**
 * Quartimin (oblimin with gamma = 0): one quarter of the sum over rows of
 * L_ik^2 L_il^2 for all ordered column pairs k != l.
 */
inline QuartiminValue quartimin(const Matrix& l) {
    const Matrix sq = l.cwiseAbs2();
    // each entry times the sum of the other squared entries in its row
    const Matrix others = (sq.rowwise().sum().replicate(1, sq.cols()) - sq);
    QuartiminValue out;
    out.f = 0.25 * sq.cwiseProduct(others).sum();
    out.gradient = l.cwiseProduct(others);
    return out;
}

struct ObliminResult {
    Matrix rotated;                ///< A (T^-1)^T.
    Matrix transform;              ///< T, unit-length columns.
    std::vector<double> criterion; ///< Criterion after each accepted step, starting value first.
    int iterations = 0;
    bool converged = false;
};

struct ObliminParams {
    int max_iter = 500;
    double tolerance = 1e-8;
};

/**
 * Gradient-projection oblique rotation under the quartimin criterion.
 * Only steps that do not increase the criterion are taken.
 */
inline ObliminResult oblimin_rotate(const Matrix& a, const ObliminParams& p = {}) {
    const Eigen::Index d = a.cols();
    if (d < 2) {
        throw Error(ErrorCode::InvalidParams, "oblimin rotation needs at least 2 dimensions");
    }
    ObliminResult out;
    Matrix t = Matrix::Identity(d, d);
    Matrix l = a;
    auto q = quartimin(l);
    Matrix g = -(l.transpose() * q.gradient * t.inverse()).transpose();
    out.criterion.push_back(q.f);

    double alpha = 1.0;
    for (int iter = 0; iter < p.max_iter; ++iter) {
        const Eigen::RowVectorXd diag = t.cwiseProduct(g).colwise().sum();
        const Matrix gp = g - t * diag.asDiagonal();
        const double s = gp.norm();
        if (s < p.tolerance) {
            out.converged = true;
            break;
        }
        alpha *= 2.0;
        bool improved = false;
        Matrix t_new, l_new;
        QuartiminValue q_new;
        for (int half = 0; half <= 10; ++half) {
            Matrix x = t - alpha * gp;
            const Eigen::RowVectorXd inv_len = x.colwise().norm().cwiseInverse();
            t_new = x * inv_len.asDiagonal();
            l_new = a * t_new.inverse().transpose();
            q_new = quartimin(l_new);
            if (q.f - q_new.f > 0.5 * s * s * alpha) {
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved && !(q_new.f <= q.f)) {
            out.converged = true; // no descent left at working precision
            break;
        }
        const double decrease = q.f - q_new.f;
        t = t_new;
        l = l_new;
        q = q_new;
        g = -(l.transpose() * q.gradient * t.inverse()).transpose();
        out.criterion.push_back(q.f);
        out.iterations = iter + 1;
        if (decrease < p.tolerance) {
            out.converged = true;
            break;
        }
    }
    out.rotated = l;
    out.transform = t;
    return out;
}

}

#endif
