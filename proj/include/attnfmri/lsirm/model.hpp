#ifndef ATTNFMRI_LSIRM_MODEL_HPP
#define ATTNFMRI_LSIRM_MODEL_HPP

#include "../core.hpp"

#include <cmath>
#include <numbers>

/**
 * @file model.hpp
 *
 * @brief Continuous latent space item response model.
 *
 * For subject i and ROI j,
 *
 *     x_ij ~ Normal(theta_j + beta_i - |u_j - v_i|, sigma2)
 *
 * with priors theta_j ~ N(0, sigma_theta2), beta_i ~ N(0, tau_beta2),
 * u_j, v_i ~ MVN(0, I_d), sigma2 ~ InvGamma(a, b) and
 * sigma_theta2 ~ InvGamma(a_sigma, b_sigma).
 */

namespace attnfmri::lsirm {

/**
 * One state of the sampler. R ROIs (items), N subjects (respondents), d dimensions.
 */
struct LsirmParams {
    Vector theta; ///< R ROI main effects.
    Vector beta;  ///< N subject main effects.
    Matrix u;     ///< R x d ROI positions.
    Matrix v;     ///< N x d subject positions.
    double sigma2 = 1.0;
    double sigma_theta2 = 1.0;
};

struct LsirmHyper {
    double tau_beta2 = 1.0;
    double a_sigma = 0.001; ///< InvGamma shape for sigma_theta2.
    double b_sigma = 0.001; ///< InvGamma rate for sigma_theta2.
    double a = 0.001;       ///< InvGamma shape for sigma2.
    double b = 0.001;       ///< InvGamma rate for sigma2.
    double jump_beta = 0.005;
    double jump_theta = 0.005;
    double jump_u = 0.005;
    double jump_v = 0.003;
};

inline void validate_hyper(const LsirmHyper& h) {
    const double values[] = {h.tau_beta2, h.a_sigma, h.b_sigma, h.a, h.b, h.jump_beta, h.jump_theta, h.jump_u, h.jump_v};
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorCode::InvalidConfig, "LSIRM hyperparameters and jump sizes must be positive and finite");
        }
    }
}

inline constexpr double half_log_2pi = 0.91893853320467274178;

inline double log_normal_density(double x, double mean, double var) {
    const double z = x - mean;
    return -half_log_2pi - 0.5 * std::log(var) - 0.5 * z * z / var;
}

/// Shape/rate parameterisation.
inline double log_inv_gamma_density(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

/**
 * |u_j - v_i| for every subject i and ROI j, as an N x R matrix.
 */
inline Matrix distance_matrix(const Matrix& u, const Matrix& v) {
    Matrix d(v.rows(), u.rows());
    for (Eigen::Index j = 0; j < u.rows(); ++j) {
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            d(i, j) = (u.row(j) - v.row(i)).norm();
        }
    }
    return d;
}

inline void check_shapes(const LsirmParams& p, const Matrix& x) {
    if (p.theta.size() != x.cols() || p.u.rows() != x.cols() || p.beta.size() != x.rows() || p.v.rows() != x.rows() || p.u.cols() != p.v.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "LSIRM parameter shapes do not match the N x R data matrix");
    }
}

/**
 * Sum of Normal log densities over all cells of the N x R matrix `x`.
 */
inline double log_likelihood(const LsirmParams& p, const Matrix& x) {
    if (!(p.sigma2 > 0.0)) {
        throw Error(ErrorCode::NonPositiveVariance, "sigma2 must be positive");
    }
    check_shapes(p, x);
    const Matrix d = distance_matrix(p.u, p.v);
    double ss = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double r = x(i, j) - (p.theta[j] + p.beta[i] - d(i, j));
            ss += r * r;
        }
    }
    const double cells = static_cast<double>(x.size());
    return -cells * (half_log_2pi + 0.5 * std::log(p.sigma2)) - 0.5 * ss / p.sigma2;
}

/**
 * Sum of all prior log densities.
 */
inline double log_prior(const LsirmParams& p, const LsirmHyper& h) {
    if (!(p.sigma2 > 0.0) || !(p.sigma_theta2 > 0.0)) {
        throw Error(ErrorCode::NonPositiveVariance, "variances must be positive");
    }
    double lp = 0.0;
    for (Eigen::Index j = 0; j < p.theta.size(); ++j) lp += log_normal_density(p.theta[j], 0.0, p.sigma_theta2);
    for (Eigen::Index i = 0; i < p.beta.size(); ++i) lp += log_normal_density(p.beta[i], 0.0, h.tau_beta2);
    lp += -half_log_2pi * static_cast<double>(p.u.size()) - 0.5 * p.u.squaredNorm();
    lp += -half_log_2pi * static_cast<double>(p.v.size()) - 0.5 * p.v.squaredNorm();
    lp += log_inv_gamma_density(p.sigma2, h.a, h.b);
    lp += log_inv_gamma_density(p.sigma_theta2, h.a_sigma, h.b_sigma);
    return lp;
}

inline double log_posterior(const LsirmParams& p, const Matrix& x, const LsirmHyper& h) {
    return log_likelihood(p, x) + log_prior(p, h);
}

}

#endif
