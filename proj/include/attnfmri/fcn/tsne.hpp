#ifndef ATTNFMRI_FCN_TSNE_HPP
#define ATTNFMRI_FCN_TSNE_HPP

#include "../core.hpp"
#include "../data_model.hpp"
#include "pca.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

/**
 * @file tsne.hpp
 *
 * @brief Exact t-SNE on ROI signal vectors.
 *
 * O(R^2) per iteration, which is nothing at atlas scale, so there is no
 * space-partitioning approximation.
 */

namespace attnfmri::fcn {

struct TsneParams {
    double perplexity = 5.0;
    int n_iter = 1000;
    std::uint64_t seed = 42;

    /// Unset means max(R / (4 x exaggeration), 50).
    std::optional<double> learning_rate;
    double exaggeration = 12.0;
    int exaggeration_iter = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;

    /// Tolerance on the Shannon entropy (in nats) of each conditional distribution.
    double entropy_tolerance = 1e-5;
};

struct TsneResult {
    Embedding2D embedding;
    Matrix conditional_p; ///< Row i is p_{.|i}; rows sum to 1.
    Matrix joint_p;       ///< Symmetrised, sums to 1.
    std::vector<double> kl_trace; ///< KL(P||Q) after each iteration, without exaggeration.
};

/**
 * Squared Euclidean distances between rows.
 */
inline Matrix squared_distances(const Matrix& x) {
    Vector norms = x.rowwise().squaredNorm();
    Matrix d = (-2.0 * x * x.transpose()).colwise() + norms;
    d.rowwise() += norms.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    return d;
}

/**
 * Per-point Gaussian conditionals whose entropy matches log(perplexity),
 * with the precision found by bisection.
 */
inline Matrix conditional_probabilities(const Matrix& sq_dist, double perplexity, double tolerance = 1e-5) {
    const Eigen::Index n = sq_dist.rows();
    const double target = std::log(perplexity);
    Matrix p = Matrix::Zero(n, n);

    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();

        // Distances are shifted by the row minimum so exp() cannot underflow to all zeros.
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) dmin = std::min(dmin, sq_dist(i, j));
        }

        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    p(i, j) = 0.0;
                    continue;
                }
                const double shifted = sq_dist(i, j) - dmin;
                p(i, j) = std::exp(-beta * shifted);
                sum += p(i, j);
                weighted += shifted * p(i, j);
            }
            // H = log(sum) + beta * E[d]
            const double entropy = std::log(sum) + beta * weighted / sum;
            p.row(i) /= sum;

            const double diff = entropy - target;
            if (std::abs(diff) < tolerance) {
                break;
            }
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
    }
    return p;
}

inline double kl_divergence(const Matrix& p, const Matrix& y) {
    Matrix num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    const double total = num.sum();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (i != j && p(i, j) > 0) {
                const double q = std::max(num(i, j) / total, 1e-300);
                kl += p(i, j) * std::log(p(i, j) / q);
            }
        }
    }
    return kl;
}

/**
 * Exact t-SNE with early exaggeration, momentum switching and per-coordinate gains.
 * Throws `PerplexityTooLarge` unless 1 <= perplexity < R.
 */
inline TsneResult tsne_run(const Matrix& signals, const TsneParams& params) {
    const Eigen::Index n = signals.rows();
    if (n < 2) {
        throw Error(ErrorCode::InvalidParams, "t-SNE needs at least 2 points");
    }
    if (!(params.perplexity >= 1.0)) {
        throw Error(ErrorCode::InvalidParams, "perplexity must be >= 1");
    }
    if (params.perplexity >= static_cast<double>(n)) {
        throw Error(ErrorCode::PerplexityTooLarge, "perplexity " + format_double(params.perplexity) + " must be below the number of ROIs (" + std::to_string(n) + ")");
    }
    if (params.n_iter < 1) {
        throw Error(ErrorCode::InvalidParams, "n_iter must be positive");
    }

    TsneResult out;
    out.conditional_p = conditional_probabilities(squared_distances(signals), params.perplexity, params.entropy_tolerance);
    out.joint_p = (out.conditional_p + out.conditional_p.transpose()) / (2.0 * static_cast<double>(n));
    Matrix p = out.joint_p.cwiseMax(1e-12);
    p.diagonal().setZero();

    const double lr = params.learning_rate ? *params.learning_rate : std::max(static_cast<double>(n) / (4.0 * params.exaggeration), 50.0);
    Rng rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1e-4);
    Matrix y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) = normal(rng);
        y(i, 1) = normal(rng);
    }
    Matrix update = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);

    out.kl_trace.reserve(static_cast<std::size_t>(params.n_iter));
    for (int iter = 0; iter < params.n_iter; ++iter) {
        const double exag = iter < params.exaggeration_iter ? params.exaggeration : 1.0;
        const double momentum = iter < params.momentum_switch_iter ? params.initial_momentum : params.final_momentum;

        Matrix num = (1.0 + squared_distances(y).array()).inverse().matrix();
        num.diagonal().setZero();
        const double total = num.sum();

        // dC/dy_i = 4 sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)
        Matrix w = (exag * p.array() - num.array() / total) * num.array();
        Matrix grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index d = 0; d < 2; ++d) {
                const bool same = (grad(i, d) > 0) == (update(i, d) > 0);
                gains(i, d) = same ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
            }
        }
        update = momentum * update - lr * gains.cwiseProduct(grad);
        y += update;
        y.rowwise() -= y.colwise().mean();

        out.kl_trace.push_back(kl_divergence(p, y));
    }

    out.embedding.points = std::move(y);
    out.embedding.method = EmbedMethod::tsne;
    return out;
}

inline Embedding2D tsne_embed(const Matrix& signals, const TsneParams& params) {
    return tsne_run(signals, params).embedding;
}

inline Embedding2D tsne_embed(const BoldMatrix& b, const TsneParams& params) {
    return tsne_embed(b.values, params);
}

}

#endif
