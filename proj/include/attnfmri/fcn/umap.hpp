#ifndef ATTNFMRI_FCN_UMAP_HPP
#define ATTNFMRI_FCN_UMAP_HPP

#include "../core.hpp"
#include "../data_model.hpp"
#include "pca.hpp"
#include "tsne.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

/**
 * @file umap.hpp
 *
 * @brief A compact UMAP: exact k-NN graph, smooth-kNN memberships, fuzzy
 * union, PCA initialisation and the usual edge-sampled SGD layout.
 */

namespace attnfmri::fcn {

struct UmapParams {
    int n_neighbors = 10;
    double min_dist = 0.1;
    double spread = 1.0;
    int n_epochs = 200;
    int negative_sample_rate = 5;
    double learning_rate = 1.0;
    std::uint64_t seed = 42;

    /// Tolerance on sum_j exp(-max(0, d_ij - rho_i) / sigma_i) - log2(k).
    double sigma_tolerance = 1e-5;
};

struct FuzzyEdge {
    Eigen::Index from = 0;
    Eigen::Index to = 0;
    double weight = 0.0;
};

struct UmapResult {
    Embedding2D embedding;
    Vector rho;
    Vector sigma;
    std::vector<FuzzyEdge> directed;  ///< Per-point neighbour memberships before the union.
    std::vector<FuzzyEdge> symmetric; ///< Fuzzy union a + b - ab, each pair once with from < to.
    double a = 0.0;
    double b = 0.0;
};

/**
 * Fit the curve 1 / (1 + a x^(2b)) to the min_dist/spread target by
 * Levenberg-Marquardt.
 */
inline std::pair<double, double> fit_ab(double min_dist, double spread) {
    constexpr int npts = 300;
    std::vector<double> xs(npts), ys(npts);
    for (int k = 0; k < npts; ++k) {
        xs[k] = 3.0 * spread * k / (npts - 1);
        ys[k] = xs[k] < min_dist ? 1.0 : std::exp(-(xs[k] - min_dist) / spread);
    }

    auto residuals = [&](double a, double b, std::vector<double>* ja, std::vector<double>* jb) {
        double ss = 0.0;
        for (int k = 0; k < npts; ++k) {
            const double x = xs[k];
            const double xp = x > 0 ? std::pow(x, 2.0 * b) : 0.0;
            const double denom = 1.0 + a * xp;
            const double r = 1.0 / denom - ys[k];
            ss += r * r;
            if (ja) {
                (*ja)[k] = -xp / (denom * denom);
                (*jb)[k] = x > 0 ? -a * xp * 2.0 * std::log(x) / (denom * denom) : 0.0;
            }
        }
        return ss;
    };

    double a = 1.5, b = 0.9, lambda = 1e-3;
    std::vector<double> ja(npts), jb(npts), r(npts);
    double current = residuals(a, b, nullptr, nullptr);
    for (int iter = 0; iter < 200; ++iter) {
        residuals(a, b, &ja, &jb);
        double g_aa = 0, g_ab = 0, g_bb = 0, g_a = 0, g_b = 0;
        for (int k = 0; k < npts; ++k) {
            const double x = xs[k];
            const double xp = x > 0 ? std::pow(x, 2.0 * b) : 0.0;
            r[k] = 1.0 / (1.0 + a * xp) - ys[k];
            g_aa += ja[k] * ja[k];
            g_ab += ja[k] * jb[k];
            g_bb += jb[k] * jb[k];
            g_a += ja[k] * r[k];
            g_b += jb[k] * r[k];
        }
        bool improved = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
            const double m_aa = g_aa * (1 + lambda), m_bb = g_bb * (1 + lambda);
            const double det = m_aa * m_bb - g_ab * g_ab;
            if (det == 0) break;
            const double da = -(m_bb * g_a - g_ab * g_b) / det;
            const double db = -(m_aa * g_b - g_ab * g_a) / det;
            const double na = a + da, nb = b + db;
            if (na > 0 && nb > 0) {
                const double trial = residuals(na, nb, nullptr, nullptr);
                if (trial < current) {
                    const double gain = current - trial;
                    a = na;
                    b = nb;
                    current = trial;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    improved = gain > 1e-14;
                    break;
                }
            }
            lambda *= 10;
        }
        if (!improved) break;
    }
    return {a, b};
}

/**
 * Memberships and fuzzy union for the k-NN graph of the rows of `signals`.
 */
inline UmapResult umap_graph(const Matrix& signals, const UmapParams& params) {
    const Eigen::Index n = signals.rows();
    const int k = params.n_neighbors;
    if (k < 2 || k >= n) {
        throw Error(ErrorCode::TooFewNeighbors, "n_neighbors must satisfy 2 <= k < R (k = " + std::to_string(k) + ", R = " + std::to_string(n) + ")");
    }

    Matrix dist = squared_distances(signals).cwiseSqrt();
    UmapResult out;
    out.rho = Vector::Zero(n);
    out.sigma = Vector::Zero(n);
    const double target = std::log2(static_cast<double>(k));
    const double mean_dist = dist.sum() / static_cast<double>(n * (n - 1));

    Matrix member = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> order;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) order.push_back(j);
        }
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return dist(i, x) < dist(i, y); });
        order.resize(static_cast<std::size_t>(k));

        const double rho = dist(i, order.front());
        auto membership_sum = [&](double sigma) {
            double s = 0;
            for (auto j : order) s += std::exp(-std::max(0.0, dist(i, j) - rho) / sigma);
            return s;
        };

        // membership_sum is increasing in sigma
        double lo = 0.0, hi = std::max(mean_dist, 1e-12), sigma = hi;
        while (membership_sum(hi) < target && hi < 1e300) hi *= 2;
        for (int iter = 0; iter < 200; ++iter) {
            sigma = 0.5 * (lo + hi);
            const double diff = membership_sum(sigma) - target;
            if (std::abs(diff) < params.sigma_tolerance) break;
            (diff > 0 ? hi : lo) = sigma;
        }
        sigma = std::max(sigma, 1e-3 * mean_dist);
        out.rho[i] = rho;
        out.sigma[i] = sigma;

        for (auto j : order) {
            const double w = std::exp(-std::max(0.0, dist(i, j) - rho) / sigma);
            member(i, j) = w;
            out.directed.push_back({i, j, w});
        }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double a = member(i, j), b = member(j, i);
            const double w = a + b - a * b;
            if (w > 0) out.symmetric.push_back({i, j, w});
        }
    }
    return out;
}

/**
 * Full UMAP layout. Deterministic given `params.seed`.
 */
inline UmapResult umap_run(const Matrix& signals, const UmapParams& params) {
    UmapResult out = umap_graph(signals, params);
    const Eigen::Index n = signals.rows();
    std::tie(out.a, out.b) = fit_ab(params.min_dist, params.spread);
    const double a = out.a, b = out.b;

    Rng rng(params.seed);
    std::normal_distribution<double> jitter(0.0, 1e-4);
    Matrix y = pca_embed(signals).points;
    for (Eigen::Index d = 0; d < 2; ++d) {
        const double lo = y.col(d).minCoeff(), hi = y.col(d).maxCoeff();
        if (hi > lo) {
            y.col(d) = (10.0 * (y.col(d).array() - lo) / (hi - lo)).matrix();
        } else {
            y.col(d).setConstant(5.0);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) += jitter(rng);
        y(i, 1) += jitter(rng);
    }

    const auto& edges = out.symmetric;
    double wmax = 0.0;
    for (const auto& e : edges) wmax = std::max(wmax, e.weight);
    std::vector<double> per_sample(edges.size()), next_sample(edges.size()), per_negative(edges.size()), next_negative(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        per_sample[e] = wmax / edges[e].weight;
        next_sample[e] = per_sample[e];
        per_negative[e] = per_sample[e] / params.negative_sample_rate;
        next_negative[e] = per_negative[e];
    }

    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    auto clip = [](double g) { return std::clamp(g, -4.0, 4.0); };

    for (int epoch = 0; epoch < params.n_epochs; ++epoch) {
        const double alpha = params.learning_rate * (1.0 - static_cast<double>(epoch) / params.n_epochs);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_sample[e] > epoch + 1) {
                continue;
            }
            const int n_neg = std::max(0, static_cast<int>((epoch + 1 - next_negative[e]) / per_negative[e]));
            // each stored pair is used in both directions
            for (int dir = 0; dir < 2; ++dir) {
                const Eigen::Index i = dir == 0 ? edges[e].from : edges[e].to;
                const Eigen::Index j = dir == 0 ? edges[e].to : edges[e].from;

                const double d2 = (y.row(i) - y.row(j)).squaredNorm();
                if (d2 > 0) {
                    const double coef = -2.0 * a * b * std::pow(d2, b - 1.0) / (1.0 + a * std::pow(d2, b));
                    for (Eigen::Index d = 0; d < 2; ++d) {
                        const double g = clip(coef * (y(i, d) - y(j, d)));
                        y(i, d) += alpha * g;
                        y(j, d) -= alpha * g;
                    }
                }

                for (int s = 0; s < n_neg; ++s) {
                    const Eigen::Index other = pick(rng);
                    if (other == i) continue;
                    const double nd2 = (y.row(i) - y.row(other)).squaredNorm();
                    for (Eigen::Index d = 0; d < 2; ++d) {
                        double g = 4.0;
                        if (nd2 > 0) {
                            const double coef = 2.0 * b / ((0.001 + nd2) * (1.0 + a * std::pow(nd2, b)));
                            g = clip(coef * (y(i, d) - y(other, d)));
                        }
                        y(i, d) += alpha * g;
                    }
                }
            }
            next_sample[e] += per_sample[e];
            next_negative[e] += n_neg * per_negative[e];
        }
    }

    out.embedding.points = std::move(y);
    out.embedding.method = EmbedMethod::umap;
    return out;
}

inline Embedding2D umap_embed(const Matrix& signals, const UmapParams& params) {
    return umap_run(signals, params).embedding;
}

inline Embedding2D umap_embed(const BoldMatrix& b, const UmapParams& params) {
    return umap_embed(b.values, params);
}

}

#endif
