#ifndef ATTNFMRI_LSIRM_MCMC_HPP
#define ATTNFMRI_LSIRM_MCMC_HPP

#include "../core.hpp"
#include "../parallel.hpp"
#include "model.hpp"
#include "procrustes.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

/**
 * @file mcmc.hpp
 *
 * @brief Metropolis-within-Gibbs sampler for the continuous LSIRM.
 *
 * Every iteration visits each beta_i, theta_j, u_j and v_i with a Gaussian
 * random-walk proposal, then draws sigma2 and sigma_theta2 from their
 * inverse-gamma full conditionals. Retained samples are Procrustes-aligned
 * to the retained sample with the highest log posterior.
 */

namespace attnfmri::lsirm {

enum class VarianceUpdate {
    gibbs,      ///< Conjugate inverse-gamma draws.
    metropolis  ///< Random walk on log variance; used to cross-check the conjugate draws.
};

/**
 * Which blocks are sampled. Frozen blocks keep their initial values.
 */
struct UpdateMask {
    bool theta = true;
    bool beta = true;
    bool u = true;
    bool v = true;
    bool sigma2 = true;
    bool sigma_theta2 = true;
};

struct McmcConfig {
    int n_iter = 55000;
    int burn_in = 5000;
    int thin = 5;
    int dim = 2;
    std::uint64_t seed = 1;

    VarianceUpdate variance_update = VarianceUpdate::gibbs;
    double jump_log_variance = 0.1; ///< Only for `VarianceUpdate::metropolis`.
    UpdateMask update;
    std::optional<LsirmParams> initial;

    /// Rescale the four jump sizes during burn-in toward a target acceptance
    /// rate; they are frozen once sampling starts.
    bool adapt_jumps = false;
    int adapt_interval = 50;
};

struct AcceptanceRates {
    double beta = 0.0;
    double theta = 0.0;
    double u = 0.0;
    double v = 0.0;
    double sigma2 = 1.0;       ///< 1 under Gibbs updates.
    double sigma_theta2 = 1.0; ///< 1 under Gibbs updates.
};

struct LsirmChain {
    std::vector<LsirmParams> samples;
    std::vector<double> log_posterior;
    AcceptanceRates acceptance;
    LsirmHyper jumps;                       ///< Hyperparameters with the jump sizes actually used after burn-in.
    std::size_t reference = 0;              ///< Index of the MAP sample used for alignment.
    std::size_t degenerate_alignments = 0;
};

inline std::size_t retained_count(const McmcConfig& c) {
    return static_cast<std::size_t>((c.n_iter - c.burn_in) / c.thin);
}

inline void validate_mcmc_config(const McmcConfig& c) {
    if (c.n_iter < 1 || c.burn_in < 0 || c.burn_in >= c.n_iter) {
        throw Error(ErrorCode::InvalidConfig, "need 0 <= burn_in < n_iter");
    }
    if (c.thin < 1) {
        throw Error(ErrorCode::InvalidConfig, "thin must be >= 1");
    }
    if (c.dim < 1) {
        throw Error(ErrorCode::InvalidConfig, "latent dimension must be >= 1");
    }
    if (retained_count(c) == 0) {
        throw Error(ErrorCode::InvalidConfig, "no samples would be retained after burn-in and thinning");
    }
    if (c.adapt_jumps && c.adapt_interval < 1) {
        throw Error(ErrorCode::InvalidConfig, "adapt_interval must be >= 1");
    }
    if (!(c.jump_log_variance > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "jump_log_variance must be positive");
    }
}

/**
 * theta, beta ~ N(0, 0.1^2); U, V ~ N(0, I); both variances 1.
 */
inline LsirmParams initial_state(Eigen::Index n, Eigen::Index r, int dim, Rng& rng) {
    std::normal_distribution<double> small(0.0, 0.1), unit(0.0, 1.0);
    LsirmParams p;
    p.theta.resize(r);
    p.beta.resize(n);
    p.u.resize(r, dim);
    p.v.resize(n, dim);
    for (Eigen::Index j = 0; j < r; ++j) p.theta[j] = small(rng);
    for (Eigen::Index i = 0; i < n; ++i) p.beta[i] = small(rng);
    for (Eigen::Index j = 0; j < r; ++j)
        for (int k = 0; k < dim; ++k) p.u(j, k) = unit(rng);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int k = 0; k < dim; ++k) p.v(i, k) = unit(rng);
    return p;
}

/**
 * Run one chain on the N x R matrix `x` (rows subjects, columns ROIs).
 */
inline LsirmChain run_mcmc(const Matrix& x, const LsirmHyper& hyper, const McmcConfig& c) {
    validate_hyper(hyper);
    LsirmHyper h = hyper;
    validate_mcmc_config(c);
    if (!x.allFinite() || x.rows() < 1 || x.cols() < 1) {
        throw Error(ErrorCode::InvalidConfig, "data matrix must be non-empty and finite");
    }
    const Eigen::Index n = x.rows(), r = x.cols();
    const int dim = c.dim;

    Rng rng(c.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto accept = [&](double log_ratio) { return log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio; };

    LsirmParams s = c.initial ? *c.initial : initial_state(n, r, dim, rng);
    check_shapes(s, x);
    if (s.u.cols() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "initial positions do not match the latent dimension");
    }
    if (!(s.sigma2 > 0.0) || !(s.sigma_theta2 > 0.0)) {
        throw Error(ErrorCode::NonPositiveVariance, "initial variances must be positive");
    }

    Matrix dist = distance_matrix(s.u, s.v);
    Vector new_dist_col(n), new_dist_row(r);
    Eigen::RowVectorXd proposal(dim);

    // cell log-likelihood without the constant and sigma2 terms
    auto sq = [&](Eigen::Index i, Eigen::Index j, double theta, double beta, double d) {
        const double e = x(i, j) - (theta + beta - d);
        return e * e;
    };
    auto residual_ss = [&]() {
        double ss = 0.0;
        for (Eigen::Index j = 0; j < r; ++j)
            for (Eigen::Index i = 0; i < n; ++i) ss += sq(i, j, s.theta[j], s.beta[i], dist(i, j));
        return ss;
    };

    std::uint64_t acc_beta = 0, acc_theta = 0, acc_u = 0, acc_v = 0, acc_s2 = 0, acc_st2 = 0;
    std::uint64_t window_beta = 0, window_theta = 0, window_u = 0, window_v = 0;
    auto adapt = [&](double& jump, std::uint64_t& accepted, Eigen::Index units, double target) {
        const double rate = static_cast<double>(accepted) / static_cast<double>(units * c.adapt_interval);
        jump *= std::exp(2.0 * (rate - target));
        accepted = 0;
    };
    LsirmChain chain;
    chain.samples.reserve(retained_count(c));
    chain.log_posterior.reserve(retained_count(c));

    for (int iter = 0; iter < c.n_iter; ++iter) {
        const double inv2s = 0.5 / s.sigma2;

        if (c.update.beta) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double cur = s.beta[i];
                const double prop = cur + h.jump_beta * normal(rng);
                double diff = 0.0;
                for (Eigen::Index j = 0; j < r; ++j) {
                    diff += sq(i, j, s.theta[j], cur, dist(i, j)) - sq(i, j, s.theta[j], prop, dist(i, j));
                }
                const double lr = diff * inv2s + 0.5 * (cur * cur - prop * prop) / h.tau_beta2;
                if (accept(lr)) {
                    s.beta[i] = prop;
                    ++acc_beta;
                    ++window_beta;
                }
            }
        }

        if (c.update.theta) {
            for (Eigen::Index j = 0; j < r; ++j) {
                const double cur = s.theta[j];
                const double prop = cur + h.jump_theta * normal(rng);
                double diff = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    diff += sq(i, j, cur, s.beta[i], dist(i, j)) - sq(i, j, prop, s.beta[i], dist(i, j));
                }
                const double lr = diff * inv2s + 0.5 * (cur * cur - prop * prop) / s.sigma_theta2;
                if (accept(lr)) {
                    s.theta[j] = prop;
                    ++acc_theta;
                    ++window_theta;
                }
            }
        }

        if (c.update.u) {
            for (Eigen::Index j = 0; j < r; ++j) {
                for (int k = 0; k < dim; ++k) proposal[k] = s.u(j, k) + h.jump_u * normal(rng);
                double diff = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    new_dist_col[i] = (proposal - s.v.row(i)).norm();
                    diff += sq(i, j, s.theta[j], s.beta[i], dist(i, j)) - sq(i, j, s.theta[j], s.beta[i], new_dist_col[i]);
                }
                const double lr = diff * inv2s + 0.5 * (s.u.row(j).squaredNorm() - proposal.squaredNorm());
                if (accept(lr)) {
                    s.u.row(j) = proposal;
                    dist.col(j) = new_dist_col;
                    ++acc_u;
                    ++window_u;
                }
            }
        }

        if (c.update.v) {
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int k = 0; k < dim; ++k) proposal[k] = s.v(i, k) + h.jump_v * normal(rng);
                double diff = 0.0;
                for (Eigen::Index j = 0; j < r; ++j) {
                    new_dist_row[j] = (s.u.row(j) - proposal).norm();
                    diff += sq(i, j, s.theta[j], s.beta[i], dist(i, j)) - sq(i, j, s.theta[j], s.beta[i], new_dist_row[j]);
                }
                const double lr = diff * inv2s + 0.5 * (s.v.row(i).squaredNorm() - proposal.squaredNorm());
                if (accept(lr)) {
                    s.v.row(i) = proposal;
                    dist.row(i) = new_dist_row.transpose();
                    ++acc_v;
                    ++window_v;
                }
            }
        }

        if (c.update.sigma2) {
            const double ss = residual_ss();
            const double cells = static_cast<double>(n * r);
            if (c.variance_update == VarianceUpdate::gibbs) {
                std::gamma_distribution<double> g(h.a + 0.5 * cells, 1.0 / (h.b + 0.5 * ss));
                s.sigma2 = 1.0 / g(rng);
            } else {
                // log target in terms of sigma2 plus the log-scale Jacobian
                auto logt = [&](double var) { return -(h.a + 0.5 * cells + 1.0) * std::log(var) - (h.b + 0.5 * ss) / var + std::log(var); };
                const double prop = s.sigma2 * std::exp(c.jump_log_variance * normal(rng));
                if (accept(logt(prop) - logt(s.sigma2))) {
                    s.sigma2 = prop;
                    ++acc_s2;
                }
            }
        }

        if (c.update.sigma_theta2) {
            const double ss = s.theta.squaredNorm();
            const double count = static_cast<double>(r);
            if (c.variance_update == VarianceUpdate::gibbs) {
                std::gamma_distribution<double> g(h.a_sigma + 0.5 * count, 1.0 / (h.b_sigma + 0.5 * ss));
                s.sigma_theta2 = 1.0 / g(rng);
            } else {
                auto logt = [&](double var) { return -(h.a_sigma + 0.5 * count + 1.0) * std::log(var) - (h.b_sigma + 0.5 * ss) / var + std::log(var); };
                const double prop = s.sigma_theta2 * std::exp(c.jump_log_variance * normal(rng));
                if (accept(logt(prop) - logt(s.sigma_theta2))) {
                    s.sigma_theta2 = prop;
                    ++acc_st2;
                }
            }
        }

        if (c.adapt_jumps && iter < c.burn_in && (iter + 1) % c.adapt_interval == 0) {
            adapt(h.jump_beta, window_beta, n, 0.44);
            adapt(h.jump_theta, window_theta, r, 0.44);
            adapt(h.jump_u, window_u, r, dim == 1 ? 0.44 : 0.35);
            adapt(h.jump_v, window_v, n, dim == 1 ? 0.44 : 0.35);
        }
        if (c.adapt_jumps && iter + 1 == c.burn_in) {
            acc_beta = acc_theta = acc_u = acc_v = 0;
        }

        if (iter >= c.burn_in && (iter - c.burn_in + 1) % c.thin == 0) {
            chain.samples.push_back(s);
            chain.log_posterior.push_back(log_posterior(s, x, h));
        }
    }

    chain.jumps = h;
    const double iters = static_cast<double>(c.n_iter);
    // with adaptation the block rates cover the post-burn-in iterations only
    const double mh_iters = c.adapt_jumps ? static_cast<double>(c.n_iter - c.burn_in) : iters;
    chain.acceptance.beta = static_cast<double>(acc_beta) / (mh_iters * static_cast<double>(n));
    chain.acceptance.theta = static_cast<double>(acc_theta) / (mh_iters * static_cast<double>(r));
    chain.acceptance.u = static_cast<double>(acc_u) / (mh_iters * static_cast<double>(r));
    chain.acceptance.v = static_cast<double>(acc_v) / (mh_iters * static_cast<double>(n));
    if (c.variance_update == VarianceUpdate::metropolis) {
        chain.acceptance.sigma2 = static_cast<double>(acc_s2) / iters;
        chain.acceptance.sigma_theta2 = static_cast<double>(acc_st2) / iters;
    }
    if (!c.update.beta) chain.acceptance.beta = 0.0;
    if (!c.update.theta) chain.acceptance.theta = 0.0;
    if (!c.update.u) chain.acceptance.u = 0.0;
    if (!c.update.v) chain.acceptance.v = 0.0;

    // align to the MAP retained sample
    std::size_t best = 0;
    for (std::size_t k = 1; k < chain.log_posterior.size(); ++k) {
        if (chain.log_posterior[k] > chain.log_posterior[best]) best = k;
    }
    chain.reference = best;
    const Matrix ref = chain.samples[best].u;
    for (auto& smp : chain.samples) {
        auto al = procrustes_align(smp.u, smp.v, ref);
        smp.u = std::move(al.u);
        smp.v = std::move(al.v);
        chain.degenerate_alignments += al.degenerate;
    }
    return chain;
}

struct PosteriorPositions {
    Matrix u; ///< R x d.
    Matrix v; ///< N x d.
};

/**
 * Elementwise mean of the aligned positions.
 */
inline PosteriorPositions posterior_positions(const LsirmChain& ch) {
    if (ch.samples.empty()) {
        throw Error(ErrorCode::EmptyChain, "chain has no samples");
    }
    PosteriorPositions out{Matrix::Zero(ch.samples[0].u.rows(), ch.samples[0].u.cols()), Matrix::Zero(ch.samples[0].v.rows(), ch.samples[0].v.cols())};
    for (const auto& s : ch.samples) {
        out.u += s.u;
        out.v += s.v;
    }
    out.u /= static_cast<double>(ch.samples.size());
    out.v /= static_cast<double>(ch.samples.size());
    return out;
}

struct PosteriorSummary {
    Vector theta_mean, theta_sd;
    Vector beta_mean, beta_sd;
    double sigma2_mean = 0, sigma2_sd = 0;
    double sigma_theta2_mean = 0, sigma_theta2_sd = 0;
    PosteriorPositions positions;
};

inline PosteriorSummary summarize_chain(const LsirmChain& ch) {
    if (ch.samples.empty()) {
        throw Error(ErrorCode::EmptyChain, "chain has no samples");
    }
    const double m = static_cast<double>(ch.samples.size());
    PosteriorSummary s;
    const auto& first = ch.samples.front();
    s.theta_mean = Vector::Zero(first.theta.size());
    s.beta_mean = Vector::Zero(first.beta.size());
    for (const auto& p : ch.samples) {
        s.theta_mean += p.theta;
        s.beta_mean += p.beta;
        s.sigma2_mean += p.sigma2;
        s.sigma_theta2_mean += p.sigma_theta2;
    }
    s.theta_mean /= m;
    s.beta_mean /= m;
    s.sigma2_mean /= m;
    s.sigma_theta2_mean /= m;
    s.theta_sd = Vector::Zero(first.theta.size());
    s.beta_sd = Vector::Zero(first.beta.size());
    for (const auto& p : ch.samples) {
        s.theta_sd += (p.theta - s.theta_mean).cwiseAbs2();
        s.beta_sd += (p.beta - s.beta_mean).cwiseAbs2();
        s.sigma2_sd += (p.sigma2 - s.sigma2_mean) * (p.sigma2 - s.sigma2_mean);
        s.sigma_theta2_sd += (p.sigma_theta2 - s.sigma_theta2_mean) * (p.sigma_theta2 - s.sigma_theta2_mean);
    }
    const double denom = std::max(1.0, m - 1.0);
    s.theta_sd = (s.theta_sd / denom).cwiseSqrt();
    s.beta_sd = (s.beta_sd / denom).cwiseSqrt();
    s.sigma2_sd = std::sqrt(s.sigma2_sd / denom);
    s.sigma_theta2_sd = std::sqrt(s.sigma_theta2_sd / denom);
    s.positions = posterior_positions(ch);
    return s;
}

/**
 * Gelman-Rubin potential scale reduction for one scalar across chains of equal length.
 */
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m < 2 || chains[0].size() < 2) return 1.0;
    const double len = static_cast<double>(chains[0].size());
    std::vector<double> means(m), vars(m);
    for (std::size_t k = 0; k < m; ++k) {
        double mu = 0;
        for (double x : chains[k]) mu += x;
        mu /= len;
        double var = 0;
        for (double x : chains[k]) var += (x - mu) * (x - mu);
        means[k] = mu;
        vars[k] = var / (len - 1.0);
    }
    double grand = 0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double between = 0, within = 0;
    for (std::size_t k = 0; k < m; ++k) {
        between += (means[k] - grand) * (means[k] - grand);
        within += vars[k];
    }
    between *= len / static_cast<double>(m - 1);
    within /= static_cast<double>(m);
    if (!(within > 0)) return 1.0;
    const double pooled = (len - 1.0) / len * within + between / len;
    return std::sqrt(pooled / within);
}

struct MultiChainResult {
    std::vector<LsirmChain> chains;
    LsirmChain pooled;  ///< All samples, re-aligned to the overall MAP sample.
    double max_rhat = 1.0; ///< Over theta, beta, sigma2 and sigma_theta2.
};

/**
 * Independent chains with seeds derived from `c.seed`; may run concurrently.
 */
inline MultiChainResult run_chains(const Matrix& x, const LsirmHyper& h, const McmcConfig& c, int n_chains, int threads = 1) {
    if (n_chains < 1) {
        throw Error(ErrorCode::InvalidConfig, "need at least one chain");
    }
    MultiChainResult out;
    out.chains.resize(static_cast<std::size_t>(n_chains));
    parallel_for(static_cast<std::size_t>(n_chains), threads, [&](std::size_t k) {
        McmcConfig ck = c;
        ck.seed = n_chains == 1 ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(k));
        out.chains[k] = run_mcmc(x, h, ck);
    });
    if (n_chains == 1) {
        out.pooled = out.chains.front();
        return out;
    }

    std::size_t best_chain = 0;
    for (std::size_t k = 1; k < out.chains.size(); ++k) {
        const auto& ck = out.chains[k];
        const auto& cb = out.chains[best_chain];
        if (ck.log_posterior[ck.reference] > cb.log_posterior[cb.reference]) best_chain = k;
    }
    const Matrix ref = out.chains[best_chain].samples[out.chains[best_chain].reference].u;
    out.pooled.acceptance = {0, 0, 0, 0, 0, 0};
    for (const auto& ch : out.chains) {
        for (std::size_t s = 0; s < ch.samples.size(); ++s) {
            auto smp = ch.samples[s];
            auto al = procrustes_align(smp.u, smp.v, ref);
            smp.u = std::move(al.u);
            smp.v = std::move(al.v);
            out.pooled.degenerate_alignments += al.degenerate;
            out.pooled.samples.push_back(std::move(smp));
            out.pooled.log_posterior.push_back(ch.log_posterior[s]);
        }
        const double w = 1.0 / static_cast<double>(n_chains);
        out.pooled.acceptance.beta += w * ch.acceptance.beta;
        out.pooled.acceptance.theta += w * ch.acceptance.theta;
        out.pooled.acceptance.u += w * ch.acceptance.u;
        out.pooled.acceptance.v += w * ch.acceptance.v;
        out.pooled.acceptance.sigma2 += w * ch.acceptance.sigma2;
        out.pooled.acceptance.sigma_theta2 += w * ch.acceptance.sigma_theta2;
    }
    out.pooled.reference = best_chain * out.chains.front().samples.size() + out.chains[best_chain].reference;

    auto scalar_rhat = [&](auto&& get) {
        std::vector<std::vector<double>> traces;
        for (const auto& ch : out.chains) {
            std::vector<double> t;
            for (const auto& smp : ch.samples) t.push_back(get(smp));
            traces.push_back(std::move(t));
        }
        return gelman_rubin(traces);
    };
    const auto& first = out.chains.front().samples.front();
    out.max_rhat = std::max(scalar_rhat([](const LsirmParams& p) { return p.sigma2; }), scalar_rhat([](const LsirmParams& p) { return p.sigma_theta2; }));
    for (Eigen::Index j = 0; j < first.theta.size(); ++j) out.max_rhat = std::max(out.max_rhat, scalar_rhat([j](const LsirmParams& p) { return p.theta[j]; }));
    for (Eigen::Index i = 0; i < first.beta.size(); ++i) out.max_rhat = std::max(out.max_rhat, scalar_rhat([i](const LsirmParams& p) { return p.beta[i]; }));
    return out;
}

}

#endif
