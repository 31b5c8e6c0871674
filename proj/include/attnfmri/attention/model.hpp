#ifndef ATTNFMRI_ATTENTION_MODEL_HPP
#define ATTNFMRI_ATTENTION_MODEL_HPP

#include "../core.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace attnfmri::attention {

/**
 * Hyperparameters of the multi-head self-attention classifier.
 *
 * The defaults are desk-scale. `large_scale()` gives 128 heads, dropout 0.9,
 * learning rate 0.01, batch size 8 and 10 folds.
 */
struct AttnConfig {
    int n_heads = 8;
    int d_k = 4;
    int d_v = 4;
    double dropout_rate = 0.1; ///< Drop probability.
    double lr = 0.01;
    int batch_size = 8;
    int epochs = 200;
    int folds = 10;
    std::uint64_t seed = 7;

    static AttnConfig large_scale() {
        AttnConfig c;
        c.n_heads = 128;
        c.dropout_rate = 0.9;
        c.lr = 0.01;
        c.batch_size = 8;
        c.folds = 10;
        return c;
    }
};

inline void validate_config(const AttnConfig& c) {
    if (c.n_heads < 1 || c.d_k < 1 || c.d_v < 1) throw Error(ErrorCode::InvalidParams, "heads, d_k and d_v must be positive");
    if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw Error(ErrorCode::InvalidParams, "dropout_rate must be in [0, 1)");
    if (!(c.lr > 0.0)) throw Error(ErrorCode::InvalidParams, "lr must be positive");
    if (c.batch_size < 1 || c.epochs < 1 || c.folds < 2) throw Error(ErrorCode::InvalidParams, "batch_size and epochs must be >= 1 and folds >= 2");
}

/**
 * All parameters live in one flat vector; the accessors return column-major
 * views into it. Head h of the query projection is columns
 * [h d_k, (h+1) d_k) of `wq()`, and likewise for keys and values.
 */
class AttnModel {
public:
    using Map = Eigen::Map<Matrix>;
    using ConstMap = Eigen::Map<const Matrix>;

    AttnModel() = default;

    AttnModel(int d_model, int n_heads, int d_k, int d_v)
        : d_model_(d_model), heads_(n_heads), d_k_(d_k), d_v_(d_v) {
        params_ = Vector::Zero(total_size());
    }

    int d_model() const { return d_model_; }
    int n_heads() const { return heads_; }
    int d_k() const { return d_k_; }
    int d_v() const { return d_v_; }

    Eigen::Index total_size() const {
        const Eigen::Index dm = d_model_, hk = heads_ * d_k_, hv = heads_ * d_v_;
        return 2 * dm * hk + dm * hv + hv * dm + dm * 2 + 2;
    }

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    Map wq() { return view(off_wq(), d_model_, heads_ * d_k_); }
    Map wk() { return view(off_wk(), d_model_, heads_ * d_k_); }
    Map wv() { return view(off_wv(), d_model_, heads_ * d_v_); }
    Map wo() { return view(off_wo(), heads_ * d_v_, d_model_); }
    Map wc() { return view(off_wc(), d_model_, 2); }
    Map bc() { return view(off_bc(), 2, 1); }

    ConstMap wq() const { return cview(off_wq(), d_model_, heads_ * d_k_); }
    ConstMap wk() const { return cview(off_wk(), d_model_, heads_ * d_k_); }
    ConstMap wv() const { return cview(off_wv(), d_model_, heads_ * d_v_); }
    ConstMap wo() const { return cview(off_wo(), heads_ * d_v_, d_model_); }
    ConstMap wc() const { return cview(off_wc(), d_model_, 2); }
    ConstMap bc() const { return cview(off_bc(), 2, 1); }

    /// Same shape, all zeros.
    AttnModel zeros_like() const { return AttnModel(d_model_, heads_, d_k_, d_v_); }

    bool operator==(const AttnModel& o) const {
        return d_model_ == o.d_model_ && heads_ == o.heads_ && d_k_ == o.d_k_ && d_v_ == o.d_v_ && params_ == o.params_;
    }

private:
    Eigen::Index off_wq() const { return 0; }
    Eigen::Index off_wk() const { return off_wq() + Eigen::Index{d_model_} * heads_ * d_k_; }
    Eigen::Index off_wv() const { return off_wk() + Eigen::Index{d_model_} * heads_ * d_k_; }
    Eigen::Index off_wo() const { return off_wv() + Eigen::Index{d_model_} * heads_ * d_v_; }
    Eigen::Index off_wc() const { return off_wo() + Eigen::Index{heads_} * d_v_ * d_model_; }
    Eigen::Index off_bc() const { return off_wc() + Eigen::Index{d_model_} * 2; }

    Map view(Eigen::Index off, Eigen::Index r, Eigen::Index c) { return Map(params_.data() + off, r, c); }
    ConstMap cview(Eigen::Index off, Eigen::Index r, Eigen::Index c) const { return ConstMap(params_.data() + off, r, c); }

    int d_model_ = 0, heads_ = 0, d_k_ = 0, d_v_ = 0;
    Vector params_;
};

/**
 * Each weight matrix (and the bias) is drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
 */
inline AttnModel init_model(int d_model, const AttnConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    AttnModel m(d_model, cfg.n_heads, cfg.d_k, cfg.d_v);
    Rng rng(seed);
    auto fill = [&](auto&& mat, double fan_in) {
        const double bound = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index j = 0; j < mat.cols(); ++j) {
            for (Eigen::Index i = 0; i < mat.rows(); ++i) {
                mat(i, j) = u(rng);
            }
        }
    };
    fill(m.wq(), d_model);
    fill(m.wk(), d_model);
    fill(m.wv(), d_model);
    fill(m.wo(), cfg.n_heads * cfg.d_v);
    fill(m.wc(), d_model);
    fill(m.bc(), d_model);
    return m;
}

}

#endif
