#ifndef ATTNFMRI_ATTENTION_ENGINE_HPP
#define ATTNFMRI_ATTENTION_ENGINE_HPP

#include "../core.hpp"
#include "../data_model.hpp"
#include "model.hpp"

#include <cmath>
#include <random>
#include <utility>
#include <vector>

/**
 * @file engine.hpp
 *
 * @brief Forward pass and hand-written reverse-mode gradients of the
 * single-layer multi-head self-attention classifier.
 *
 * Tokens are the rows of the adjacency matrix X (R x R, so d_model = R) and
 * queries, keys and values all come from X:
 *
 *     head_h = softmax(X Wq_h (X Wk_h)^T / sqrt(d_k)) X Wv_h
 *     M      = [head_1 ... head_H] Wo
 *     p      = mean over rows of dropout(M)
 *     logits = Wc^T p + bc
 *
 * The attention distribution matrix is the mean over heads of the softmax
 * weights.
 */

namespace attnfmri::attention {

/**
 * Row-wise softmax with the row maximum subtracted first.
 */
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - mx).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

struct HeadOutput {
    Matrix out;  ///< R x d_v.
    Matrix attn; ///< R x R, row-stochastic.
};

/**
 * Scaled dot-product attention for one head.
 */
inline HeadOutput attention_head(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols() != k.cols() || q.rows() != k.rows() || k.rows() != v.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "Q, K and V shapes do not agree");
    }
    HeadOutput h;
    h.attn = softmax_rows(q * k.transpose() / std::sqrt(static_cast<double>(q.cols())));
    h.out = h.attn * v;
    return h;
}

enum class Mode { train, eval };

/**
 * Intermediate values of one forward pass, kept for the backward pass.
 */
struct ForwardCache {
    Matrix x, q, k, v;
    std::vector<Matrix> attn;
    Matrix concat;   ///< R x (H d_v).
    Matrix mixed;    ///< R x d_model, before dropout.
    Matrix mask;     ///< Scaled keep mask, empty in eval mode.
    Vector pooled;   ///< d_model.
    Vector logits;   ///< 2.
    Matrix attn_mean;
};

/**
 * Inverted-dropout mask with entries 0 or 1 / (1 - rate).
 */
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            mask(i, j) = keep(rng) ? scale : 0.0;
        }
    }
    return mask;
}

/**
 * @param rng Only used in train mode with a positive dropout rate.
 */
inline ForwardCache forward_cached(const AttnModel& m, const Matrix& x, double dropout_rate, Mode mode, Rng* rng) {
    if (x.rows() != m.d_model() || x.cols() != m.d_model()) {
        throw Error(ErrorCode::DimensionMismatch, "input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " but the model expects " +
                                                      std::to_string(m.d_model()) + "x" + std::to_string(m.d_model()));
    }
    const int heads = m.n_heads(), dk = m.d_k(), dv = m.d_v();
    const Eigen::Index r = x.rows();

    ForwardCache c;
    c.x = x;
    c.q = x * m.wq();
    c.k = x * m.wk();
    c.v = x * m.wv();
    c.concat.resize(r, heads * dv);
    c.attn.reserve(static_cast<std::size_t>(heads));
    c.attn_mean = Matrix::Zero(r, r);
    for (int h = 0; h < heads; ++h) {
        auto head = attention_head(c.q.middleCols(h * dk, dk), c.k.middleCols(h * dk, dk), c.v.middleCols(h * dv, dv));
        c.concat.middleCols(h * dv, dv) = head.out;
        c.attn_mean += head.attn;
        c.attn.push_back(std::move(head.attn));
    }
    c.attn_mean /= static_cast<double>(heads);
    c.mixed = c.concat * m.wo();

    if (mode == Mode::train && dropout_rate > 0.0) {
        if (rng == nullptr) {
            throw Error(ErrorCode::InvalidParams, "train-mode dropout needs a random engine");
        }
        c.mask = dropout_mask(r, m.d_model(), dropout_rate, *rng);
        c.pooled = c.mixed.cwiseProduct(c.mask).colwise().mean().transpose();
    } else {
        c.pooled = c.mixed.colwise().mean().transpose();
    }
    c.logits = m.wc().transpose() * c.pooled + Vector(m.bc());
    return c;
}

struct ForwardResult {
    Vector logits;
    Matrix attn_mean;
};

/**
 * Forward pass. In eval mode the result is deterministic; in train mode the
 * dropout mask is drawn from `seed`.
 */
inline ForwardResult forward(const AttnModel& m, const FcnAdjacency& x, double dropout_rate, Mode mode, std::uint64_t seed = 0) {
    Rng rng(seed);
    auto c = forward_cached(m, x.values, dropout_rate, mode, &rng);
    return {std::move(c.logits), std::move(c.attn_mean)};
}

/**
 * Softmax cross-entropy of two logits against a 0/1 label.
 */
inline double cross_entropy(const Vector& logits, int label) {
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return lse - logits[label];
}

/**
 * Accumulate `scale` x d(loss)/d(params) for one cached forward pass into `grad`.
 */
inline void backward(const AttnModel& m, const ForwardCache& c, int label, double scale, AttnModel& grad) {
    const int heads = m.n_heads(), dk = m.d_k(), dv = m.d_v();
    const Eigen::Index r = c.x.rows();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Vector dz = (c.logits.array() - c.logits.maxCoeff()).exp().matrix();
    dz /= dz.sum();
    dz[label] -= 1.0;
    dz *= scale;

    grad.wc() += c.pooled * dz.transpose();
    grad.bc() += dz;
    const Vector dpooled = m.wc() * dz;

    Matrix dmixed = (dpooled / static_cast<double>(r)).transpose().replicate(r, 1);
    if (c.mask.size()) {
        dmixed = dmixed.cwiseProduct(c.mask);
    }

    grad.wo() += c.concat.transpose() * dmixed;
    const Matrix dconcat = dmixed * m.wo().transpose();

    Matrix dq(r, heads * dk), dk_all(r, heads * dk), dv_all(r, heads * dv);
    for (int h = 0; h < heads; ++h) {
        const Matrix& a = c.attn[static_cast<std::size_t>(h)];
        const auto dout = dconcat.middleCols(h * dv, dv);
        const Matrix da = dout * c.v.middleCols(h * dv, dv).transpose();
        dv_all.middleCols(h * dv, dv) = a.transpose() * dout;

        // softmax backward, row by row: dS = A o (dA - rowsum(dA o A))
        const Vector inner = da.cwiseProduct(a).rowwise().sum();
        const Matrix ds = a.cwiseProduct(da.colwise() - inner) * inv_sqrt_dk;
        dq.middleCols(h * dk, dk) = ds * c.k.middleCols(h * dk, dk);
        dk_all.middleCols(h * dk, dk) = ds.transpose() * c.q.middleCols(h * dk, dk);
    }
    grad.wq() += c.x.transpose() * dq;
    grad.wk() += c.x.transpose() * dk_all;
    grad.wv() += c.x.transpose() * dv_all;
}

struct Example {
    FcnAdjacency x;
    int label = 0;
};

struct LossGrad {
    double loss = 0.0;
    AttnModel grad;
};

/**
 * Mean cross-entropy over the batch and its exact gradient. Dropout masks
 * are drawn in batch order from `seed`, so the same seed reproduces the same
 * stochastic forward pass.
 */
inline LossGrad loss_and_grad(const AttnModel& m, const std::vector<const Example*>& batch, double dropout_rate, std::uint64_t seed) {
    if (batch.empty()) {
        throw Error(ErrorCode::InvalidParams, "empty batch");
    }
    Rng rng(seed);
    LossGrad out{0.0, m.zeros_like()};
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Example* ex : batch) {
        auto c = forward_cached(m, ex->x.values, dropout_rate, Mode::train, &rng);
        out.loss += cross_entropy(c.logits, ex->label) * scale;
        backward(m, c, ex->label, scale, out.grad);
    }
    return out;
}

inline LossGrad loss_and_grad(const AttnModel& m, const std::vector<Example>& batch, double dropout_rate, std::uint64_t seed) {
    std::vector<const Example*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& e : batch) ptrs.push_back(&e);
    return loss_and_grad(m, ptrs, dropout_rate, seed);
}

/**
 * Eval-mode probability of label 1.
 */
inline double predict_probability(const AttnModel& m, const Matrix& x) {
    auto c = forward_cached(m, x, 0.0, Mode::eval, nullptr);
    const double d = c.logits[1] - c.logits[0];
    return 1.0 / (1.0 + std::exp(-d));
}

}

#endif
