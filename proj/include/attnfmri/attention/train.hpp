#ifndef ATTNFMRI_ATTENTION_TRAIN_HPP
#define ATTNFMRI_ATTENTION_TRAIN_HPP

#include "../core.hpp"
#include "../data_model.hpp"
#include "../parallel.hpp"
#include "engine.hpp"
#include "model.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace attnfmri::attention {

/**
 * Adam with bias correction.
 */
class Adam {
public:
    Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

    void step(Vector& params, const Vector& grad) {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    Vector m_, v_;
};

struct TrainResult {
    AttnModel model;
    std::vector<double> epoch_loss; ///< Mean training loss per epoch (dropout active).
};

inline void require_both_labels(const std::vector<Example>& data) {
    bool has0 = false, has1 = false;
    for (const auto& e : data) {
        if (e.label != 0 && e.label != 1) {
            throw Error(ErrorCode::InvalidParams, "labels must be 0 or 1");
        }
        (e.label ? has1 : has0) = true;
    }
    if (!has0 || !has1) {
        throw Error(ErrorCode::SingleClassDataset, "training data must contain both labels");
    }
}

/**
 * Mini-batch Adam on the mean cross-entropy. Batches are reshuffled every
 * epoch and all randomness derives from `cfg.seed`.
 */
inline TrainResult train(const std::vector<Example>& data, const AttnConfig& cfg) {
    validate_config(cfg);
    require_both_labels(data);
    const int d_model = static_cast<int>(data.front().x.size());
    for (const auto& e : data) {
        if (e.x.size() != d_model) {
            throw Error(ErrorCode::DimensionMismatch, "all adjacency matrices must share one size");
        }
    }

    TrainResult out{init_model(d_model, cfg, derive_seed(cfg.seed, "init")), {}};
    Adam adam(out.model.total_size(), cfg.lr);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    const std::uint64_t dropout_seed = derive_seed(cfg.seed, "dropout");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const Example*> batch;
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
            auto lg = loss_and_grad(out.model, batch, cfg.dropout_rate, derive_seed(dropout_seed, step++));
            adam.step(out.model.params(), lg.grad.params());
            total += lg.loss * static_cast<double>(batch.size());
        }
        out.epoch_loss.push_back(total / static_cast<double>(data.size()));
    }
    return out;
}

inline double accuracy(const AttnModel& m, const std::vector<Example>& data) {
    if (data.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& e : data) {
        const int pred = predict_probability(m, e.x.values) >= 0.5 ? 1 : 0;
        correct += pred == e.label;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct Confusion {
    int true_positive = 0;
    int true_negative = 0;
    int false_positive = 0;
    int false_negative = 0;
};

struct CvReport {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
    Confusion confusion;
    std::vector<int> fold_of;              ///< Validation fold of each example.
    std::vector<double> probability;       ///< Held-out P(label = 1) of each example.
    std::vector<std::string> subject_ids;

    bool operator==(const CvReport& o) const {
        return fold_accuracy == o.fold_accuracy && mean_accuracy == o.mean_accuracy && fold_of == o.fold_of && probability == o.probability;
    }
};

/**
 * Stratified assignment: each class is shuffled and dealt round-robin into folds.
 */
inline std::vector<int> stratified_folds(const std::vector<Example>& data, int folds, std::uint64_t seed) {
    std::vector<int> fold_of(data.size(), -1);
    Rng rng(seed);
    for (int label = 0; label < 2; ++label) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data[i].label == label) idx.push_back(i);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            fold_of[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
        }
    }
    return fold_of;
}

/**
 * Stratified k-fold cross-validation. Folds are independent and may run on
 * several threads without changing the result.
 */
inline CvReport cross_validate(const std::vector<Example>& data, const AttnConfig& cfg, int threads = 1) {
    validate_config(cfg);
    require_both_labels(data);
    int counts[2] = {0, 0};
    for (const auto& e : data) ++counts[e.label];
    if (counts[0] < cfg.folds || counts[1] < cfg.folds) {
        throw Error(ErrorCode::TooFewSubjects, "each class needs at least " + std::to_string(cfg.folds) + " subjects (have " + std::to_string(counts[0]) +
                                                   " and " + std::to_string(counts[1]) + ")");
    }

    CvReport rep;
    rep.fold_of = stratified_folds(data, cfg.folds, derive_seed(cfg.seed, "folds"));
    rep.probability.assign(data.size(), 0.0);
    rep.fold_accuracy.assign(static_cast<std::size_t>(cfg.folds), 0.0);
    for (const auto& e : data) rep.subject_ids.push_back(e.x.subject_id);

    parallel_for(static_cast<std::size_t>(cfg.folds), threads, [&](std::size_t fold) {
        std::vector<Example> train_set;
        std::vector<std::size_t> held;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (rep.fold_of[i] == static_cast<int>(fold)) held.push_back(i);
            else train_set.push_back(data[i]);
        }
        AttnConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(fold));
        auto model = train(train_set, fold_cfg).model;
        std::size_t correct = 0;
        for (auto i : held) {
            rep.probability[i] = predict_probability(model, data[i].x.values);
            correct += (rep.probability[i] >= 0.5 ? 1 : 0) == data[i].label;
        }
        rep.fold_accuracy[fold] = held.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(held.size());
    });

    for (std::size_t i = 0; i < data.size(); ++i) {
        const bool pred = rep.probability[i] >= 0.5;
        const bool truth = data[i].label == 1;
        if (pred && truth) ++rep.confusion.true_positive;
        else if (!pred && !truth) ++rep.confusion.true_negative;
        else if (pred) ++rep.confusion.false_positive;
        else ++rep.confusion.false_negative;
    }
    rep.mean_accuracy = std::accumulate(rep.fold_accuracy.begin(), rep.fold_accuracy.end(), 0.0) / cfg.folds;
    return rep;
}

/**
 * Eval-mode mean-over-heads attention for one subject.
 */
struct AttentionMatrix {
    std::string subject_id;
    Matrix values;
};

inline constexpr double attention_row_tolerance = 1e-6;

inline bool is_row_stochastic(const Matrix& a, double tol = attention_row_tolerance) {
    if ((a.array() < 0.0).any()) return false;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (std::abs(a.row(i).sum() - 1.0) > tol) return false;
    }
    return true;
}

inline AttentionMatrix extract_attention(const AttnModel& m, const FcnAdjacency& x) {
    auto c = forward_cached(m, x.values, 0.0, Mode::eval, nullptr);
    if (!is_row_stochastic(c.attn_mean)) {
        throw Error(ErrorCode::NonFiniteValue, "attention matrix for '" + x.subject_id + "' is not row-stochastic");
    }
    return {x.subject_id, std::move(c.attn_mean)};
}

inline nlohmann::json attention_to_json(const AttentionMatrix& a) {
    return {{"subject_id", a.subject_id}, {"rows", matrix_rows_json(a.values)}};
}

inline AttentionMatrix attention_from_json(const nlohmann::json& j) {
    try {
        AttentionMatrix a{j.at("subject_id").get<std::string>(), matrix_from_rows_json(j.at("rows"))};
        if (a.values.rows() != a.values.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "attention matrix must be square");
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, std::string("attention JSON: ") + e.what());
    }
}

inline nlohmann::json cv_report_to_json(const CvReport& r) {
    nlohmann::json subjects = nlohmann::json::array();
    for (std::size_t i = 0; i < r.probability.size(); ++i) {
        subjects.push_back({{"subject_id", i < r.subject_ids.size() ? r.subject_ids[i] : ""}, {"fold", r.fold_of[i]}, {"probability", r.probability[i]}});
    }
    return {{"fold_accuracy", r.fold_accuracy},
            {"mean_accuracy", r.mean_accuracy},
            {"confusion",
             {{"true_positive", r.confusion.true_positive},
              {"true_negative", r.confusion.true_negative},
              {"false_positive", r.confusion.false_positive},
              {"false_negative", r.confusion.false_negative}}},
            {"subjects", subjects}};
}

}

#endif
