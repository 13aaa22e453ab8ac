#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "adbs/boundary.hpp"
#include "adbs/classifier.hpp"
#include "adbs/data.hpp"
#include "adbs/embedding.hpp"
#include "adbs/error.hpp"
#include "adbs/metrics.hpp"
#include "adbs/rng.hpp"
#include "adbs/train_config.hpp"

namespace adbs {

// Everything needed to evaluate a session or resume the run after it.
struct SessionCheckpoint {
    ClassifierState classifier;
    FeatureExtractor extractor;
    int session_index = 0;
    std::string rng_state;  // batching generator, as written by save_rng

    bool operator==(const SessionCheckpoint&) const = default;
};

inline std::vector<LabeledFeature> extract_all(const FeatureExtractor& extractor, std::span<const Example> xs) {
    std::vector<LabeledFeature> out;
    out.reserve(xs.size());
    for (const auto& e : xs) out.push_back({extractor.extract(e.raw), e.label});
    return out;
}

namespace detail {

// Class index -> features, for classes [first, first + count).
inline std::vector<std::vector<FeatureVector>> group_by_class(std::span<const LabeledFeature> xs, std::size_t first,
                                                              std::size_t count) {
    std::vector<std::vector<FeatureVector>> groups(count);
    for (const auto& x : xs) {
        if (x.label < first || x.label >= first + count) {
            throw ProtocolError("label " + std::to_string(x.label) + " outside classes [" + std::to_string(first) +
                                ", " + std::to_string(first + count) + ")");
        }
        groups[x.label - first].push_back(x.feature);
    }
    for (std::size_t c = 0; c < count; ++c) {
        if (groups[c].empty()) throw ArityError("class " + std::to_string(first + c) + " has no samples");
    }
    return groups;
}

inline Matrix normalized_prototypes(std::span<const LabeledFeature> xs, std::size_t num_classes) {
    Matrix p;
    for (const auto& g : group_by_class(xs, 0, num_classes)) p.append_col(normalized(prototype(g).span()));
    return p;
}

inline void require_finite(double loss, const char* phase, int epoch, std::size_t batch_start) {
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << phase << ": non-finite loss at epoch " << epoch << ", batch starting at sample " << batch_start;
        throw DivergenceError(msg.str());
    }
}

}  // namespace detail

// Base session. W starts at the normalized class means and M at ones; then
// base_epochs of mini-batch SGD on mean CE + alpha * IC over W, M and the
// trainable extractor (if any). The extractor is frozen on return.
inline SessionCheckpoint train_base(const FscilStream& stream, const TrainConfig& cfg, FeatureExtractor extractor,
                                    std::mt19937_64& rng) {
    cfg.validate();
    if (stream.base_train.empty() || stream.base_class_count == 0) {
        throw ProtocolError("train_base: empty base session");
    }
    if (extractor.input_dim() != stream.feature_dim) {
        throw ShapeError("train_base: extractor expects dimension " + std::to_string(extractor.input_dim()) +
                         ", stream has " + std::to_string(stream.feature_dim));
    }
    const std::size_t C = stream.base_class_count;
    std::vector<LabeledFeature> features = extract_all(extractor, stream.base_train);

    ClassifierState state;
    state.weights = detail::normalized_prototypes(features, C);
    state.boundaries = init_base(C, cfg.clamp_floor);
    state.session_of.assign(C, 0);

    const std::size_t d = state.dim();
    const bool learn_m = cfg.learns_boundaries();
    const double alpha = cfg.effective_alpha();
    const bool train_extractor = extractor.trainable();

    Matrix vel_w(d, C);
    Vector vel_m(C, 0.0);
    Matrix vel_p = train_extractor ? Matrix(extractor.output_dim(), extractor.input_dim()) : Matrix{};
    Matrix ic_prototypes = alpha != 0.0 ? state.weights : Matrix{};

    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.base_epochs; ++epoch) {
        if (train_extractor && epoch > 0) {
            features = extract_all(extractor, stream.base_train);
            if (alpha != 0.0) ic_prototypes = detail::normalized_prototypes(features, C);
        }
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double inv_n = 1.0 / static_cast<double>(stop - start);
            Matrix grad_w(d, C);
            Vector grad_m(C, 0.0);
            Matrix grad_p = train_extractor ? Matrix(extractor.output_dim(), extractor.input_dim()) : Matrix{};
            double loss = 0.0;

            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t idx = order[k];
                const auto& ex = train_extractor ? LabeledFeature{extractor.extract(stream.base_train[idx].raw),
                                                                  stream.base_train[idx].label}
                                                 : features[idx];
                const auto g = cross_entropy_grads(state, ex.feature, ex.label, cfg.temperature);
                loss += g.loss * inv_n;
                auto gw = grad_w.raw();
                const auto dw = g.d_weights.raw();
                for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dw[i] * inv_n;
                for (std::size_t c = 0; c < C; ++c) grad_m[c] += g.d_boundaries[c] * inv_n;
                if (train_extractor) {
                    // f = P x, so dL/dP = dL/df x^T.
                    const auto& x = stream.base_train[idx].raw;
                    for (std::size_t col = 0; col < x.size(); ++col) {
                        auto gp = grad_p.col(col);
                        for (std::size_t r = 0; r < gp.size(); ++r) gp[r] += g.d_feature[r] * x[col] * inv_n;
                    }
                }
            }
            if (alpha != 0.0) {
                const auto ic = ic_grads(state.boundaries.m, ic_prototypes, state.weights);
                loss += alpha * ic.loss;
                auto gw = grad_w.raw();
                const auto dw = ic.d_weights.raw();
                for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += alpha * dw[i];
                for (std::size_t c = 0; c < C; ++c) grad_m[c] += alpha * ic.d_boundaries[c];
            }
            detail::require_finite(loss, "train_base", epoch, start);

            auto w = state.weights.raw();
            auto vw = vel_w.raw();
            const auto gw = grad_w.raw();
            for (std::size_t i = 0; i < w.size(); ++i) {
                vw[i] = cfg.momentum * vw[i] + gw[i];
                w[i] -= cfg.base_lr * vw[i];
            }
            for (std::size_t c = 0; c < C; ++c) {
                const Vector unit = normalized(state.weights.col(c));
                std::copy(unit.begin(), unit.end(), state.weights.col(c).begin());
            }
            if (learn_m) {
                for (std::size_t c = 0; c < C; ++c) {
                    vel_m[c] = cfg.momentum * vel_m[c] + grad_m[c];
                    state.boundaries.m[c] =
                        std::max(state.boundaries.clamp_floor, state.boundaries.m[c] - cfg.base_lr * vel_m[c]);
                }
            }
            if (train_extractor) {
                auto p = extractor.mutable_projection().raw();
                auto vp = vel_p.raw();
                const auto gp = grad_p.raw();
                for (std::size_t i = 0; i < p.size(); ++i) {
                    vp[i] = cfg.momentum * vp[i] + gp[i];
                    p[i] -= cfg.base_lr * vp[i];
                }
            }
        }
    }
    extractor.freeze();
    return {std::move(state), std::move(extractor), 0, save_rng(rng)};
}

// One incremental session: prototypes of the new classes are appended to
// W, boundaries are expanded with the mean of the old ones (old entries
// frozen) and the new entries are fine-tuned. fixed_baseline appends ones
// and skips fine-tuning.
inline SessionCheckpoint run_incremental_session(SessionCheckpoint ckpt, std::span<const Example> session_train,
                                                 const TrainConfig& cfg) {
    cfg.validate();
    if (session_train.empty()) throw ArityError("run_incremental_session: no training data");
    const std::size_t first = ckpt.classifier.num_classes();
    ckpt.classifier.require_aligned();

    std::size_t max_label = 0;
    for (const auto& e : session_train) {
        if (e.label < first) {
            throw ProtocolError("run_incremental_session: label " + std::to_string(e.label) +
                                " collides with an existing class");
        }
        max_label = std::max(max_label, e.label);
    }
    const std::size_t n_new = max_label - first + 1;
    const auto features = extract_all(ckpt.extractor, session_train);
    const auto groups = detail::group_by_class(features, first, n_new);

    std::vector<FeatureVector> protos;
    protos.reserve(n_new);
    for (const auto& g : groups) protos.push_back(prototype(g));

    const int session = ckpt.session_index + 1;
    BoundaryVector b = std::move(ckpt.classifier.boundaries);
    ckpt.classifier = expand(std::move(ckpt.classifier), protos, session);

    // Each session shuffles with its own generator seeded from the carried
    // one, so the carried state advances the same way in every ablation arm.
    std::mt19937_64 rng = load_rng(ckpt.rng_state);
    std::mt19937_64 session_rng(rng());
    if (cfg.learns_boundaries()) {
        b = expand_mean_init(std::move(b), n_new);
        b = finetune_boundaries(ckpt.classifier, std::move(b), features, cfg, session_rng);
    } else {
        std::fill(b.frozen.begin(), b.frozen.end(), std::uint8_t{1});
        b.m.insert(b.m.end(), n_new, 1.0);
        b.frozen.insert(b.frozen.end(), n_new, std::uint8_t{0});
    }
    ckpt.classifier.boundaries = std::move(b);
    ckpt.session_index = session;
    ckpt.rng_state = save_rng(rng);
    return ckpt;
}

// Top-1 accuracy over every class seen so far, plus separation degree and
// similarity matrix of the classifier columns.
inline SessionReport evaluate(const SessionCheckpoint& ckpt, std::span<const Example> cumulative_test) {
    if (cumulative_test.empty()) throw ProtocolError("evaluate: empty test set");
    const auto& state = ckpt.classifier;
    state.require_aligned();
    std::vector<std::size_t> predictions, labels;
    predictions.reserve(cumulative_test.size());
    labels.reserve(cumulative_test.size());
    for (const auto& e : cumulative_test) {
        if (e.label >= state.num_classes()) {
            throw ProtocolError("evaluate: test label " + std::to_string(e.label) + " has not been learned");
        }
        predictions.push_back(predict(state, ckpt.extractor.extract(e.raw)));
        labels.push_back(e.label);
    }
    SessionReport r;
    r.session_index = static_cast<std::size_t>(ckpt.session_index);
    r.top1_accuracy = top1_accuracy(predictions, labels);
    r.num_test = cumulative_test.size();
    r.similarity_matrix = similarity_matrix(state.weights);
    r.d_cs = separation_degree(state.weights);
    return r;
}

struct RunResult {
    std::vector<SessionReport> reports;
    std::vector<SessionCheckpoint> checkpoints;  // one per session, in order
};

// Continues a run from `ckpt` through the remaining sessions of `stream`.
inline RunResult resume(SessionCheckpoint ckpt, const FscilStream& stream, const TrainConfig& cfg) {
    RunResult out;
    for (std::size_t t = static_cast<std::size_t>(ckpt.session_index) + 1; t < stream.num_sessions(); ++t) {
        ckpt = run_incremental_session(std::move(ckpt), stream.increments[t - 1].train, cfg);
        const auto test = stream.cumulative_test(t);
        out.reports.push_back(evaluate(ckpt, test));
        out.checkpoints.push_back(ckpt);
    }
    return out;
}

// Base training followed by every incremental session, evaluated after each.
inline RunResult run_full(const FscilStream& stream, const TrainConfig& cfg, FeatureExtractor extractor) {
    check_stream(stream);
    std::mt19937_64 rng(substream_seed(cfg.seed, "batching"));
    SessionCheckpoint ckpt = train_base(stream, cfg, std::move(extractor), rng);
    RunResult out;
    out.reports.push_back(evaluate(ckpt, stream.base_test));
    out.checkpoints.push_back(ckpt);
    RunResult rest = resume(std::move(ckpt), stream, cfg);
    std::move(rest.reports.begin(), rest.reports.end(), std::back_inserter(out.reports));
    std::move(rest.checkpoints.begin(), rest.checkpoints.end(), std::back_inserter(out.checkpoints));
    return out;
}

}  // namespace adbs
