#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "adbs/boundary_vector.hpp"
#include "adbs/embedding.hpp"
#include "adbs/error.hpp"
#include "adbs/linalg.hpp"

namespace adbs {

// Cosine classifier with one unit-norm weight column per class and a
// boundary scalar per class. session_of[c] is the session that introduced c.
struct ClassifierState {
    Matrix weights;  // d x C
    BoundaryVector boundaries;
    std::vector<int> session_of;

    std::size_t dim() const noexcept { return weights.rows(); }
    std::size_t num_classes() const noexcept { return weights.cols(); }

    // Boundaries are expanded separately from the weights, so the two may be
    // briefly out of step inside a session. Anything that scores needs them
    // aligned.
    void require_aligned() const {
        if (boundaries.size() != num_classes()) {
            throw ProtocolError("classifier has " + std::to_string(num_classes()) + " classes but " +
                                std::to_string(boundaries.size()) + " boundaries");
        }
        if (num_classes() == 0) throw ProtocolError("classifier has no classes");
    }

    bool operator==(const ClassifierState&) const = default;
};

struct Logits {
    Vector values;
    double temperature = 1.0;
};

inline void check_temperature(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError("temperature must be a positive finite real");
}

// cos(f, W[:,c]) for every class, with both sides normalized.
inline Vector cosine_scores(const ClassifierState& state, const FeatureVector& f) {
    if (f.dim() != state.dim()) {
        throw ShapeError("feature dimension " + std::to_string(f.dim()) + " != classifier dimension " +
                         std::to_string(state.dim()));
    }
    const Vector u = normalized(f.span());
    Vector out(state.num_classes());
    for (std::size_t c = 0; c < out.size(); ++c) {
        const auto w = state.weights.col(c);
        out[c] = dot(u, w) / norm(w);
    }
    return out;
}

inline Logits logits(const ClassifierState& state, const FeatureVector& f, double temperature) {
    check_temperature(temperature);
    state.require_aligned();
    Vector cos = cosine_scores(state, f);
    for (std::size_t c = 0; c < cos.size(); ++c) cos[c] *= temperature * state.boundaries.m[c];
    return {std::move(cos), temperature};
}

inline Vector softmax(std::span<const double> z) {
    if (z.empty()) throw ArityError("softmax of empty vector");
    const double mx = *std::max_element(z.begin(), z.end());
    Vector p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

// -log softmax(z)[label], via log-sum-exp with max subtraction.
inline double cross_entropy(std::span<const double> z, std::size_t label) {
    if (label >= z.size()) {
        throw IndexError("label " + std::to_string(label) + " out of range for " + std::to_string(z.size()) +
                         " classes");
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    return std::max(0.0, std::log(sum) - (z[label] - mx));
}

inline double cross_entropy(const Logits& logits, std::size_t label) {
    return cross_entropy(logits.values, label);
}

struct CrossEntropyGrads {
    double loss = 0.0;
    Vector d_boundaries;  // dL/dM, size C
    Matrix d_weights;     // dL/dW, d x C
    Vector d_feature;     // dL/df, size d (used to train the linear extractor)
};

// Analytic gradients of CE(s * m_c * <f/|f|, w_c/|w_c|>). The weight gradient
// accounts for the column normalization, so it is tangent to each column.
inline CrossEntropyGrads cross_entropy_grads(const ClassifierState& state, const FeatureVector& f,
                                             std::size_t label, double temperature) {
    check_temperature(temperature);
    state.require_aligned();
    if (f.dim() != state.dim()) throw ShapeError("cross_entropy_grads: feature dimension mismatch");
    const std::size_t C = state.num_classes();
    const std::size_t d = state.dim();
    if (label >= C) throw IndexError("label " + std::to_string(label) + " out of range");

    const double f_norm = f.norm();
    if (!(f_norm > 0.0)) throw DegenerateInputError("cross_entropy_grads: zero feature vector");
    const Vector u = normalized(f.span());

    Vector cos(C), w_norm(C), z(C);
    for (std::size_t c = 0; c < C; ++c) {
        const auto w = state.weights.col(c);
        w_norm[c] = norm(w);
        cos[c] = dot(u, w) / w_norm[c];
        z[c] = temperature * state.boundaries.m[c] * cos[c];
    }
    Vector residual = softmax(z);
    residual[label] -= 1.0;

    CrossEntropyGrads g;
    g.loss = cross_entropy(z, label);
    g.d_boundaries.assign(C, 0.0);
    g.d_weights = Matrix(d, C);
    g.d_feature.assign(d, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        const double dz_dcos = temperature * state.boundaries.m[c] * residual[c];
        g.d_boundaries[c] = temperature * cos[c] * residual[c];
        const auto w = state.weights.col(c);
        auto dw = g.d_weights.col(c);
        for (std::size_t r = 0; r < d; ++r) {
            const double w_hat = w[r] / w_norm[c];
            dw[r] = dz_dcos * (u[r] - cos[c] * w_hat) / w_norm[c];
            g.d_feature[r] += dz_dcos * (w_hat - cos[c] * u[r]) / f_norm;
        }
    }
    return g;
}

// Arithmetic mean of the samples; callers normalize when storing.
inline FeatureVector prototype(std::span<const FeatureVector> samples) {
    if (samples.empty()) throw ArityError("prototype: empty sample set");
    const std::size_t d = samples.front().dim();
    Vector mean(d, 0.0);
    for (const auto& s : samples) {
        if (s.dim() != d) throw ShapeError("prototype: samples have differing dimensions");
        for (std::size_t i = 0; i < d; ++i) mean[i] += s[i];
    }
    const double k = static_cast<double>(samples.size());
    for (double& x : mean) x /= k;
    return FeatureVector(std::move(mean));
}

// argmax_c m_c * cos(f, w_c); ties go to the lowest index.
inline std::size_t predict(const ClassifierState& state, const FeatureVector& f) {
    state.require_aligned();
    const Vector cos = cosine_scores(state, f);
    std::size_t best = 0;
    double best_score = state.boundaries.m[0] * cos[0];
    for (std::size_t c = 1; c < cos.size(); ++c) {
        const double score = state.boundaries.m[c] * cos[c];
        if (score > best_score) {
            best = c;
            best_score = score;
        }
    }
    return best;
}

// Appends unit-normalized prototype columns tagged with `session`. Boundaries
// are left alone; see expand_mean_init.
inline ClassifierState expand(ClassifierState state, std::span<const FeatureVector> new_prototypes, int session) {
    if (new_prototypes.empty()) return state;
    if (!state.session_of.empty() && session <= state.session_of.back()) {
        throw ProtocolError("expand: session " + std::to_string(session) + " does not follow session " +
                            std::to_string(state.session_of.back()));
    }
    for (const auto& p : new_prototypes) {
        if (state.num_classes() > 0 && p.dim() != state.dim()) {
            throw ShapeError("expand: prototype dimension " + std::to_string(p.dim()) + " != " +
                             std::to_string(state.dim()));
        }
        state.weights.append_col(normalized(p.span()));
        state.session_of.push_back(session);
    }
    return state;
}

}  // namespace adbs
