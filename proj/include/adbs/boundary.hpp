#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adbs/boundary_vector.hpp"
#include "adbs/classifier.hpp"
#include "adbs/embedding.hpp"
#include "adbs/error.hpp"
#include "adbs/linalg.hpp"
#include "adbs/train_config.hpp"

namespace adbs {

struct LabeledFeature {
    FeatureVector feature;
    std::size_t label = 0;
};

// Base classes start at m = 1, which makes the boundary-scaled logits equal
// the plain cosine logits.
inline BoundaryVector init_base(std::size_t num_classes, double clamp_floor = kDefaultClampFloor) {
    if (num_classes == 0) throw ArityError("init_base: need at least one class");
    if (!(clamp_floor > 0.0) || clamp_floor > 1.0) throw ProtocolError("init_base: clamp_floor must be in (0, 1]");
    BoundaryVector b;
    b.m.assign(num_classes, 1.0);
    b.frozen.assign(num_classes, 0);
    b.clamp_floor = clamp_floor;
    return b;
}

// Appends n entries initialised to the mean of every existing entry and
// freezes all existing entries.
inline BoundaryVector expand_mean_init(BoundaryVector b, std::size_t num_new) {
    if (b.empty()) throw ProtocolError("expand_mean_init: boundary vector is empty");
    if (num_new == 0) throw ArityError("expand_mean_init: num_new must be >= 1");
    const double mean = std::accumulate(b.m.begin(), b.m.end(), 0.0) / static_cast<double>(b.m.size());
    std::fill(b.frozen.begin(), b.frozen.end(), std::uint8_t{1});
    b.m.insert(b.m.end(), num_new, std::max(mean, b.clamp_floor));
    b.frozen.insert(b.frozen.end(), num_new, std::uint8_t{0});
    return b;
}

namespace detail {

inline void check_ic_shapes(std::span<const double> m, const Matrix& prototypes, const Matrix& weights) {
    const std::size_t C = m.size();
    if (C == 0) throw ArityError("inter-class constraint: no classes");
    if (prototypes.cols() != C || weights.cols() != C) {
        throw ShapeError("inter-class constraint: expected " + std::to_string(C) + " prototypes and weights, got " +
                         std::to_string(prototypes.cols()) + " and " + std::to_string(weights.cols()));
    }
    if (prototypes.rows() != weights.rows()) throw ShapeError("inter-class constraint: dimension mismatch");
    for (std::size_t i = 0; i < C; ++i) {
        if (std::abs(norm(prototypes.col(i)) - 1.0) > 1e-6) {
            throw DegenerateInputError("inter-class constraint: prototype " + std::to_string(i) + " is not unit norm");
        }
    }
}

// a(i, j) = p_i . w_j
inline Matrix prototype_weight_dots(const Matrix& prototypes, const Matrix& weights) {
    const std::size_t C = weights.cols();
    Matrix a(C, C);
    for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t j = 0; j < C; ++j) a(i, j) = dot(prototypes.col(i), weights.col(j));
    }
    return a;
}

}  // namespace detail

// Pairwise constraint terms (1 - m_i) p_i.w_i + (m_j - 1) p_i.w_j as a C x C
// matrix indexed (i, j). The diagonal is identically zero.
inline Matrix constraint_terms(std::span<const double> m, const Matrix& prototypes, const Matrix& weights) {
    detail::check_ic_shapes(m, prototypes, weights);
    const Matrix a = detail::prototype_weight_dots(prototypes, weights);
    const std::size_t C = m.size();
    Matrix t(C, C);
    for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t j = 0; j < C; ++j) t(i, j) = (1.0 - m[i]) * a(i, i) + (m[j] - 1.0) * a(i, j);
    }
    return t;
}

// Sum over all (i, j), diagonal included, of max(0, term(i, j)).
inline double ic_loss(std::span<const double> m, const Matrix& prototypes, const Matrix& weights) {
    const Matrix t = constraint_terms(m, prototypes, weights);
    double loss = 0.0;
    for (double v : t.raw()) loss += std::max(0.0, v);
    return loss;
}

struct IcGrads {
    double loss = 0.0;
    Vector d_boundaries;
    Matrix d_weights;  // with respect to the raw (unnormalized) weight columns
};

// Subgradient of ic_loss. Terms at exactly zero contribute nothing.
inline IcGrads ic_grads(std::span<const double> m, const Matrix& prototypes, const Matrix& weights) {
    detail::check_ic_shapes(m, prototypes, weights);
    const Matrix a = detail::prototype_weight_dots(prototypes, weights);
    const std::size_t C = m.size();
    const std::size_t d = weights.rows();
    IcGrads g;
    g.d_boundaries.assign(C, 0.0);
    g.d_weights = Matrix(d, C);
    for (std::size_t i = 0; i < C; ++i) {
        const auto p_i = prototypes.col(i);
        for (std::size_t j = 0; j < C; ++j) {
            const double term = (1.0 - m[i]) * a(i, i) + (m[j] - 1.0) * a(i, j);
            if (!(term > 0.0)) continue;
            g.loss += term;
            g.d_boundaries[i] -= a(i, i);
            g.d_boundaries[j] += a(i, j);
            auto dw_i = g.d_weights.col(i);
            auto dw_j = g.d_weights.col(j);
            for (std::size_t r = 0; r < d; ++r) {
                dw_i[r] += (1.0 - m[i]) * p_i[r];
                dw_j[r] += (m[j] - 1.0) * p_i[r];
            }
        }
    }
    return g;
}

struct ConstraintReport {
    Matrix terms;  // C x C, (i, j)
    bool satisfied = true;
    double tolerance = 0.0;
    double worst = 0.0;  // largest off-diagonal term
    std::size_t worst_i = 0;
    std::size_t worst_j = 0;
};

// Checks the pairwise separation inequality for all i != j.
inline ConstraintReport verify_proposition1(std::span<const double> m, const Matrix& prototypes,
                                            const Matrix& weights, double tolerance) {
    if (!(tolerance >= 0.0)) throw DataError("verify_proposition1: tolerance must be >= 0");
    ConstraintReport r;
    r.terms = constraint_terms(m, prototypes, weights);
    r.tolerance = tolerance;
    r.worst = -std::numeric_limits<double>::infinity();
    const std::size_t C = m.size();
    for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            if (i == j) continue;
            if (r.terms(i, j) > r.worst) {
                r.worst = r.terms(i, j);
                r.worst_i = i;
                r.worst_j = j;
            }
        }
    }
    if (C < 2) r.worst = 0.0;
    r.satisfied = r.worst <= tolerance;
    return r;
}

struct ProbabilityPair {
    double p_fixed = 0.0;
    double p_adaptive = 0.0;
};

// Softmax probability of target_class with m = 1 and with the given m.
inline ProbabilityPair compare_probabilities(std::span<const double> m, const Matrix& weights,
                                             const FeatureVector& query, std::size_t target_class,
                                             double temperature) {
    check_temperature(temperature);
    const std::size_t C = weights.cols();
    if (m.size() != C) throw ShapeError("compare_probabilities: boundary/weight count mismatch");
    if (target_class >= C) throw IndexError("compare_probabilities: target class out of range");
    if (query.dim() != weights.rows()) throw ShapeError("compare_probabilities: query dimension mismatch");
    const Vector u = normalized(query.span());
    Vector z_fixed(C), z_adaptive(C);
    for (std::size_t c = 0; c < C; ++c) {
        const auto w = weights.col(c);
        const double cos = dot(u, w) / norm(w);
        z_fixed[c] = temperature * cos;
        z_adaptive[c] = temperature * m[c] * cos;
    }
    return {softmax(z_fixed)[target_class], softmax(z_adaptive)[target_class]};
}

namespace detail {

inline Matrix unit_columns(const Matrix& w) {
    Matrix out = w;
    for (std::size_t c = 0; c < out.cols(); ++c) {
        const Vector n = normalized(w.col(c));
        std::copy(n.begin(), n.end(), out.col(c).begin());
    }
    return out;
}

}  // namespace detail

struct SessionLoss {
    double classification = 0.0;  // mean cross-entropy
    double constraint = 0.0;      // ic_loss
    double total = 0.0;
};

// Total objective L = mean CE + alpha * IC over a data set, with the IC
// prototypes taken equal to the (unit) classifier columns.
inline SessionLoss session_loss(const ClassifierState& state, std::span<const LabeledFeature> data,
                                double alpha, double temperature) {
    if (data.empty()) throw ProtocolError("session_loss: empty data");
    SessionLoss l;
    for (const auto& ex : data) l.classification += cross_entropy(logits(state, ex.feature, temperature), ex.label);
    l.classification /= static_cast<double>(data.size());
    if (alpha != 0.0) {
        const Matrix p = detail::unit_columns(state.weights);
        l.constraint = ic_loss(state.boundaries.m, p, state.weights);
    }
    l.total = l.classification + alpha * l.constraint;
    return l;
}

// Mini-batch gradient descent on mean CE + alpha * IC with respect to the
// unfrozen boundary entries only. Weights and extractor stay fixed. The
// boundary vector inside `state` is ignored in favour of `b`.
inline BoundaryVector finetune_boundaries(const ClassifierState& state, BoundaryVector b,
                                          std::span<const LabeledFeature> data, const TrainConfig& cfg,
                                          std::mt19937_64& rng) {
    if (data.empty()) throw ProtocolError("finetune_boundaries: empty data");
    b.validate();
    if (b.size() != state.num_classes()) throw ProtocolError("finetune_boundaries: boundary/class count mismatch");
    const double alpha = cfg.effective_alpha();
    const std::size_t C = b.size();

    ClassifierState work = state;
    work.boundaries = b;
    const Matrix prototypes = alpha != 0.0 ? detail::unit_columns(state.weights) : Matrix{};

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vector velocity(C, 0.0);

    for (int epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double inv_n = 1.0 / static_cast<double>(stop - start);
            Vector grad(C, 0.0);
            double loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const auto& ex = data[order[k]];
                const auto g = cross_entropy_grads(work, ex.feature, ex.label, cfg.temperature);
                loss += g.loss * inv_n;
                for (std::size_t c = 0; c < C; ++c) grad[c] += g.d_boundaries[c] * inv_n;
            }
            if (alpha != 0.0) {
                const auto ic = ic_grads(work.boundaries.m, prototypes, work.weights);
                loss += alpha * ic.loss;
                for (std::size_t c = 0; c < C; ++c) grad[c] += alpha * ic.d_boundaries[c];
            }
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "finetune_boundaries: non-finite loss at epoch " << epoch << ", batch starting at " << start
                    << "; boundaries:";
                for (double v : work.boundaries.m) msg << ' ' << v;
                throw DivergenceError(msg.str());
            }
            for (std::size_t c = 0; c < C; ++c) {
                if (work.boundaries.is_frozen(c)) continue;
                velocity[c] = cfg.boundary_momentum * velocity[c] + grad[c];
                work.boundaries.m[c] =
                    std::max(work.boundaries.clamp_floor, work.boundaries.m[c] - cfg.boundary_lr * velocity[c]);
            }
        }
    }
    return std::move(work.boundaries);
}

}  // namespace adbs
