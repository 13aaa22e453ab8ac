#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adbs/boundary.hpp"
#include "adbs/classifier.hpp"
#include "adbs/embedding.hpp"
#include "adbs/linalg.hpp"

namespace adbs {

// Random generators for verification instances.
namespace sample {

inline Vector unit_vector(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vector v(d);
    double n = 0.0;
    do {
        for (double& x : v) x = g(rng);
        n = norm(v);
    } while (!(n > 1e-8));
    for (double& x : v) x /= n;
    return v;
}

inline Matrix unit_columns(std::size_t d, std::size_t C, std::mt19937_64& rng) {
    Matrix m(d, 0);
    for (std::size_t c = 0; c < C; ++c) m.append_col(unit_vector(d, rng));
    return m;
}

inline std::size_t uniform_index(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform(double lo, double hi, std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace sample

struct GradCheckOutcome {
    std::size_t configurations = 0;
    std::size_t entries_checked = 0;
    std::size_t failures = 0;
    double worst_error = 0.0;  // relative where |analytic| > 1e-6, absolute otherwise
    std::string worst_description;

    bool passed() const noexcept { return failures == 0; }
};

// Central differences with step h on every coordinate of `params`.
// Relative error is used where |analytic| > abs_floor, absolute otherwise.
inline void compare_with_central_differences(const std::function<double()>& loss, std::span<double> params,
                                             std::span<const double> analytic, double h, double tolerance,
                                             double abs_floor, const std::string& label, GradCheckOutcome& out) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss();
        params[i] = saved - h;
        const double down = loss();
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        double err = std::abs(a - numeric);
        if (std::abs(a) > abs_floor) err /= std::max(std::abs(a), std::abs(numeric));
        const double limit = std::abs(a) > abs_floor ? tolerance : abs_floor;
        ++out.entries_checked;
        const bool ok = err <= limit && std::isfinite(numeric);
        if (!ok) ++out.failures;
        if (err > out.worst_error || !std::isfinite(numeric)) {
            out.worst_error = err;
            std::ostringstream msg;
            msg << label << "[" << i << "]: analytic " << a << ", numeric " << numeric;
            out.worst_description = msg.str();
        }
    }
}

struct GradCheckSettings {
    std::size_t configurations = 100;
    std::size_t max_dim = 32;
    std::size_t max_classes = 10;
    double step = 1e-5;
    double tolerance = 1e-4;
    double abs_floor = 1e-6;
    double kink_margin = 1e-3;
    std::uint64_t seed = 0;
};

// Cross-entropy gradients with respect to M and W on random configurations.
inline GradCheckOutcome check_cross_entropy_gradients(const GradCheckSettings& s) {
    std::mt19937_64 rng(s.seed);
    GradCheckOutcome out;
    for (std::size_t n = 0; n < s.configurations; ++n) {
        const std::size_t d = sample::uniform_index(2, s.max_dim, rng);
        const std::size_t C = sample::uniform_index(2, s.max_classes, rng);
        ClassifierState st;
        st.weights = sample::unit_columns(d, C, rng);
        st.boundaries.m.resize(C);
        for (double& m : st.boundaries.m) m = sample::uniform(0.5, 1.5, rng);
        st.boundaries.frozen.assign(C, 0);
        st.session_of.assign(C, 0);
        const double temperature = sample::uniform(1.0, 4.0, rng);
        Vector f = sample::unit_vector(d, rng);
        const double f_scale = sample::uniform(0.5, 3.0, rng);
        for (double& x : f) x *= f_scale;
        const std::size_t label = sample::uniform_index(0, C - 1, rng);

        const auto g = cross_entropy_grads(st, FeatureVector(f), label, temperature);
        auto loss = [&] { return cross_entropy(logits(st, FeatureVector(f), temperature), label); };
        const std::string tag = "CE config " + std::to_string(n);
        compare_with_central_differences(loss, st.boundaries.m, g.d_boundaries, s.step, s.tolerance, s.abs_floor,
                                         tag + " dM", out);
        compare_with_central_differences(loss, st.weights.raw(), g.d_weights.raw(), s.step, s.tolerance,
                                         s.abs_floor, tag + " dW", out);
        compare_with_central_differences(loss, f, g.d_feature, s.step, s.tolerance, s.abs_floor, tag + " df", out);
        ++out.configurations;
    }
    return out;
}

// Inter-class constraint gradients with respect to M and W, on random
// configurations whose off-diagonal terms all sit at least kink_margin away
// from zero.
inline GradCheckOutcome check_ic_gradients(const GradCheckSettings& s) {
    std::mt19937_64 rng(s.seed ^ 0x1c1c1c1cULL);
    GradCheckOutcome out;
    std::size_t attempts = 0;
    while (out.configurations < s.configurations) {
        if (++attempts > 1000 * s.configurations) break;
        const std::size_t d = sample::uniform_index(2, s.max_dim, rng);
        const std::size_t C = sample::uniform_index(2, s.max_classes, rng);
        Matrix w = sample::unit_columns(d, C, rng);
        Matrix p(d, 0);
        for (std::size_t c = 0; c < C; ++c) {
            Vector v(w.col(c).begin(), w.col(c).end());
            const Vector noise = sample::unit_vector(d, rng);
            for (std::size_t r = 0; r < d; ++r) v[r] += 0.5 * noise[r];
            p.append_col(normalized(v));
        }
        Vector m(C);
        for (double& x : m) x = sample::uniform(0.5, 1.5, rng);

        const Matrix terms = constraint_terms(m, p, w);
        bool near_kink = false;
        for (std::size_t i = 0; i < C && !near_kink; ++i) {
            for (std::size_t j = 0; j < C; ++j) {
                if (i != j && std::abs(terms(i, j)) < s.kink_margin) {
                    near_kink = true;
                    break;
                }
            }
        }
        if (near_kink) continue;

        const auto g = ic_grads(m, p, w);
        auto loss = [&] { return ic_loss(m, p, w); };
        const std::string tag = "IC config " + std::to_string(out.configurations);
        compare_with_central_differences(loss, m, g.d_boundaries, s.step, s.tolerance, s.abs_floor, tag + " dM",
                                         out);
        compare_with_central_differences(loss, w.raw(), g.d_weights.raw(), s.step, s.tolerance, s.abs_floor,
                                         tag + " dW", out);
        ++out.configurations;
    }
    if (out.configurations < s.configurations) {
        ++out.failures;
        out.worst_description = "could not draw enough kink-free IC configurations";
    }
    return out;
}

struct SweepOutcome {
    std::size_t instances = 0;          // constraint-satisfying instances checked
    std::size_t unsatisfied = 0;        // drawn or injected instances rejected by the constraint
    std::size_t probability_failures = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();  // max of p_fixed - p_adaptive
    std::string worst_instance;
    // Injected violating instance, if requested.
    bool injected = false;
    bool injected_satisfied = false;
    double injected_p_fixed = 0.0;
    double injected_p_adaptive = 0.0;

    bool passed() const noexcept { return probability_failures == 0; }
};

struct SweepSettings {
    std::size_t instances = 1000;
    double slack = 1e-12;
    double temperature_max = 16.0;
    std::uint64_t seed = 0;
    bool inject_violation = false;
};

namespace detail {

inline std::string describe_instance(const Vector& m, const Matrix& p, const Matrix& w, std::size_t target,
                                     double temperature) {
    std::ostringstream os;
    os.precision(17);
    os << "C=" << m.size() << " d=" << w.rows() << " target=" << target << " s=" << temperature << " m=[";
    for (std::size_t i = 0; i < m.size(); ++i) os << (i ? "," : "") << m[i];
    os << "] p.w=[";
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) os << (i + j ? "," : "") << dot(p.col(i), w.col(j));
    }
    os << "]";
    return os.str();
}

}  // namespace detail

// Draws random (W, prototypes, M) instances, keeps those satisfying the
// pairwise constraint with tolerance 0, and checks that boundary scaling
// never lowers the target-class probability at each prototype.
inline SweepOutcome proposition1_sweep(const SweepSettings& s) {
    std::mt19937_64 rng(s.seed);
    SweepOutcome out;
    std::size_t attempts = 0;
    while (out.instances < s.instances && attempts < 200 * s.instances + 1000) {
        ++attempts;
        const std::size_t d = sample::uniform_index(2, 32, rng);
        const std::size_t C = sample::uniform_index(2, 10, rng);
        const Matrix w = sample::unit_columns(d, C, rng);
        const double noise_scale = sample::uniform(0.0, 0.6, rng);
        Matrix p(d, 0);
        for (std::size_t c = 0; c < C; ++c) {
            Vector v(w.col(c).begin(), w.col(c).end());
            const Vector noise = sample::unit_vector(d, rng);
            for (std::size_t r = 0; r < d; ++r) v[r] += noise_scale * noise[r];
            p.append_col(normalized(v));
        }
        // A common scale with a small per-class spread.
        const double scale = sample::uniform(0.3, 3.0, rng);
        const double spread = sample::uniform(0.0, 0.3, rng);
        Vector m(C);
        for (double& x : m) x = std::max(1e-3, scale * (1.0 + sample::uniform(-spread, spread, rng)));
        const double temperature = sample::uniform(1.0, s.temperature_max, rng);

        if (!verify_proposition1(m, p, w, 0.0).satisfied) {
            ++out.unsatisfied;
            continue;
        }
        for (std::size_t i = 0; i < C; ++i) {
            const auto pr = compare_probabilities(m, w, FeatureVector(Vector(p.col(i).begin(), p.col(i).end())), i,
                                                  temperature);
            const double gap = pr.p_fixed - pr.p_adaptive;
            if (gap > out.worst_gap) {
                out.worst_gap = gap;
                out.worst_instance = detail::describe_instance(m, p, w, i, temperature);
            }
            if (!(pr.p_adaptive >= pr.p_fixed - s.slack)) ++out.probability_failures;
        }
        ++out.instances;
    }
    if (out.instances < s.instances) {
        ++out.probability_failures;
        out.worst_instance = "could not draw enough constraint-satisfying instances";
    }
    if (s.inject_violation) {
        // Orthonormal prototypes with m_0 < 1 = m_1: term (0, 1) = 0.1 > 0.
        Matrix basis = Matrix::identity(2);
        const Vector m{0.9, 1.0};
        out.injected = true;
        out.injected_satisfied = verify_proposition1(m, basis, basis, 0.0).satisfied;
        if (out.injected_satisfied) {
            ++out.probability_failures;  // the filter itself is broken
        } else {
            ++out.unsatisfied;
            const auto pr = compare_probabilities(m, basis, FeatureVector{1.0, 0.0}, 0, 1.0);
            out.injected_p_fixed = pr.p_fixed;
            out.injected_p_adaptive = pr.p_adaptive;
        }
    }
    return out;
}

}  // namespace adbs
