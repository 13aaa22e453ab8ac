#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "adbs/data.hpp"
#include "adbs/error.hpp"
#include "adbs/linalg.hpp"

namespace adbs {

struct SessionReport {
    std::size_t session_index = 0;
    double top1_accuracy = 0.0;
    std::size_t num_test = 0;
    double d_cs = 0.0;
    Matrix similarity_matrix;  // C x C cosine similarities of the classifier columns

    bool operator==(const SessionReport&) const = default;
};

inline double top1_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
    if (predictions.size() != labels.size()) throw ArityError("top1_accuracy: length mismatch");
    if (predictions.empty()) throw ArityError("top1_accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

inline void require_unit_columns(const Matrix& prototypes, const char* who) {
    for (std::size_t c = 0; c < prototypes.cols(); ++c) {
        if (std::abs(norm(prototypes.col(c)) - 1.0) > 1e-9) {
            throw DegenerateInputError(std::string(who) + ": prototype " + std::to_string(c) + " is not unit norm");
        }
    }
}

// Pairwise dot products of unit columns, mirrored so the result is exactly
// symmetric, with an exact unit diagonal.
inline Matrix similarity_matrix(const Matrix& prototypes) {
    require_unit_columns(prototypes, "similarity_matrix");
    const std::size_t n = prototypes.cols();
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        s(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) s(i, j) = s(j, i) = dot(prototypes.col(i), prototypes.col(j));
    }
    return s;
}

// Mean cosine distance over all N^2 ordered pairs, including i == j.
inline double separation_degree(const Matrix& prototypes) {
    if (prototypes.cols() == 0) throw ArityError("separation_degree: no prototypes");
    require_unit_columns(prototypes, "separation_degree");
    const std::size_t n = prototypes.cols();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sum += 1.0 - dot(prototypes.col(i), prototypes.col(j));
    }
    return sum / static_cast<double>(n * n);
}

inline double average_accuracy(std::span<const SessionReport> reports) {
    if (reports.empty()) throw ArityError("average_accuracy: no reports");
    double sum = 0.0;
    for (const auto& r : reports) sum += r.top1_accuracy;
    return sum / static_cast<double>(reports.size());
}

inline double delta_last(std::span<const SessionReport> treatment, std::span<const SessionReport> control) {
    if (treatment.empty() || control.empty()) throw ArityError("delta_last: empty report list");
    if (treatment.size() != control.size()) throw ArityError("delta_last: report lists differ in length");
    return treatment.back().top1_accuracy - control.back().top1_accuracy;
}

inline void write_results_csv(std::ostream& out, std::span<const SessionReport> reports) {
    out << "session,top1,n_test,d_cs\n";
    for (const auto& r : reports) {
        out << r.session_index << ',' << format_double(r.top1_accuracy) << ',' << r.num_test << ','
            << format_double(r.d_cs) << '\n';
    }
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

}  // namespace adbs
