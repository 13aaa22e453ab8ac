#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "adbs/error.hpp"
#include "adbs/linalg.hpp"

namespace adbs {

// Dense embedding f(x). Construction rejects empty or non-finite values.
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(Vector values) : values_(std::move(values)) {
        if (values_.empty()) throw ShapeError("FeatureVector: dimension must be >= 1");
        if (!all_finite(values_)) throw DataError("FeatureVector: non-finite entry");
    }
    FeatureVector(std::initializer_list<double> values) : FeatureVector(Vector(values)) {}

    std::size_t dim() const noexcept { return values_.size(); }
    const Vector& values() const noexcept { return values_; }
    std::span<const double> span() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double norm() const { return adbs::norm(values_); }

    bool operator==(const FeatureVector&) const = default;

private:
    Vector values_;
};

inline Vector normalized(std::span<const double> v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateInputError("normalize: vector has zero (or non-finite) norm");
    }
    Vector out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

inline FeatureVector normalize(const FeatureVector& v) { return FeatureVector(normalized(v.span())); }

inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("cosine: zero vector");
    return dot(a, b) / (na * nb);
}

enum class ExtractorKind { identity, random_projection, trainable_linear };

inline std::string_view to_string(ExtractorKind k) {
    switch (k) {
        case ExtractorKind::identity: return "identity";
        case ExtractorKind::random_projection: return "random_projection";
        case ExtractorKind::trainable_linear: return "trainable_linear";
    }
    return "?";
}

inline ExtractorKind parse_extractor_kind(std::string_view s) {
    if (s == "identity") return ExtractorKind::identity;
    if (s == "random_projection") return ExtractorKind::random_projection;
    if (s == "trainable_linear") return ExtractorKind::trainable_linear;
    throw ConfigError("unknown extractor kind '" + std::string(s) + "'");
}

// Stand-in for the backbone f(.). Projection kinds hold a d_out x d_in matrix.
// Only trainable_linear can be mutated, and only until freeze() is called.
class FeatureExtractor {
public:
    FeatureExtractor() = default;

    static FeatureExtractor identity(std::size_t dim) {
        if (dim == 0) throw ShapeError("identity extractor: dimension must be >= 1");
        FeatureExtractor e;
        e.kind_ = ExtractorKind::identity;
        e.d_in_ = e.d_out_ = dim;
        e.frozen_ = true;
        return e;
    }

    // Entries i.i.d. N(0, 1/d_out), fully determined by (seed, d_in, d_out).
    static FeatureExtractor random_projection(std::uint64_t seed, std::size_t d_in, std::size_t d_out) {
        if (d_in == 0 || d_out == 0) throw ShapeError("random_projection: dimensions must be >= 1");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(1.0 / static_cast<double>(d_out)));
        Matrix p(d_out, d_in);
        for (std::size_t c = 0; c < d_in; ++c) {
            for (std::size_t r = 0; r < d_out; ++r) p(r, c) = gauss(rng);
        }
        FeatureExtractor e;
        e.kind_ = ExtractorKind::random_projection;
        e.d_in_ = d_in;
        e.d_out_ = d_out;
        e.projection_ = std::move(p);
        e.frozen_ = true;
        return e;
    }

    static FeatureExtractor trainable_linear(Matrix projection) {
        if (projection.rows() == 0 || projection.cols() == 0) {
            throw ShapeError("trainable_linear: projection must be non-empty");
        }
        if (!all_finite(projection.raw())) throw DataError("trainable_linear: non-finite projection");
        FeatureExtractor e;
        e.kind_ = ExtractorKind::trainable_linear;
        e.d_in_ = projection.cols();
        e.d_out_ = projection.rows();
        e.projection_ = std::move(projection);
        e.frozen_ = false;
        return e;
    }

    // Identity start when square, otherwise a seeded Gaussian projection.
    static FeatureExtractor trainable_linear(std::uint64_t seed, std::size_t d_in, std::size_t d_out) {
        if (d_in == d_out) return trainable_linear(Matrix::identity(d_in));
        auto e = random_projection(seed, d_in, d_out);
        return trainable_linear(std::move(e.projection_));
    }

    // Rebuilds an extractor from stored parts (checkpoint loading).
    static FeatureExtractor restore(ExtractorKind kind, std::size_t d_in, std::size_t d_out, Matrix projection,
                                    bool frozen) {
        if (kind == ExtractorKind::identity) {
            if (d_in != d_out) throw ShapeError("identity extractor must be square");
            return identity(d_in);
        }
        if (projection.rows() != d_out || projection.cols() != d_in) {
            throw ShapeError("restore: projection shape does not match declared dimensions");
        }
        FeatureExtractor e = trainable_linear(std::move(projection));
        e.kind_ = kind;
        e.frozen_ = kind == ExtractorKind::random_projection || frozen;
        return e;
    }

    ExtractorKind kind() const noexcept { return kind_; }
    std::size_t input_dim() const noexcept { return d_in_; }
    std::size_t output_dim() const noexcept { return d_out_; }
    bool frozen() const noexcept { return frozen_; }
    bool trainable() const noexcept { return kind_ == ExtractorKind::trainable_linear && !frozen_; }
    const Matrix& projection() const noexcept { return projection_; }

    void freeze() noexcept { frozen_ = true; }

    Matrix& mutable_projection() {
        if (!trainable()) throw ProtocolError("extractor is frozen or not trainable");
        return projection_;
    }

    FeatureVector extract(std::span<const double> raw) const {
        if (raw.size() != d_in_) {
            throw ShapeError("extract: expected input dimension " + std::to_string(d_in_) + ", got " +
                             std::to_string(raw.size()));
        }
        if (!all_finite(raw)) throw DataError("extract: non-finite input");
        if (kind_ == ExtractorKind::identity) return FeatureVector(Vector(raw.begin(), raw.end()));
        return FeatureVector(projection_.multiply(raw));
    }

    bool operator==(const FeatureExtractor&) const = default;

private:
    ExtractorKind kind_ = ExtractorKind::identity;
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;
    Matrix projection_;
    bool frozen_ = true;
};

}  // namespace adbs
