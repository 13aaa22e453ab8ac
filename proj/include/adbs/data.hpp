#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "adbs/error.hpp"
#include "adbs/linalg.hpp"

namespace adbs {

// One raw (pre-extractor) input with its class index.
struct Example {
    std::size_t label = 0;
    Vector raw;

    bool operator==(const Example&) const = default;
};

struct SessionShape {
    std::size_t n_way = 0;
    std::size_t k_shot = 0;

    bool operator==(const SessionShape&) const = default;
};

struct SessionSpec {
    std::size_t base_class_count = 0;
    std::vector<SessionShape> sessions;
    std::uint64_t seed = 0;
    // Loader only: permute the ascending label order with `seed` before
    // assigning labels to sessions.
    bool shuffle_classes = false;

    std::size_t total_classes() const noexcept {
        std::size_t n = base_class_count;
        for (const auto& s : sessions) n += s.n_way;
        return n;
    }

    void validate() const {
        if (base_class_count == 0) throw ArityError("SessionSpec: base_class_count must be >= 1");
        for (std::size_t t = 0; t < sessions.size(); ++t) {
            if (sessions[t].n_way == 0 || sessions[t].k_shot == 0) {
                throw ArityError("SessionSpec: session " + std::to_string(t + 1) + " needs n_way >= 1 and k_shot >= 1");
            }
        }
    }
};

struct SessionSplit {
    std::vector<Example> train;
    std::vector<Example> test;

    bool operator==(const SessionSplit&) const = default;
};

// Base session plus incremental sessions. Class indices are contiguous:
// base classes are [0, base_class_count), then each increment's classes in
// order. class_labels maps a class index back to its original label.
struct FscilStream {
    std::size_t feature_dim = 0;
    std::size_t base_class_count = 0;
    std::vector<Example> base_train;
    std::vector<Example> base_test;
    std::vector<SessionSplit> increments;
    std::vector<long long> class_labels;

    std::size_t num_sessions() const noexcept { return increments.size() + 1; }

    // First class index and class count of session t (0 = base).
    std::pair<std::size_t, std::size_t> class_range(std::size_t t) const {
        if (t == 0) return {0, base_class_count};
        std::size_t first = base_class_count;
        for (std::size_t s = 1; s < t; ++s) first += classes_in(increments.at(s - 1).train);
        return {first, classes_in(increments.at(t - 1).train)};
    }

    // Test examples of sessions 0..t.
    std::vector<Example> cumulative_test(std::size_t t) const {
        std::vector<Example> out = base_test;
        for (std::size_t s = 0; s < t && s < increments.size(); ++s) {
            out.insert(out.end(), increments[s].test.begin(), increments[s].test.end());
        }
        return out;
    }

    static std::size_t classes_in(const std::vector<Example>& xs) {
        std::vector<std::size_t> labels;
        for (const auto& e : xs) labels.push_back(e.label);
        std::sort(labels.begin(), labels.end());
        return static_cast<std::size_t>(std::unique(labels.begin(), labels.end()) - labels.begin());
    }

    bool operator==(const FscilStream&) const = default;
};

struct SyntheticSpec {
    std::size_t num_classes = 18;
    std::size_t dim = 16;
    std::size_t samples_per_base_class = 100;
    std::size_t test_per_class = 50;
    double center_separation = 1.0;
    double within_class_std = 0.25;
    // Multiplies within_class_std for incremental classes. Values above 1
    // model a frozen extractor that embeds unseen classes less compactly.
    double novel_std_factor = 1.0;
    // Per-class spread multiplier exp(u), u ~ U(-class_std_jitter, +class_std_jitter).
    // Zero gives every class the same spread.
    double class_std_jitter = 0.6;
    std::uint64_t seed = 0;

    void validate() const {
        if (dim == 0) throw DataError("SyntheticSpec: dim must be >= 1");
        if (samples_per_base_class == 0) throw DataError("SyntheticSpec: samples_per_base_class must be >= 1");
        if (test_per_class == 0) throw DataError("SyntheticSpec: test_per_class must be >= 1 (evaluation impossible)");
        if (!(center_separation > 0.0) || !std::isfinite(center_separation)) {
            throw DataError("SyntheticSpec: center_separation must be > 0");
        }
        if (!(within_class_std > 0.0) || !std::isfinite(within_class_std)) {
            throw DataError("SyntheticSpec: within_class_std must be > 0");
        }
        if (!(novel_std_factor > 0.0) || !std::isfinite(novel_std_factor)) {
            throw DataError("SyntheticSpec: novel_std_factor must be > 0");
        }
        if (!(class_std_jitter >= 0.0) || !std::isfinite(class_std_jitter)) {
            throw DataError("SyntheticSpec: class_std_jitter must be >= 0");
        }
    }
};

// Isotropic Gaussian clusters around random directions scaled to
// center_separation. Base classes get samples_per_base_class training points;
// incremental classes get exactly k_shot.
inline FscilStream generate_synthetic(const SyntheticSpec& spec, const SessionSpec& sessions) {
    spec.validate();
    sessions.validate();
    const std::size_t needed = sessions.total_classes();
    if (spec.num_classes < needed) {
        throw ArityError("generate_synthetic: need " + std::to_string(needed) + " classes, spec has " +
                         std::to_string(spec.num_classes));
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    std::vector<Vector> centers(needed, Vector(spec.dim));
    for (auto& c : centers) {
        double n = 0.0;
        do {
            for (double& x : c) x = unit(rng);
            n = norm(c);
        } while (!(n > 0.0));
        for (double& x : c) x *= spec.center_separation / n;
    }
    std::vector<double> class_std(needed, spec.within_class_std);
    if (spec.class_std_jitter > 0.0) {
        std::uniform_real_distribution<double> jitter(-spec.class_std_jitter, spec.class_std_jitter);
        for (double& sd : class_std) sd *= std::exp(jitter(rng));
    }
    for (std::size_t c = sessions.base_class_count; c < needed; ++c) class_std[c] *= spec.novel_std_factor;

    auto draw = [&](std::size_t cls, std::size_t count, std::vector<Example>& out) {
        const double sd = class_std[cls];
        for (std::size_t k = 0; k < count; ++k) {
            Example e{cls, Vector(spec.dim)};
            for (std::size_t i = 0; i < spec.dim; ++i) e.raw[i] = centers[cls][i] + sd * unit(rng);
            out.push_back(std::move(e));
        }
    };

    FscilStream s;
    s.feature_dim = spec.dim;
    s.base_class_count = sessions.base_class_count;
    for (std::size_t c = 0; c < needed; ++c) s.class_labels.push_back(static_cast<long long>(c));
    for (std::size_t c = 0; c < sessions.base_class_count; ++c) {
        draw(c, spec.samples_per_base_class, s.base_train);
        draw(c, spec.test_per_class, s.base_test);
    }
    std::size_t next = sessions.base_class_count;
    for (const auto& shape : sessions.sessions) {
        SessionSplit split;
        for (std::size_t c = next; c < next + shape.n_way; ++c) {
            draw(c, shape.k_shot, split.train);
            draw(c, spec.test_per_class, split.test);
        }
        next += shape.n_way;
        s.increments.push_back(std::move(split));
    }
    return s;
}

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    if (r.ec != std::errc{}) throw DataError("format_double: conversion failed");
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, std::string_view what) {
    field = trim(field);
    T value{};
    const auto r = std::from_chars(field.data(), field.data() + field.size(), value);
    if (r.ec != std::errc{} || r.ptr != field.data() + field.size()) {
        throw DataError("line " + std::to_string(line_no) + ": non-numeric " + std::string(what) + " '" +
                        std::string(field) + "'");
    }
    return value;
}

}  // namespace detail

// Writes the stream as `label,split,f0,...,f{d-1}` rows: base train, base
// test, then each increment's train and test.
inline void write_feature_csv(std::ostream& out, const FscilStream& s) {
    out << "label,split";
    for (std::size_t i = 0; i < s.feature_dim; ++i) out << ",f" << i;
    out << '\n';
    auto rows = [&](const std::vector<Example>& xs, std::string_view split) {
        for (const auto& e : xs) {
            out << s.class_labels.at(e.label) << ',' << split;
            for (double v : e.raw) out << ',' << format_double(v);
            out << '\n';
        }
    };
    rows(s.base_train, "train");
    rows(s.base_test, "test");
    for (const auto& inc : s.increments) {
        rows(inc.train, "train");
        rows(inc.test, "test");
    }
}

inline void export_feature_csv(const std::string& path, const FscilStream& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_feature_csv(out, s);
    if (!out) throw IoError("write to '" + path + "' failed");
}

// Parses a feature CSV and assigns labels to sessions in ascending order:
// the lowest base_class_count labels form the base session, the next n_way
// the first increment, and so on. Incremental classes keep their first
// k_shot train rows in file order.
inline FscilStream read_feature_csv(std::istream& in, const SessionSpec& spec) {
    spec.validate();
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw DataError("line 1: missing header");
    const auto header = detail::split_commas(detail::trim(line));
    if (header.size() < 3 || detail::trim(header[0]) != "label" || detail::trim(header[1]) != "split") {
        throw DataError("line 1: header must be 'label,split,f0,...'");
    }
    const std::size_t d = header.size() - 2;
    for (std::size_t i = 0; i < d; ++i) {
        if (detail::trim(header[i + 2]) != "f" + std::to_string(i)) {
            throw DataError("line 1: expected column 'f" + std::to_string(i) + "'");
        }
    }

    struct PerClass {
        std::vector<Vector> train;
        std::vector<Vector> test;
    };
    std::map<long long, PerClass> classes;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = detail::trim(line);
        if (row.empty()) continue;
        const auto fields = detail::split_commas(row);
        if (fields.size() != d + 2) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 2) +
                            " fields, got " + std::to_string(fields.size()));
        }
        const auto label = detail::parse_number<long long>(fields[0], line_no, "label");
        const auto split = detail::trim(fields[1]);
        Vector v(d);
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = detail::parse_number<double>(fields[i + 2], line_no, "feature");
            if (!std::isfinite(v[i])) throw DataError("line " + std::to_string(line_no) + ": non-finite feature");
        }
        auto& pc = classes[label];
        if (split == "train") {
            pc.train.push_back(std::move(v));
        } else if (split == "test") {
            pc.test.push_back(std::move(v));
        } else {
            throw DataError("line " + std::to_string(line_no) + ": split must be 'train' or 'test', got '" +
                            std::string(split) + "'");
        }
    }

    if (classes.size() != spec.total_classes()) {
        throw DataError("feature file has " + std::to_string(classes.size()) + " labels, session spec needs " +
                        std::to_string(spec.total_classes()));
    }

    FscilStream s;
    s.feature_dim = d;
    s.base_class_count = spec.base_class_count;
    std::vector<std::map<long long, PerClass>::const_iterator> order;
    for (auto c = classes.cbegin(); c != classes.cend(); ++c) order.push_back(c);
    if (spec.shuffle_classes) {
        std::mt19937_64 rng(spec.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::size_t index = 0;
    auto take = [&](std::size_t count, std::size_t k_shot, std::vector<Example>& train, std::vector<Example>& test) {
        for (std::size_t n = 0; n < count; ++n, ++index) {
            const auto& [label, pc] = *order[index];
            if (pc.train.empty() || pc.test.empty()) {
                throw DataError("label " + std::to_string(label) + ": needs both train and test rows");
            }
            if (k_shot > 0 && pc.train.size() < k_shot) {
                throw DataError("label " + std::to_string(label) + ": " + std::to_string(pc.train.size()) +
                                " train rows, k_shot needs " + std::to_string(k_shot));
            }
            s.class_labels.push_back(label);
            const std::size_t n_train = k_shot > 0 ? k_shot : pc.train.size();
            for (std::size_t k = 0; k < n_train; ++k) train.push_back({index, pc.train[k]});
            for (const auto& v : pc.test) test.push_back({index, v});
        }
    };
    take(spec.base_class_count, 0, s.base_train, s.base_test);
    for (const auto& shape : spec.sessions) {
        SessionSplit split;
        take(shape.n_way, shape.k_shot, split.train, split.test);
        s.increments.push_back(std::move(split));
    }
    return s;
}

inline FscilStream load_feature_csv(const std::string& path, const SessionSpec& spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_feature_csv(in, spec);
}

// Session label sets are pairwise disjoint and every test class was trained.
inline void check_stream(const FscilStream& s) {
    std::vector<int> owner(s.class_labels.size(), -1);
    auto claim = [&](const std::vector<Example>& train, const std::vector<Example>& test, int session) {
        for (const auto& e : train) {
            if (e.label >= owner.size()) throw ProtocolError("stream: class index out of range");
            if (e.raw.size() != s.feature_dim) throw ShapeError("stream: example has wrong dimension");
            if (owner[e.label] != -1 && owner[e.label] != session) {
                throw ProtocolError("stream: class " + std::to_string(e.label) + " appears in sessions " +
                                    std::to_string(owner[e.label]) + " and " + std::to_string(session));
            }
            owner[e.label] = session;
        }
        for (const auto& e : test) {
            if (e.label >= owner.size() || owner[e.label] != session) {
                throw ProtocolError("stream: test class " + std::to_string(e.label) + " not trained in session " +
                                    std::to_string(session));
            }
            if (e.raw.size() != s.feature_dim) throw ShapeError("stream: example has wrong dimension");
        }
    };
    claim(s.base_train, s.base_test, 0);
    for (std::size_t t = 0; t < s.increments.size(); ++t) {
        claim(s.increments[t].train, s.increments[t].test, static_cast<int>(t + 1));
    }
}

}  // namespace adbs
