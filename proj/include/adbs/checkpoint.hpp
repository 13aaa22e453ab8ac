#pragma once

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "adbs/error.hpp"
#include "adbs/protocol.hpp"

namespace adbs {

// Checkpoint file layout (JSON, version 1):
//
//   {
//     "format": "adbs-checkpoint", "version": 1,
//     "session_index": t, "dim": d, "num_classes": C,
//     "weights": [[w_0 ...d values], ..., [w_{C-1}]],   // one array per class column
//     "boundaries": [m_0, ..., m_{C-1}],
//     "frozen": [0|1, ...], "clamp_floor": x,
//     "session_of": [t_0, ..., t_{C-1}],
//     "extractor": {"kind": "...", "input_dim": n, "output_dim": d, "frozen": b,
//                   "projection": [[column 0 ...d_out values], ...]},  // empty for identity
//     "rng_state": "<mt19937_64 state words>"
//   }
//
// Doubles are written in shortest round-trip form, so a reload is bit-exact.
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json columns_to_json(const Matrix& m) {
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) {
        const auto col = m.col(c);
        cols.push_back(std::vector<double>(col.begin(), col.end()));
    }
    return cols;
}

inline Matrix columns_from_json(const nlohmann::json& j, std::size_t rows) {
    Matrix m(rows, 0);
    for (const auto& col : j) {
        const auto v = col.get<std::vector<double>>();
        m.append_col(v);
    }
    return m;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const SessionCheckpoint& ckpt) {
    const auto& st = ckpt.classifier;
    const auto& ex = ckpt.extractor;
    nlohmann::json j;
    j["format"] = "adbs-checkpoint";
    j["version"] = kCheckpointVersion;
    j["session_index"] = ckpt.session_index;
    j["dim"] = st.dim();
    j["num_classes"] = st.num_classes();
    j["weights"] = detail::columns_to_json(st.weights);
    j["boundaries"] = st.boundaries.m;
    j["frozen"] = st.boundaries.frozen;
    j["clamp_floor"] = st.boundaries.clamp_floor;
    j["session_of"] = st.session_of;
    j["extractor"] = {
        {"kind", std::string(to_string(ex.kind()))},
        {"input_dim", ex.input_dim()},
        {"output_dim", ex.output_dim()},
        {"frozen", ex.frozen()},
        {"projection", detail::columns_to_json(ex.projection())},
    };
    j["rng_state"] = ckpt.rng_state;
    return j;
}

inline SessionCheckpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "adbs-checkpoint") throw DataError("not an adbs checkpoint");
        if (j.at("version") != kCheckpointVersion) {
            throw DataError("unsupported checkpoint version " + j.at("version").dump());
        }
        SessionCheckpoint ckpt;
        ckpt.session_index = j.at("session_index").get<int>();
        const auto d = j.at("dim").get<std::size_t>();
        const auto C = j.at("num_classes").get<std::size_t>();
        auto& st = ckpt.classifier;
        st.weights = detail::columns_from_json(j.at("weights"), d);
        st.boundaries.m = j.at("boundaries").get<std::vector<double>>();
        st.boundaries.frozen = j.at("frozen").get<std::vector<std::uint8_t>>();
        st.boundaries.clamp_floor = j.at("clamp_floor").get<double>();
        st.session_of = j.at("session_of").get<std::vector<int>>();
        if (st.weights.cols() != C || st.boundaries.size() != C || st.session_of.size() != C) {
            throw DataError("checkpoint class counts disagree");
        }
        st.boundaries.validate();

        const auto& e = j.at("extractor");
        const auto kind = parse_extractor_kind(e.at("kind").get<std::string>());
        const auto d_in = e.at("input_dim").get<std::size_t>();
        const auto d_out = e.at("output_dim").get<std::size_t>();
        ckpt.extractor = FeatureExtractor::restore(kind, d_in, d_out,
                                                   kind == ExtractorKind::identity
                                                       ? Matrix{}
                                                       : detail::columns_from_json(e.at("projection"), d_out),
                                                   e.at("frozen").get<bool>());
        if (ckpt.extractor.input_dim() != d_in || ckpt.extractor.output_dim() != d_out) {
            throw DataError("checkpoint extractor dimensions disagree");
        }
        ckpt.rng_state = j.at("rng_state").get<std::string>();
        return ckpt;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("malformed checkpoint: ") + ex.what());
    }
}

inline void save_checkpoint(const std::string& path, const SessionCheckpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << checkpoint_to_json(ckpt).dump(1) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline SessionCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError("'" + path + "': " + ex.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace adbs
