#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "json.hpp"

#include "adbs/data.hpp"
#include "adbs/embedding.hpp"
#include "adbs/error.hpp"
#include "adbs/rng.hpp"
#include "adbs/train_config.hpp"

namespace adbs {

// Everything a CLI command needs. Read from a flat JSON object; every key
// is optional and unknown keys are rejected. The schema is in README.md.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    ExtractorKind extractor = ExtractorKind::identity;
    std::size_t extractor_dim = 0;  // 0: same as the input dimension

    TrainConfig train;

    std::size_t base_class_count = 10;
    std::size_t num_sessions = 4;
    std::size_t n_way = 2;
    std::size_t k_shot = 5;

    SyntheticSpec synthetic;  // num_classes 0 below means "exactly as many as the sessions need"
    std::size_t num_classes = 0;
    std::string feature_csv;  // when set, replaces synthetic generation
    bool shuffle_classes = false;  // feature files: seeded class-to-session assignment

    std::size_t ablation_seeds = 20;

    std::size_t verify_instances = 1000;
    std::size_t grad_check_configs = 100;
    double grad_check_tolerance = 1e-4;

    SessionSpec session_spec() const {
        SessionSpec s;
        s.base_class_count = base_class_count;
        s.sessions.assign(num_sessions, SessionShape{n_way, k_shot});
        s.seed = substream_seed(seed, "data");
        s.shuffle_classes = shuffle_classes;
        return s;
    }

    // Data is drawn from the "data" sub-stream of the run seed so that the
    // arms of an ablation see identical streams.
    SyntheticSpec synthetic_spec() const {
        SyntheticSpec s = synthetic;
        const std::size_t needed = session_spec().total_classes();
        s.num_classes = num_classes == 0 ? needed : num_classes;
        s.seed = substream_seed(seed, "data");
        return s;
    }

    TrainConfig train_config() const {
        TrainConfig t = train;
        t.seed = seed;
        return t;
    }

    FscilStream make_stream() const {
        if (!feature_csv.empty()) return load_feature_csv(feature_csv, session_spec());
        return generate_synthetic(synthetic_spec(), session_spec());
    }

    FeatureExtractor make_extractor(std::size_t input_dim) const {
        const std::size_t out = extractor_dim == 0 ? input_dim : extractor_dim;
        switch (extractor) {
            case ExtractorKind::identity:
                if (out != input_dim) throw ConfigError("identity extractor cannot change dimension");
                return FeatureExtractor::identity(input_dim);
            case ExtractorKind::random_projection:
                return FeatureExtractor::random_projection(substream_seed(seed, "init"), input_dim, out);
            case ExtractorKind::trainable_linear:
                return FeatureExtractor::trainable_linear(substream_seed(seed, "init"), input_dim, out);
        }
        throw ConfigError("unknown extractor");
    }

    void validate() const {
        train.validate();
        session_spec().validate();
        if (feature_csv.empty()) synthetic_spec().validate();
        if (ablation_seeds == 0) throw ConfigError("ablation_seeds must be >= 1");
        if (verify_instances == 0) throw ConfigError("verify_instances must be >= 1");
        if (grad_check_configs == 0) throw ConfigError("grad_check_configs must be >= 1");
        if (!(grad_check_tolerance >= 0.0)) throw ConfigError("grad_check_tolerance must be >= 0");
    }
};

namespace detail {

template <typename T>
T config_value(const nlohmann::json& v, const std::string& key) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
        return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
        return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
        return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (v.get<long long>() < 0) throw ConfigError("config key '" + key + "' must be >= 0");
        }
        return v.get<T>();
    }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    using Setter = std::function<void(const nlohmann::json&, const std::string&)>;
    auto bind = [](auto& field) -> Setter {
        return [&field](const nlohmann::json& v, const std::string& key) {
            field = detail::config_value<std::remove_reference_t<decltype(field)>>(v, key);
        };
    };
    const std::map<std::string, Setter> keys{
        {"seed", bind(c.seed)},
        {"output_dir", bind(c.output_dir)},
        {"extractor",
         [&c](const nlohmann::json& v, const std::string& key) {
             c.extractor = parse_extractor_kind(detail::config_value<std::string>(v, key));
         }},
        {"extractor_dim", bind(c.extractor_dim)},
        {"alpha", bind(c.train.alpha)},
        {"temperature", bind(c.train.temperature)},
        {"base_epochs", bind(c.train.base_epochs)},
        {"finetune_epochs", bind(c.train.finetune_epochs)},
        {"base_lr", bind(c.train.base_lr)},
        {"boundary_lr", bind(c.train.boundary_lr)},
        {"momentum", bind(c.train.momentum)},
        {"boundary_momentum", bind(c.train.boundary_momentum)},
        {"clamp_floor", bind(c.train.clamp_floor)},
        {"batch_size", bind(c.train.batch_size)},
        {"ablation",
         [&c](const nlohmann::json& v, const std::string& key) {
             c.train.ablation = parse_ablation(detail::config_value<std::string>(v, key));
         }},
        {"base_class_count", bind(c.base_class_count)},
        {"num_sessions", bind(c.num_sessions)},
        {"n_way", bind(c.n_way)},
        {"k_shot", bind(c.k_shot)},
        {"num_classes", bind(c.num_classes)},
        {"dim", bind(c.synthetic.dim)},
        {"samples_per_base_class", bind(c.synthetic.samples_per_base_class)},
        {"test_per_class", bind(c.synthetic.test_per_class)},
        {"center_separation", bind(c.synthetic.center_separation)},
        {"within_class_std", bind(c.synthetic.within_class_std)},
        {"class_std_jitter", bind(c.synthetic.class_std_jitter)},
        {"novel_std_factor", bind(c.synthetic.novel_std_factor)},
        {"feature_csv", bind(c.feature_csv)},
        {"shuffle_classes", bind(c.shuffle_classes)},
        {"ablation_seeds", bind(c.ablation_seeds)},
        {"verify_instances", bind(c.verify_instances)},
        {"grad_check_configs", bind(c.grad_check_configs)},
        {"grad_check_tolerance", bind(c.grad_check_tolerance)},
    };
    for (const auto& [key, value] : j.items()) {
        const auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(value, key);
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("config '" + path + "': " + ex.what());
    }
    RunConfig c = parse_config(j);
    // A relative feature file is looked up next to the config file.
    if (!c.feature_csv.empty() && std::filesystem::path(c.feature_csv).is_relative()) {
        c.feature_csv = (std::filesystem::path(path).parent_path() / c.feature_csv).string();
    }
    return c;
}

}  // namespace adbs
