#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "adbs/boundary_vector.hpp"
#include "adbs/error.hpp"

namespace adbs {

enum class Ablation { fixed_baseline, adb_only, adb_ic };

inline std::string_view to_string(Ablation a) {
    switch (a) {
        case Ablation::fixed_baseline: return "fixed_baseline";
        case Ablation::adb_only: return "adb_only";
        case Ablation::adb_ic: return "adb_ic";
    }
    return "?";
}

inline Ablation parse_ablation(std::string_view s) {
    if (s == "fixed_baseline") return Ablation::fixed_baseline;
    if (s == "adb_only") return Ablation::adb_only;
    if (s == "adb_ic") return Ablation::adb_ic;
    throw ConfigError("unknown ablation '" + std::string(s) + "'");
}

struct TrainConfig {
    double alpha = 0.05;        // weight of the inter-class constraint loss
    double temperature = 16.0;  // logit scale s
    int base_epochs = 20;
    int finetune_epochs = 10;
    double base_lr = 0.002;
    double boundary_lr = 0.005;
    double momentum = 0.9;           // base session
    double boundary_momentum = 0.0;  // incremental fine-tuning
    double clamp_floor = kDefaultClampFloor;
    std::size_t batch_size = 32;
    Ablation ablation = Ablation::adb_ic;
    std::uint64_t seed = 0;

    bool learns_boundaries() const noexcept { return ablation != Ablation::fixed_baseline; }

    // adb_only and fixed_baseline never see the IC term.
    double effective_alpha() const noexcept { return ablation == Ablation::adb_ic ? alpha : 0.0; }

    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError("TrainConfig: " + what); };
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be >= 0");
        if (!(temperature > 0.0) || !std::isfinite(temperature)) fail("temperature must be > 0");
        if (base_epochs < 0) fail("base_epochs must be >= 0");
        if (finetune_epochs < 0) fail("finetune_epochs must be >= 0");
        if (!(base_lr >= 0.0)) fail("base_lr must be >= 0");
        if (!(boundary_lr >= 0.0)) fail("boundary_lr must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0,1)");
        if (!(boundary_momentum >= 0.0 && boundary_momentum < 1.0)) fail("boundary_momentum must be in [0,1)");
        if (!(clamp_floor > 0.0)) fail("clamp_floor must be > 0");
        if (batch_size == 0) fail("batch_size must be >= 1");
    }
};

}  // namespace adbs
