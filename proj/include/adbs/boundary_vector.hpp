#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "adbs/error.hpp"

namespace adbs {

inline constexpr double kDefaultClampFloor = 1e-3;

// Per-class decision-boundary scalars m_c. frozen[c] marks entries that the
// current session must not touch.
struct BoundaryVector {
    std::vector<double> m;
    std::vector<std::uint8_t> frozen;
    double clamp_floor = kDefaultClampFloor;

    std::size_t size() const noexcept { return m.size(); }
    bool empty() const noexcept { return m.empty(); }
    bool is_frozen(std::size_t c) const { return frozen.at(c) != 0; }

    void validate() const {
        if (frozen.size() != m.size()) throw ProtocolError("BoundaryVector: mask/size mismatch");
        if (!(clamp_floor > 0.0)) throw ProtocolError("BoundaryVector: clamp_floor must be > 0");
        for (std::size_t c = 0; c < m.size(); ++c) {
            if (!(m[c] >= clamp_floor)) {
                throw ProtocolError("BoundaryVector: m[" + std::to_string(c) + "] below clamp floor");
            }
        }
    }

    bool operator==(const BoundaryVector&) const = default;
};

}  // namespace adbs
