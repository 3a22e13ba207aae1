#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gkd {

// Per-row selection flag, 1 = selected.
using Mask = std::vector<std::uint8_t>;

inline std::size_t mask_count(const Mask& mask) {
    std::size_t n = 0;
    for (auto v : mask) n += (v != 0);
    return n;
}

inline std::vector<std::size_t> mask_indices(const Mask& mask) {
    std::vector<std::size_t> idx;
    idx.reserve(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) idx.push_back(i);
    }
    return idx;
}

inline Mask full_mask(std::size_t n) { return Mask(n, 1); }

inline Mask invert_mask(const Mask& mask) {
    Mask out(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 0 : 1;
    return out;
}

} // namespace gkd
