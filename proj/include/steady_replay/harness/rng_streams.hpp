#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "steady_replay/env.hpp"

namespace steady_replay {

/// Independent generator per (master seed, stream name); reordering draws on one stream never shifts another.
inline Rng make_stream(std::uint64_t master_seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

inline std::uint64_t draw_seed(Rng& rng) { return rng(); }

}  // namespace steady_replay
