#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"

namespace spadstat {

// Detection timestamps as integer ticks at a declared resolution. The
// resolution is kept in femtoseconds so that both coarse (100 ns) and fine
// (82 ps, 1 ps) hardware lattices are exact integers.
struct TimeTagStream {
    std::uint64_t tick_resolution_fs = 0;
    std::vector<std::uint64_t> ticks; // strictly increasing

    void validate() const {
        if (tick_resolution_fs == 0)
            throw DomainError("TimeTagStream: tick resolution must be positive");
        for (std::size_t k = 1; k < ticks.size(); ++k)
            if (ticks[k] <= ticks[k - 1])
                throw DataError("TimeTagStream: ticks not strictly increasing at index " +
                                    std::to_string(k),
                                20 + 8 * static_cast<std::uint64_t>(k));
    }
};

inline constexpr std::uint64_t kFsPerPs = 1000;

// Round a picosecond duration to whole femtoseconds; everything that feeds
// integer tick arithmetic must sit exactly on the femtosecond lattice.
inline std::uint64_t ps_to_fs_exact(double ps, const char* what) {
    if (!(ps > 0.0)) throw DomainError(std::string(what) + ": duration must be positive");
    const double fs = ps * static_cast<double>(kFsPerPs);
    const auto rounded = static_cast<std::uint64_t>(fs + 0.5);
    if (rounded == 0 || std::abs(fs - static_cast<double>(rounded)) > 1e-6)
        throw DomainError(std::string(what) + ": duration is not a whole femtosecond count");
    return rounded;
}

} // namespace spadstat
