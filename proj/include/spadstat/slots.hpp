#pragma once

#include <cmath>
#include <cstdint>

#include "errors.hpp"

namespace spadstat {

// Per-slot Poissonian means and the slot width. The means are dimensionless
// (expected events per slot); every conversion to a rate goes through
// slot_width_ps so no second time unit can leak in.
struct SlotParams {
    double mu_s = 0.0;          // expected detected source photons per slot
    double mu_d = 0.0;          // expected dark counts per slot
    double slot_width_ps = 0.0; // slot duration in picoseconds

    double mu_total() const { return mu_s + mu_d; }

    // probability that at least one Poissonian event lands in a slot
    double p_poisson_slot() const { return -std::expm1(-mu_total()); }

    void validate() const {
        if (!(mu_s >= 0.0) || !(mu_d >= 0.0))
            throw DomainError("SlotParams: per-slot means must be >= 0");
        if (!(slot_width_ps > 0.0))
            throw DomainError("SlotParams: slot width must be positive");
    }
};

inline SlotParams slot_params_from_rates(double rate_source_hz, double rate_dark_hz,
                                         double slot_width_ps) {
    SlotParams p;
    p.slot_width_ps = slot_width_ps;
    const double dt_s = slot_width_ps * 1e-12;
    p.mu_s = rate_source_hz * dt_s;
    p.mu_d = rate_dark_hz * dt_s;
    p.validate();
    return p;
}

// Dead time quantized to whole slots; its duration is dead_slots * slot width
// exactly, never a fraction of a slot.
struct DeadTime {
    std::int64_t dead_slots = 0;

    double tau_delta_ps(double slot_width_ps) const {
        return static_cast<double>(dead_slots) * slot_width_ps;
    }

    void validate() const {
        if (dead_slots < 0) throw DomainError("DeadTime: dead_slots must be >= 0");
    }
};

// Fractional requests round up: a longer dead time only suppresses
// afterpulsing further, so rounding up is the conservative direction.
inline DeadTime dead_time_from_duration(double tau_delta_ps, double slot_width_ps) {
    if (!(slot_width_ps > 0.0))
        throw DomainError("dead_time_from_duration: slot width must be positive");
    if (!(tau_delta_ps >= 0.0))
        throw DomainError("dead_time_from_duration: negative duration");
    auto n = static_cast<std::int64_t>(std::ceil(tau_delta_ps / slot_width_ps - 1e-9));
    if (n < 0) n = 0;
    return DeadTime{n};
}

} // namespace spadstat
