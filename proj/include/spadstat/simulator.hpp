#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "afterpulse.hpp"
#include "errors.hpp"
#include "slots.hpp"
#include "timetags.hpp"
#include "waiting.hpp"

namespace spadstat {

enum class Cause : std::uint8_t { source = 0, dark = 1, afterpulse = 2, coincident = 3 };

inline const char* to_string(Cause c) {
    switch (c) {
        case Cause::source: return "source";
        case Cause::dark: return "dark";
        case Cause::afterpulse: return "afterpulse";
        case Cause::coincident: return "coincident";
    }
    return "?";
}

// tick is the absolute slot index of the detection; consecutive events are
// always more than dead_slots slots apart.
struct LabeledEvent {
    std::uint64_t tick = 0;
    Cause cause = Cause::source;
};

struct StopRule {
    enum class Kind { events, slots };
    Kind kind = Kind::events;
    std::uint64_t target = 0;

    static StopRule by_events(std::uint64_t n) { return {Kind::events, n}; }
    static StopRule by_slots(std::uint64_t n) { return {Kind::slots, n}; }
};

struct SimConfig {
    SlotParams params;
    AfterpulseModel model = NullModel{};
    DeadTime dead;
    std::uint64_t seed = 1;
    StopRule stop = StopRule::by_events(1'000'000);

    void validate() const {
        params.validate();
        spadstat::validate(model);
        dead.validate();
        if (stop.target == 0) throw DomainError("SimConfig: stop target must be positive");
    }
};

namespace detail {

// mt19937_64 with the top 53 bits mapped onto [0,1). The mapping is spelled
// out here (not via uniform_real_distribution, whose output the standard
// does not pin down) so a seed produces the identical stream on every
// platform and standard library.
class Uniform01 {
public:
    explicit Uniform01(std::uint64_t seed) : eng_(seed) {}
    double operator()() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 eng_;
};

// Per-slot afterpulse probabilities tabulated until they stop mattering.
// The cutoff truncates mass below 1e-16 per slot, and the table is capped at
// 4M slots; both are far below anything the estimators can resolve.
inline std::vector<double> ap_table(const AfterpulseModel& model, DeadTime dead,
                                    double slot_width_ps) {
    std::vector<double> t;
    if (is_null(model)) return t;
    constexpr std::int64_t cap = std::int64_t{1} << 22;
    for (std::int64_t i = 1; i <= cap; ++i) {
        const double p = prob_at_slot(model, dead, slot_width_ps, i);
        if (p < 1e-16) break;
        t.push_back(p);
    }
    return t;
}

} // namespace detail

// Exact per-slot Bernoulli sampling of the counting model. Every live slot m
// (counted from the first slot after the dead time) fires with probability
// 1 - e^-mu (1 - P_ad(m)); on a firing the latent composition of the slot is
// recorded as the cause, the dead time is skipped, and the wait restarts.
// The very first event of a stream has no trigger before it, so its wait is
// sampled from the pure Poissonian law and afterpulsing starts after it.
// Once the afterpulse table is exhausted the remaining wait is geometric and
// is drawn in one step; the law is identical to walking slot by slot.
inline std::vector<LabeledEvent> simulate(const SimConfig& cfg) {
    cfg.validate();
    const double mu = cfg.params.mu_total();
    const double mu_s = cfg.params.mu_s;
    const double a = -std::expm1(-mu); // P(at least one Poissonian count in a slot)
    const double em = std::exp(-mu);
    const bool split_poisson = cfg.params.mu_s > 0.0 && cfg.params.mu_d > 0.0;
    const std::vector<double> ap =
        detail::ap_table(cfg.model, cfg.dead, cfg.params.slot_width_ps);
    const auto dead = static_cast<std::uint64_t>(cfg.dead.dead_slots);

    detail::Uniform01 rng(cfg.seed);
    std::vector<LabeledEvent> events;
    if (cfg.stop.kind == StopRule::Kind::events) events.reserve(cfg.stop.target);

    std::uint64_t tick = 0;
    bool first = true;
    for (;;) {
        std::uint64_t m = 1;
        Cause cause = Cause::source;
        bool poisson = false;
        for (;;) {
            const double p = (!first && m - 1 < ap.size()) ? ap[m - 1] : 0.0;
            if (p == 0.0) {
                // afterpulse-free from here on: the wait is geometric in a
                if (a <= 0.0) return events; // nothing can ever fire again
                const double u = rng();
                const double kd = std::log1p(-u) / -mu;
                if (kd >= 9.0e18) throw DomainError("simulate: wait overflows the slot counter");
                const auto k = static_cast<std::uint64_t>(kd) + 1;
                m += k - 1;
                poisson = true;
                break;
            }
            const double f = a + p - a * p;
            const double u = rng();
            if (u < f) {
                // u is uniform on [0,f): split it by the joint composition
                if (u < a * (1.0 - p)) {
                    poisson = true;
                } else if (u < a * (1.0 - p) + p * (1.0 - a)) {
                    cause = Cause::afterpulse;
                } else {
                    cause = Cause::coincident;
                }
                break;
            }
            ++m;
        }
        if (poisson) {
            if (split_poisson)
                cause = (rng() * mu < mu_s) ? Cause::source : Cause::dark;
            else
                cause = cfg.params.mu_s > 0.0 ? Cause::source : Cause::dark;
        }

        const std::uint64_t advance = (first ? 0 : dead) + m;
        if (tick > std::numeric_limits<std::uint64_t>::max() - advance)
            throw DomainError("simulate: tick overflow");
        tick += advance;
        if (cfg.stop.kind == StopRule::Kind::slots && tick > cfg.stop.target) return events;
        events.push_back({tick, cause});
        first = false;
        if (cfg.stop.kind == StopRule::Kind::events && events.size() >= cfg.stop.target)
            return events;
    }
}

// Map slot-indexed events onto a tick lattice. The slot width must be a
// whole multiple of the tick resolution so every timestamp is exact.
inline TimeTagStream to_timetags(const std::vector<LabeledEvent>& events,
                                 double slot_width_ps, std::uint64_t tick_resolution_fs) {
    if (tick_resolution_fs == 0)
        throw DomainError("to_timetags: tick resolution must be positive");
    const std::uint64_t slot_fs = ps_to_fs_exact(slot_width_ps, "to_timetags slot width");
    if (slot_fs % tick_resolution_fs != 0)
        throw DomainError("to_timetags: tick resolution does not divide the slot width");
    const std::uint64_t factor = slot_fs / tick_resolution_fs;
    TimeTagStream s;
    s.tick_resolution_fs = tick_resolution_fs;
    s.ticks.reserve(events.size());
    for (const auto& ev : events) {
        if (factor != 0 && ev.tick > std::numeric_limits<std::uint64_t>::max() / factor)
            throw DomainError("to_timetags: tick overflow");
        s.ticks.push_back(ev.tick * factor);
    }
    return s;
}

} // namespace spadstat
