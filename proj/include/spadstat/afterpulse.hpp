#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "slots.hpp"

namespace spadstat {

// Per-slot afterpulse probability P_a(i): the chance that a carrier trapped
// during the previous detection releases in slot i after that detection.
// Dead time shifts the argument: with dead_slots = d, the first live slot
// sees the bare model at i + d.

struct NullModel {
    void validate() const {}
};

struct ExponentialModel {
    double p_a0 = 0.0;    // amplitude at slot scale 0
    double tau0_ps = 0.0; // de-trapping lifetime

    void validate() const {
        if (!(p_a0 >= 0.0) || !(p_a0 < 1.0))
            throw ModelError("exponential model: p_a0 must lie in [0,1)");
        if (!(tau0_ps > 0.0))
            throw ModelError("exponential model: tau0 must be positive");
    }
};

struct MultiExponentialModel {
    std::vector<std::pair<double, double>> terms; // (amplitude, lifetime_ps)

    void validate() const {
        for (const auto& [a, tau] : terms) {
            if (!(a >= 0.0))
                throw ModelError("multi-exponential model: negative amplitude");
            if (!(tau > 0.0))
                throw ModelError("multi-exponential model: lifetime must be positive");
        }
    }
};

// A * (i + onset)^(-alpha); onset >= 1 keeps slot 1 finite, alpha > 1 keeps
// the series summable.
struct PowerLawModel {
    double amplitude = 0.0;
    double alpha = 2.0;
    std::int64_t onset = 1;

    void validate() const {
        if (!(amplitude >= 0.0))
            throw ModelError("power-law model: negative amplitude");
        if (!(alpha > 1.0))
            throw ModelError("power-law model: alpha must exceed 1");
        if (onset < 1)
            throw ModelError("power-law model: onset must be >= 1");
    }
};

using AfterpulseModel =
    std::variant<NullModel, ExponentialModel, MultiExponentialModel, PowerLawModel>;

inline void validate(const AfterpulseModel& m) {
    std::visit([](const auto& v) { v.validate(); }, m);
}

inline bool is_null(const AfterpulseModel& m) {
    return std::holds_alternative<NullModel>(m);
}

// Dead-time-shifted per-slot probability: slot i is counted from the first
// slot after the dead time, so the bare model is evaluated at i + dead_slots.
inline double prob_at_slot(const AfterpulseModel& m, DeadTime dead, double slot_width_ps,
                           std::int64_t i) {
    if (i < 1) throw DomainError("prob_at_slot: slot index starts at 1");
    dead.validate();
    if (!(slot_width_ps > 0.0))
        throw DomainError("prob_at_slot: slot width must be positive");
    const auto j = static_cast<double>(i + dead.dead_slots);
    const double v = std::visit(
        [&](const auto& model) -> double {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, NullModel>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ExponentialModel>) {
                return model.p_a0 * std::exp(-j * slot_width_ps / model.tau0_ps);
            } else if constexpr (std::is_same_v<T, MultiExponentialModel>) {
                double s = 0.0;
                for (const auto& [a, tau] : model.terms)
                    s += a * std::exp(-j * slot_width_ps / tau);
                return s;
            } else {
                return model.amplitude *
                       std::pow(j + static_cast<double>(model.onset), -model.alpha);
            }
        },
        m);
    if (!(v >= 0.0) || v >= 1.0)
        throw ModelError("prob_at_slot: per-slot probability outside [0,1)");
    return v;
}

// Upper bound on the tail sum of per-slot probabilities beyond slot i
// (shifted indexing). Drives the stopping rules of every series below.
inline double tail_sum_upper(const AfterpulseModel& m, DeadTime dead, double slot_width_ps,
                             std::int64_t i) {
    const auto j = static_cast<double>(i + dead.dead_slots);
    return std::visit(
        [&](const auto& model) -> double {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, NullModel>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ExponentialModel>) {
                const double r = slot_width_ps / model.tau0_ps;
                return model.p_a0 * std::exp(-(j + 1.0) * r) / -std::expm1(-r);
            } else if constexpr (std::is_same_v<T, MultiExponentialModel>) {
                double s = 0.0;
                for (const auto& [a, tau] : model.terms) {
                    const double r = slot_width_ps / tau;
                    s += a * std::exp(-(j + 1.0) * r) / -std::expm1(-r);
                }
                return s;
            } else {
                // integral majorant of the decreasing summand
                const double base = j + static_cast<double>(model.onset);
                return model.amplitude * std::pow(base, 1.0 - model.alpha) /
                       (model.alpha - 1.0);
            }
        },
        m);
}

// Total afterpulse probability of the exponential model, no dead time:
// geometric sum p_a0 q/(1-q) with q = e^(-dt/tau0). Must stay below 1 for
// the model to make sense as a probability.
inline double total_prob(const ExponentialModel& m, double slot_width_ps) {
    m.validate();
    if (!(slot_width_ps > 0.0))
        throw DomainError("total_prob: slot width must be positive");
    const double q = std::exp(-slot_width_ps / m.tau0_ps);
    const double tot = m.p_a0 * q / (1.0 - q);
    if (tot >= 1.0)
        throw ModelError("total_prob: total afterpulse probability reaches 1");
    return tot;
}

// Dead time attenuates the total by e^(-dead_slots*dt/tau0).
inline double total_prob_with_dead(const ExponentialModel& m, DeadTime dead,
                                   double slot_width_ps) {
    dead.validate();
    const double shift =
        static_cast<double>(dead.dead_slots) * slot_width_ps / m.tau0_ps;
    return std::exp(-shift) * total_prob(m, slot_width_ps);
}

// Direct summation of per-slot probabilities for any model; cross-check for
// the closed forms and workhorse for the generic dead-time optimizer.
inline double total_prob_by_summation(const AfterpulseModel& m, DeadTime dead,
                                      double slot_width_ps, double tol = 1e-15) {
    validate(m);
    if (!(tol > 0.0)) throw DomainError("total_prob_by_summation: tolerance must be positive");
    double s = 0.0;
    for (std::int64_t i = 1; i <= 10'000'000; ++i) {
        s += prob_at_slot(m, dead, slot_width_ps, i);
        if (tail_sum_upper(m, dead, slot_width_ps, i) <= tol) return s;
    }
    throw ConvergenceError("total_prob_by_summation: series did not converge within the slot cap");
}

// Smallest whole-slot dead time bringing the total afterpulse probability at
// or below target. Closed form, then nudged to the exact minimal integer to
// absorb floating-point edge cases at the boundary.
inline DeadTime min_dead_time_for_target(const ExponentialModel& m, double slot_width_ps,
                                         double target) {
    if (!(target > 0.0))
        throw DomainError("min_dead_time_for_target: target must be positive");
    const double tot0 = total_prob(m, slot_width_ps);
    if (target >= tot0) return DeadTime{0};
    const double r = slot_width_ps / m.tau0_ps;
    auto n = static_cast<std::int64_t>(std::ceil(std::log(tot0 / target) / r));
    if (n < 1) n = 1;
    while (n > 0 && tot0 * std::exp(-r * static_cast<double>(n - 1)) <= target) --n;
    while (tot0 * std::exp(-r * static_cast<double>(n)) > target) ++n;
    return DeadTime{n};
}

// Generic variant for models without a closed-form total: the total is
// strictly decreasing in the dead time, so bracket then bisect.
inline DeadTime min_dead_time_for_target(const AfterpulseModel& m, double slot_width_ps,
                                         double target, double tol = 1e-15) {
    if (!(target > 0.0))
        throw DomainError("min_dead_time_for_target: target must be positive");
    if (const auto* e = std::get_if<ExponentialModel>(&m))
        return min_dead_time_for_target(*e, slot_width_ps, target);
    auto total_at = [&](std::int64_t n) {
        return total_prob_by_summation(m, DeadTime{n}, slot_width_ps, tol);
    };
    if (total_at(0) <= target) return DeadTime{0};
    std::int64_t hi = 1;
    while (total_at(hi) > target) {
        if (hi > (std::int64_t{1} << 32))
            throw ConvergenceError("min_dead_time_for_target: target unreachable");
        hi *= 2;
    }
    std::int64_t lo = hi / 2; // total(lo) > target, total(hi) <= target
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        (total_at(mid) <= target ? hi : lo) = mid;
    }
    return DeadTime{hi};
}

} // namespace spadstat
