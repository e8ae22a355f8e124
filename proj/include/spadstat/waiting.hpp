#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "afterpulse.hpp"
#include "errors.hpp"
#include "slots.hpp"

namespace spadstat {

// Discrete waiting-time distribution of the first detection after a trigger.
// Indexing convention everywhere in this header: slot 1 is the first slot
// after the dead time elapses; the raw view that counts slots from the
// trigger itself is provided separately as pmf_full_raw_indexed.

inline constexpr std::int64_t kSeriesCap = 10'000'000;

namespace detail {

// Neumaier-compensated accumulator. The cumulative series below can need
// ~3e5 terms at small mu, where a plain running sum drifts by n*eps and
// swamps the 1e-12 truncation tolerance.
struct CompSum {
    double s = 0.0, c = 0.0;
    void add(double v) {
        const double t = s + v;
        c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

} // namespace detail

// (1 - e^-mu) e^{-mu(n-1)}: waiting pmf with no afterpulsing, a geometric law.
inline double pmf_no_afterpulse(const SlotParams& params, std::int64_t n) {
    params.validate();
    if (n < 1) throw DomainError("pmf_no_afterpulse: slot index starts at 1");
    const double mu = params.mu_total();
    if (mu == 0.0) return 0.0;
    return -std::expm1(-mu) * std::exp(-mu * static_cast<double>(n - 1));
}

// Sum_{i=1}^{n-1} ln(1 - P_ad(i)); an empty sum (n = 1) is 0.
inline double residual_term(const AfterpulseModel& model, DeadTime dead,
                            double slot_width_ps, std::int64_t n) {
    if (n < 1) throw DomainError("residual_term: slot index starts at 1");
    double r = 0.0;
    for (std::int64_t i = 1; i < n; ++i)
        r += std::log1p(-prob_at_slot(model, dead, slot_width_ps, i));
    return r;
}

// n -> infinity limit of residual_term. The per-slot probabilities are
// non-increasing, so the magnitude of the remaining terms is bounded by
// tail_sum/(1 - p_next); summation stops once that bound is below tol.
inline double r0_limit(const AfterpulseModel& model, DeadTime dead, double slot_width_ps,
                       double tol = 1e-12) {
    if (!(tol > 0.0)) throw DomainError("r0_limit: tolerance must be positive");
    double r = 0.0;
    for (std::int64_t i = 1; i <= kSeriesCap; ++i) {
        r += std::log1p(-prob_at_slot(model, dead, slot_width_ps, i));
        const double tail = tail_sum_upper(model, dead, slot_width_ps, i);
        const double p_next = prob_at_slot(model, dead, slot_width_ps, i + 1);
        if (tail <= tol * (1.0 - p_next)) return r;
    }
    throw ConvergenceError("r0_limit: residual series did not converge within the slot cap");
}

// ln pmf(n) = ln[1 - e^-mu (1 - P_ad(n))] - mu(n-1) + R(n). This is the
// primary evaluation path; the plain pmf is its exponential, which keeps
// deep tails (n ~ 1e4 at mu ~ 0.05) out of underflow trouble.
inline double log_pmf_full(const SlotParams& params, const AfterpulseModel& model,
                           DeadTime dead, std::int64_t n) {
    params.validate();
    if (n < 1) throw DomainError("log_pmf_full: slot index starts at 1");
    const double mu = params.mu_total();
    const double p_n = prob_at_slot(model, dead, params.slot_width_ps, n);
    const double lead = -std::expm1(-mu) + std::exp(-mu) * p_n;
    if (!(lead > 0.0)) throw DomainError("log_pmf_full: zero probability");
    return std::log(lead) - mu * static_cast<double>(n - 1) +
           residual_term(model, dead, params.slot_width_ps, n);
}

inline double pmf_full(const SlotParams& params, const AfterpulseModel& model,
                       DeadTime dead, std::int64_t n) {
    params.validate();
    if (n < 1) throw DomainError("pmf_full: slot index starts at 1");
    const double mu = params.mu_total();
    const double p_n = prob_at_slot(model, dead, params.slot_width_ps, n);
    const double lead = -std::expm1(-mu) + std::exp(-mu) * p_n;
    if (lead <= 0.0) return 0.0;
    return std::exp(std::log(lead) - mu * static_cast<double>(n - 1) +
                    residual_term(model, dead, params.slot_width_ps, n));
}

// Raw view: slots counted from the trigger itself. The dead slots cannot
// fire, and slot n > dead_slots equals the shifted pmf at n - dead_slots.
inline double pmf_full_raw_indexed(const SlotParams& params, const AfterpulseModel& model,
                                   DeadTime dead, std::int64_t n) {
    if (n < 1) throw DomainError("pmf_full_raw_indexed: slot index starts at 1");
    if (n <= dead.dead_slots) return 0.0;
    return pmf_full(params, model, dead, n - dead.dead_slots);
}

// The log-linear asymptote of the waiting pmf: -mu n + c_delta.
inline double linear_tail(double mu, double c_delta, std::int64_t n) {
    if (n < 1) throw DomainError("linear_tail: slot index starts at 1");
    return -mu * static_cast<double>(n) + c_delta;
}

// Intercept constant of the asymptote for a fully specified model:
// c_delta = ln(1 - e^-mu) + mu + R0.
inline double tail_intercept(const SlotParams& params, const AfterpulseModel& model,
                             DeadTime dead, double tol = 1e-12) {
    params.validate();
    const double mu = params.mu_total();
    if (!(mu > 0.0)) throw DomainError("tail_intercept: mu_total must be positive");
    return std::log(-std::expm1(-mu)) + mu +
           r0_limit(model, dead, params.slot_width_ps, tol);
}

// Bulk evaluation of the waiting pmf for n = 1..size in one O(size) pass;
// the running residual sum replaces per-slot O(n) products. survival is the
// analytic mass beyond size: exp(-mu*size + R(size+1)).
class WaitingPmf {
public:
    WaitingPmf(const SlotParams& params, const AfterpulseModel& model, DeadTime dead,
               std::size_t size) {
        params.validate();
        validate(model);
        dead.validate();
        const double mu = params.mu_total();
        const double a = -std::expm1(-mu);
        const double em = std::exp(-mu);
        values_.reserve(size);
        double rsum = 0.0; // R(n): residual sum up to slot n-1
        for (std::size_t n = 1; n <= size; ++n) {
            const double p =
                prob_at_slot(model, dead, params.slot_width_ps, static_cast<std::int64_t>(n));
            const double lead = a + em * p;
            values_.push_back(lead <= 0.0
                                  ? 0.0
                                  : std::exp(std::log(lead) -
                                             mu * static_cast<double>(n - 1) + rsum));
            rsum += std::log1p(-p);
        }
        survival_ = std::exp(-mu * static_cast<double>(size) + rsum);
    }

    const std::vector<double>& values() const { return values_; }
    double survival() const { return survival_; }

    double sum() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s;
    }

private:
    std::vector<double> values_;
    double survival_ = 1.0;
};

// Bracketing of the Poissonian share of the waiting pmf.
//   upper:          drop the chance of an afterpulse in slot n itself
//   lower:          additionally forbid an afterpulse in slot n
//   lower_of_lower: push the residual product all the way to its limit R0
struct WaitingBounds {
    double lower = 0.0;
    double lower_of_lower = 0.0;
    double upper = 0.0;
};

inline WaitingBounds poissonian_waiting_bounds(const SlotParams& params,
                                               const AfterpulseModel& model, DeadTime dead,
                                               std::int64_t n, double tol = 1e-12) {
    params.validate();
    if (n < 1) throw DomainError("poissonian_waiting_bounds: slot index starts at 1");
    const double mu = params.mu_total();
    const double a = -std::expm1(-mu);
    const double rn = residual_term(model, dead, params.slot_width_ps, n);
    const double p_n = prob_at_slot(model, dead, params.slot_width_ps, n);
    const double r0 = r0_limit(model, dead, params.slot_width_ps, tol);
    WaitingBounds b;
    b.upper = a * std::exp(-mu * static_cast<double>(n - 1) + rn);
    b.lower = (1.0 - p_n) * b.upper;
    b.lower_of_lower = a * std::exp(-mu * static_cast<double>(n - 1) + r0);
    return b;
}

// A nonnegative value that had to be clamped keeps a record of the fact;
// clamping is never silent.
struct ClampedValue {
    double value = 0.0;
    bool clamped = false;
};

// Upper bound on the probability that the first event in slot n is (or
// contains) an afterpulse: pmf(n) minus the lower-of-lower Poissonian bound.
inline ClampedValue afterpulse_waiting_upper(const SlotParams& params,
                                             const AfterpulseModel& model, DeadTime dead,
                                             std::int64_t n, double tol = 1e-12) {
    const double mu = params.mu_total();
    const double a = -std::expm1(-mu);
    const double r0 = r0_limit(model, dead, params.slot_width_ps, tol);
    const double v = pmf_full(params, model, dead, n) -
                     a * std::exp(-mu * static_cast<double>(n - 1) + r0);
    if (v < 0.0) return {0.0, true};
    return {v, false};
}

// Fitted-curve variant: empirical pmf estimate minus the fitted tail line.
inline ClampedValue afterpulse_waiting_upper(double pmf_hat, double mu_hat,
                                             double c_delta_hat, std::int64_t n) {
    if (n < 1) throw DomainError("afterpulse_waiting_upper: slot index starts at 1");
    const double v = pmf_hat - std::exp(linear_tail(mu_hat, c_delta_hat, n));
    if (v < 0.0) return {0.0, true};
    return {v, false};
}

// Model-free afterpulsing bounds derived from the residual limit, plus the
// cumulative series bounds on "the first recorded event is Poissonian".
// When the set comes from a fitted tail rather than a model, the cumulative
// fields stay zero (they need the full model) and clamped records whether a
// positive fitted r0 was clipped.
struct BoundSet {
    double r0_delta = 0.0;
    double pa_upper = 0.0;                 // 1 - e^{r0_delta}
    double n_ap_per_trigger_upper = 0.0;   // e^{-r0_delta} - 1
    double cum_sd_lower = 0.0;             // series lower bound on P(first event Poissonian)
    double cum_sd_upper = 0.0;             // series upper bound on the same
    double pa_cum_lower = 0.0;             // 1 - cum_sd_upper
    double pa_cum_upper = 0.0;             // 1 - cum_sd_lower
    bool clamped = false;
    std::vector<double> per_slot_ap_upper; // optional per-slot profile
};

inline BoundSet cumulative_bounds(const SlotParams& params, const AfterpulseModel& model,
                                  DeadTime dead, double tol = 1e-12,
                                  std::size_t per_slot_len = 0) {
    params.validate();
    validate(model);
    const double mu = params.mu_total();
    if (!(mu > 0.0)) throw DomainError("cumulative_bounds: mu_total must be positive");
    const double r0 = r0_limit(model, dead, params.slot_width_ps, tol);
    const double a = -std::expm1(-mu);

    double rsum = 0.0, tail = 0.0;
    detail::CompSum lower_sum, upper_sum;
    bool converged = false;
    for (std::int64_t n = 1; n <= kSeriesCap; ++n) {
        const double p = prob_at_slot(model, dead, params.slot_width_ps, n);
        const double up = a * std::exp(-mu * static_cast<double>(n - 1) + rsum);
        upper_sum.add(up);
        lower_sum.add((1.0 - p) * up);
        rsum += std::log1p(-p);
        tail = std::exp(-mu * static_cast<double>(n) + rsum);
        if (tail <= tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("cumulative_bounds: series did not converge within the slot cap");
    upper_sum.add(tail); // keep the truncated upper series a true upper bound

    BoundSet b;
    b.r0_delta = r0;
    b.pa_upper = -std::expm1(r0);
    b.n_ap_per_trigger_upper = std::expm1(-r0);
    b.cum_sd_lower = lower_sum.value();
    b.cum_sd_upper = upper_sum.value();
    b.pa_cum_lower = 1.0 - b.cum_sd_upper;
    b.pa_cum_upper = 1.0 - b.cum_sd_lower;

    // ordering that must hold for any valid model: e^{r0} <= lower <= upper <= 1
    const double slack = 1e-9;
    if (std::exp(r0) > b.cum_sd_lower + slack || b.cum_sd_lower > b.cum_sd_upper + slack ||
        b.cum_sd_upper > 1.0 + slack)
        throw Error("cumulative_bounds: bound ordering violated");

    if (per_slot_len > 0) {
        b.per_slot_ap_upper.reserve(per_slot_len);
        for (std::size_t n = 1; n <= per_slot_len; ++n)
            b.per_slot_ap_upper.push_back(
                afterpulse_waiting_upper(params, model, dead,
                                         static_cast<std::int64_t>(n), tol)
                    .value);
    }
    return b;
}

// Per-slot gap between the upper and lower waiting bounds: the probability
// that the first event in slot n carries both a Poissonian count and an
// afterpulse, i.e. the indistinguishable case that the bounds cannot split.
struct ErrorSeries {
    std::vector<double> per_slot;
    double total = 0.0;
};

inline ErrorSeries bound_error_series(const SlotParams& params, const AfterpulseModel& model,
                                      DeadTime dead, double tol = 1e-12) {
    params.validate();
    validate(model);
    if (!(tol > 0.0)) throw DomainError("bound_error_series: tolerance must be positive");
    const double mu = params.mu_total();
    ErrorSeries es;
    if (mu == 0.0) return es; // no Poissonian events, no coincidences
    const double a = -std::expm1(-mu);
    double rsum = 0.0;
    for (std::int64_t n = 1; n <= kSeriesCap; ++n) {
        const double p = prob_at_slot(model, dead, params.slot_width_ps, n);
        const double e_n = a * std::exp(-mu * static_cast<double>(n - 1) + rsum) * p;
        es.per_slot.push_back(e_n);
        es.total += e_n;
        rsum += std::log1p(-p);
        const double tail =
            std::min(std::exp(-mu * static_cast<double>(n) + rsum),
                     tail_sum_upper(model, dead, params.slot_width_ps, n));
        if (tail <= tol) return es;
    }
    throw ConvergenceError("bound_error_series: series did not converge within the slot cap");
}

} // namespace spadstat
