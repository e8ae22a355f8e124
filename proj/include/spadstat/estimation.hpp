#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "histogram.hpp"
#include "waiting.hpp"

namespace spadstat {

// Tail regression result. mu_hat is per slot (dimensionless); slot_width_ps
// carries the bin width of the source histogram so downstream consumers can
// convert to rates and check that two fits share a time base.
struct TailFitResult {
    double mu_hat = 0.0;
    double c_delta_hat = 0.0;
    std::int64_t window_lo_slot = 0;
    std::int64_t window_hi_slot = 0;
    double residual_rms = 0.0;
    std::size_t bins_used = 0;
    double slot_width_ps = 0.0;
};

namespace detail {

struct OlsLine {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

inline OlsLine ols(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& w) {
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xbar = sx / sw, ybar = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
        sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
    }
    if (!(sxx > 0.0)) throw FitError("ols: degenerate abscissa");
    OlsLine line;
    line.slope = sxy / sxx;
    line.intercept = ybar - line.slope * xbar;
    double sr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (line.intercept + line.slope * x[i]);
        sr += w[i] * r * r;
    }
    line.rms = std::sqrt(sr / sw);
    return line;
}

// window [t_lo, t_hi] in time maps onto whole bins: the first bin starting
// at or after t_lo through the last bin ending at or before t_hi.
inline std::pair<std::int64_t, std::int64_t> window_to_bins(const InterArrivalHistogram& h,
                                                            double t_lo_ps, double t_hi_ps) {
    const double w = h.bin_width_ps;
    auto n_lo = static_cast<std::int64_t>(std::floor(t_lo_ps / w + 1e-9)) + 1;
    auto n_hi = static_cast<std::int64_t>(std::floor(t_hi_ps / w + 1e-9));
    if (n_lo < 1) n_lo = 1;
    const auto max_bin = static_cast<std::int64_t>(h.counts.size());
    if (n_hi > max_bin) n_hi = max_bin;
    return {n_lo, n_hi};
}

} // namespace detail

// Ordinary least squares of ln P_hat(n) against the bin index n over the
// non-empty bins inside the window. Empty bins are skipped, never imputed;
// counts are normalized by total_intervals first, so the intercept lives on
// the pmf scale. The optional count-weighted mode weights each bin by its
// count instead of equally.
inline TailFitResult fit_tail(const InterArrivalHistogram& h, double t_lo_ps, double t_hi_ps,
                              bool count_weighted = false) {
    if (h.total_intervals == 0) throw FitError("fit_tail: empty histogram");
    const auto [n_lo, n_hi] = detail::window_to_bins(h, t_lo_ps, t_hi_ps);
    std::vector<double> x, y, w;
    for (std::int64_t n = n_lo; n <= n_hi; ++n) {
        const std::uint64_t c = h.counts[static_cast<std::size_t>(n - 1)];
        if (c == 0) continue;
        x.push_back(static_cast<double>(n));
        y.push_back(std::log(static_cast<double>(c) /
                             static_cast<double>(h.total_intervals)));
        w.push_back(count_weighted ? static_cast<double>(c) : 1.0);
    }
    if (x.size() < 2)
        throw FitError("fit_tail: window holds fewer than two non-empty bins");
    const auto line = detail::ols(x, y, w);
    TailFitResult fit;
    fit.mu_hat = -line.slope;
    fit.c_delta_hat = line.intercept;
    fit.window_lo_slot = n_lo;
    fit.window_hi_slot = n_hi;
    fit.residual_rms = line.rms;
    fit.bins_used = x.size();
    fit.slot_width_ps = h.bin_width_ps;
    if (!(fit.mu_hat > 0.0))
        throw FitError("fit_tail: non-positive slope (wrong window or pathological data)");
    return fit;
}

// Model-free afterpulsing bounds from a fitted tail: the residual limit is
// whatever intercept excess the fit left over the afterpulse-free line. A
// positive fitted r0 is a downward statistical fluctuation; the bounds are
// clamped to zero and the clamp is recorded.
inline BoundSet bound_afterpulsing(const TailFitResult& fit) {
    if (!(fit.mu_hat > 0.0)) throw DomainError("bound_afterpulsing: mu_hat must be positive");
    const double r0 =
        fit.c_delta_hat - std::log(-std::expm1(-fit.mu_hat)) - fit.mu_hat;
    BoundSet b;
    b.r0_delta = r0;
    if (r0 > 0.0) {
        b.pa_upper = 0.0;
        b.n_ap_per_trigger_upper = 0.0;
        b.clamped = true;
    } else {
        b.pa_upper = -std::expm1(r0);
        b.n_ap_per_trigger_upper = std::expm1(-r0);
    }
    return b;
}

struct TauSweepResult {
    std::vector<double> taus_ps;
    std::vector<double> pa_upper;    // NaN where the fit failed
    std::vector<std::string> notes;  // per-tau failure text, empty when fine
    double plateau_tau_ps = 0.0;
    bool has_plateau = false;
};

// Re-run the tail fit with the window start swept over tau candidates. The
// bound should inflate while afterpulsing still contaminates the window and
// settle once the window is clean; the plateau is called at the first
// candidate from which the bound changes by less than 1% across three
// consecutive candidates. Individual fit failures are recorded, not fatal.
inline TauSweepResult sweep_tau(const InterArrivalHistogram& h,
                                const std::vector<double>& tau_candidates_ps,
                                double t_hi_ps) {
    if (tau_candidates_ps.size() < 3)
        throw DomainError("sweep_tau: need at least three candidates");
    for (std::size_t i = 1; i < tau_candidates_ps.size(); ++i)
        if (!(tau_candidates_ps[i] > tau_candidates_ps[i - 1]))
            throw DomainError("sweep_tau: candidates must be strictly increasing");

    TauSweepResult r;
    r.taus_ps = tau_candidates_ps;
    r.pa_upper.resize(tau_candidates_ps.size(),
                      std::numeric_limits<double>::quiet_NaN());
    r.notes.resize(tau_candidates_ps.size());
    for (std::size_t i = 0; i < tau_candidates_ps.size(); ++i) {
        try {
            const auto fit = fit_tail(h, tau_candidates_ps[i], t_hi_ps);
            r.pa_upper[i] = bound_afterpulsing(fit).pa_upper;
        } catch (const Error& e) {
            r.notes[i] = e.what();
        }
    }
    auto rel_change = [&](std::size_t k) {
        return std::abs(r.pa_upper[k] - r.pa_upper[k - 1]) /
               std::max(std::abs(r.pa_upper[k - 1]), 1e-12);
    };
    for (std::size_t j = 0; j + 2 < r.pa_upper.size(); ++j) {
        if (std::isnan(r.pa_upper[j]) || std::isnan(r.pa_upper[j + 1]) ||
            std::isnan(r.pa_upper[j + 2]))
            continue;
        if (rel_change(j + 1) < 0.01 && rel_change(j + 2) < 0.01) {
            r.plateau_tau_ps = r.taus_ps[j];
            r.has_plateau = true;
            break;
        }
    }
    return r;
}

struct ExpFitResult {
    double p_a0_hat = 0.0;
    double tau0_hat_ps = 0.0;
    double objective_value = 0.0;
    bool at_boundary = false;
    int iterations = 0;
};

namespace detail {

// Nelder-Mead on R^2, log-parameter space. Small and derivative-free; the
// coarse grid in fit_exponential picks the basin, this polishes it.
template <typename F>
inline std::pair<std::array<double, 2>, double> nelder_mead2(F f, std::array<double, 2> x0,
                                                             double step, double rel_tol,
                                                             int max_iter, int& iters) {
    using Pt = std::array<double, 2>;
    struct V {
        Pt x;
        double fx;
    };
    std::array<V, 3> s;
    s[0] = {x0, f(x0)};
    for (int i = 0; i < 2; ++i) {
        Pt p = x0;
        p[static_cast<std::size_t>(i)] += step;
        s[static_cast<std::size_t>(i + 1)] = {p, f(p)};
    }
    auto order = [&] {
        std::sort(s.begin(), s.end(), [](const V& a, const V& b) { return a.fx < b.fx; });
    };
    order();
    for (iters = 0; iters < max_iter; ++iters) {
        const double span = std::abs(s[2].fx - s[0].fx);
        if (span <= rel_tol * (std::abs(s[0].fx) + rel_tol)) break;
        const Pt c{(s[0].x[0] + s[1].x[0]) / 2, (s[0].x[1] + s[1].x[1]) / 2};
        auto at = [&](double t) {
            return Pt{c[0] + t * (c[0] - s[2].x[0]), c[1] + t * (c[1] - s[2].x[1])};
        };
        const Pt xr = at(1.0);
        const double fr = f(xr);
        if (fr < s[0].fx) {
            const Pt xe = at(2.0);
            const double fe = f(xe);
            s[2] = fe < fr ? V{xe, fe} : V{xr, fr};
        } else if (fr < s[1].fx) {
            s[2] = {xr, fr};
        } else {
            const Pt xc = at(fr < s[2].fx ? 0.5 : -0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, s[2].fx)) {
                s[2] = {xc, fc};
            } else {
                for (int i = 1; i < 3; ++i) {
                    auto& v = s[static_cast<std::size_t>(i)];
                    v.x = {(v.x[0] + s[0].x[0]) / 2, (v.x[1] + s[0].x[1]) / 2};
                    v.fx = f(v.x);
                }
            }
        }
        order();
    }
    return {s[0].x, s[0].fx};
}

} // namespace detail

// Fit the exponential afterpulse model to the head of the histogram with the
// tail slope held fixed: minimize the squared gap between ln P_hat(n) and
// the model's log pmf over (p_a0, tau0), coarse log-spaced grid first, then
// derivative-free refinement. The model is evaluated in bin coordinates
// (dead time zero), matching the fitted tail's convention.
inline ExpFitResult fit_exponential(const InterArrivalHistogram& h, const TailFitResult& tail,
                                    double region_hi_ps) {
    if (h.total_intervals == 0) throw FitError("fit_exponential: empty histogram");
    if (!(tail.mu_hat > 0.0)) throw DomainError("fit_exponential: tail mu_hat must be positive");
    const auto [n_lo, n_hi] = detail::window_to_bins(h, 0.0, region_hi_ps);
    std::vector<double> xs, ys;
    for (std::int64_t n = n_lo; n <= n_hi; ++n) {
        const std::uint64_t c = h.counts[static_cast<std::size_t>(n - 1)];
        if (c == 0) continue;
        xs.push_back(static_cast<double>(n));
        ys.push_back(std::log(static_cast<double>(c) /
                              static_cast<double>(h.total_intervals)));
    }
    if (xs.size() < 3) throw FitError("fit_exponential: degenerate region");

    const double mu = tail.mu_hat;
    const double a = -std::expm1(-mu);
    const double em = std::exp(-mu);
    const auto max_n = static_cast<std::int64_t>(xs.back());

    const double lp_lo = std::log(1e-4), lp_hi = std::log(0.99);
    const double lt_lo = std::log(h.bin_width_ps), lt_hi = std::log(1e8); // up to 100 us

    auto objective = [&](std::array<double, 2> lv) -> double {
        if (lv[0] < lp_lo - 1e-12 || lv[0] > lp_hi + 1e-12) return 1e100;
        if (lv[1] < lt_lo - 1e-12 || lv[1] > lt_hi + 1e-12) return 1e100;
        const double p0 = std::exp(lv[0]);
        const double r = h.bin_width_ps / std::exp(lv[1]); // slot width / tau0
        double rsum = 0.0, obj = 0.0;
        std::size_t k = 0;
        for (std::int64_t n = 1; n <= max_n; ++n) {
            const double p = p0 * std::exp(-r * static_cast<double>(n));
            if (p >= 1.0) return 1e100;
            if (k < xs.size() && xs[k] == static_cast<double>(n)) {
                const double model =
                    std::log(a + em * p) - mu * static_cast<double>(n - 1) + rsum;
                const double d = ys[k] - model;
                obj += d * d;
                ++k;
            }
            rsum += std::log1p(-p);
        }
        return obj;
    };

    // coarse grid over the full box, log-spaced in both directions
    std::array<double, 2> best{0, 0};
    double best_f = std::numeric_limits<double>::infinity();
    constexpr int grid = 24;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const std::array<double, 2> v{lp_lo + (lp_hi - lp_lo) * i / (grid - 1),
                                          lt_lo + (lt_hi - lt_lo) * j / (grid - 1)};
            const double fv = objective(v);
            if (fv < best_f) {
                best_f = fv;
                best = v;
            }
        }
    }
    if (!std::isfinite(best_f)) throw FitError("fit_exponential: no admissible model in the box");

    int iters = 0;
    auto [xmin, fmin] =
        detail::nelder_mead2(objective, best, 0.15, 1e-6, 500, iters);

    ExpFitResult r;
    r.p_a0_hat = std::exp(xmin[0]);
    r.tau0_hat_ps = std::exp(xmin[1]);
    r.objective_value = fmin;
    r.iterations = iters;
    const double edge = 1e-3;
    r.at_boundary = xmin[0] < lp_lo + edge || xmin[0] > lp_hi - edge ||
                    xmin[1] < lt_lo + edge || xmin[1] > lt_hi - edge;
    return r;
}

struct RateSeparation {
    double mu_s_hat = 0.0;
    double mu_d_hat = 0.0;
    bool clamped = false;
};

// Two-step dark/light separation: the dark run pins mu_d, the lit run pins
// the total, the source share is the difference. A negative difference is a
// fluctuation (or swapped arguments); it is clamped and flagged.
inline RateSeparation separate_rates(const TailFitResult& fit_dark,
                                     const TailFitResult& fit_light) {
    if (!(fit_dark.mu_hat > 0.0) || !(fit_light.mu_hat > 0.0))
        throw DomainError("separate_rates: fits must carry positive mu_hat");
    if (std::abs(fit_dark.slot_width_ps - fit_light.slot_width_ps) >
        1e-9 * std::max(fit_dark.slot_width_ps, fit_light.slot_width_ps))
        throw DomainError("separate_rates: fits use different slot widths");
    RateSeparation s;
    s.mu_d_hat = fit_dark.mu_hat;
    s.mu_s_hat = fit_light.mu_hat - fit_dark.mu_hat;
    if (s.mu_s_hat < 0.0) {
        s.mu_s_hat = 0.0;
        s.clamped = true;
    }
    return s;
}

struct EfficiencyEstimate {
    double eta = 0.0;
    double mu_s_hat = 0.0;
    double mu_d_hat = 0.0;
    double source_rate_hz = 0.0; // independently measured photon rate at the detector
    bool clamped = false;
};

inline EfficiencyEstimate estimate_efficiency(double mu_s_hat, double mu_d_hat,
                                              double slot_width_ps, double source_rate_hz) {
    if (!(source_rate_hz > 0.0))
        throw DomainError("estimate_efficiency: source rate must be positive");
    if (!(slot_width_ps > 0.0))
        throw DomainError("estimate_efficiency: slot width must be positive");
    if (!(mu_s_hat >= 0.0)) throw DomainError("estimate_efficiency: mu_s_hat must be >= 0");
    EfficiencyEstimate e;
    e.mu_s_hat = mu_s_hat;
    e.mu_d_hat = mu_d_hat;
    e.source_rate_hz = source_rate_hz;
    e.eta = mu_s_hat / (slot_width_ps * 1e-12 * source_rate_hz);
    if (e.eta > 1.0) {
        e.eta = 1.0;
        e.clamped = true;
    }
    return e;
}

// Per-bin upper bound on the afterpulse waiting probability: the empirical
// pmf estimate minus the fitted tail line, clamped at zero bin by bin.
struct ExcessProfile {
    std::vector<double> values;
    std::vector<bool> clamped;
};

inline ExcessProfile afterpulse_excess(const InterArrivalHistogram& h,
                                       const TailFitResult& fit) {
    if (!(fit.mu_hat > 0.0)) throw DomainError("afterpulse_excess: mu_hat must be positive");
    ExcessProfile e;
    e.values.reserve(h.counts.size());
    e.clamped.reserve(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double p_hat =
            h.total_intervals == 0
                ? 0.0
                : static_cast<double>(h.counts[i]) / static_cast<double>(h.total_intervals);
        const auto n = static_cast<std::int64_t>(i + 1);
        const auto cv = afterpulse_waiting_upper(p_hat, fit.mu_hat, fit.c_delta_hat, n);
        e.values.push_back(cv.value);
        e.clamped.push_back(cv.clamped);
    }
    return e;
}

} // namespace spadstat
