// End-to-end walkthrough: simulate a detector with known afterpulsing,
// histogram the inter-arrival times, fit the Poissonian tail, bound the
// afterpulsing, and pick a dead time that would suppress it below 1%.

#include <cstdio>

#include <spadstat/spadstat.hpp>

int main() {
    using namespace spadstat;

    SimConfig cfg;
    cfg.params = slot_params_from_rates(15'000.0, 2'000.0, 1e5); // 100 ns slots
    cfg.model = ExponentialModel{0.03, 1.66e6};                  // 3%, 1.66 us
    cfg.dead = DeadTime{1};
    cfg.seed = 7;
    cfg.stop = StopRule::by_events(500'000);

    std::printf("simulating %llu events (mu=%.3g per slot, exp afterpulsing)...\n",
                static_cast<unsigned long long>(cfg.stop.target),
                cfg.params.mu_total());
    const auto events = simulate(cfg);

    std::uint64_t n_ap = 0;
    for (const auto& ev : events)
        if (ev.cause == Cause::afterpulse || ev.cause == Cause::coincident) ++n_ap;
    std::printf("ground truth: %llu of %zu events are afterpulse-involved (%.4f)\n",
                static_cast<unsigned long long>(n_ap), events.size(),
                static_cast<double>(n_ap) / static_cast<double>(events.size()));

    const auto tags = to_timetags(events, cfg.params.slot_width_ps, 100'000); // 100 ps ticks
    const auto hist = build_histogram(tags, 1e5, 2e7); // 100 ns bins out to 20 us

    const auto fit = fit_tail(hist, 5e6, 2e7); // fit the clean tail, 5..20 us
    std::printf("tail fit: mu_hat=%.6g per slot (true %.6g), intercept=%.6g\n",
                fit.mu_hat, cfg.params.mu_total(), fit.c_delta_hat);

    const auto bounds = bound_afterpulsing(fit);
    std::printf("afterpulse bounds: P_a < %.4f, N_ap per trigger <= %.4f%s\n",
                bounds.pa_upper, bounds.n_ap_per_trigger_upper,
                bounds.clamped ? " (clamped)" : "");

    const ExponentialModel truth{0.03, 1.66e6};
    const auto dead = min_dead_time_for_target(truth, cfg.params.slot_width_ps, 0.01);
    std::printf("dead time for <1%% afterpulsing: %lld slots (%.2f us), achieved %.4f\n",
                static_cast<long long>(dead.dead_slots),
                static_cast<double>(dead.dead_slots) * cfg.params.slot_width_ps / 1e6,
                total_prob_with_dead(truth, dead, cfg.params.slot_width_ps));
    return 0;
}
