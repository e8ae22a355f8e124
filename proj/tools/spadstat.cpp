#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <spadstat/spadstat.hpp>

namespace {

using namespace spadstat;

double ns_to_ps(double ns) { return ns * 1e3; }
double us_to_ps(double us) { return us * 1e6; }

// --sweep-tau lo:hi:step, all in microseconds, inclusive of hi
std::vector<double> parse_sweep(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string::npos ? c1 : text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw CLI::ValidationError("--sweep-tau", "expected lo:hi:step in microseconds");
    double lo = 0, hi = 0, step = 0;
    try {
        std::size_t used = 0;
        const std::string a = text.substr(0, c1);
        const std::string b = text.substr(c1 + 1, c2 - c1 - 1);
        const std::string c = text.substr(c2 + 1);
        lo = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(a);
        hi = std::stod(b, &used);
        if (used != b.size()) throw std::invalid_argument(b);
        step = std::stod(c, &used);
        if (used != c.size()) throw std::invalid_argument(c);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--sweep-tau", "expected lo:hi:step in microseconds");
    }
    if (!(lo > 0.0) || !(step > 0.0) || !(hi >= lo))
        throw CLI::ValidationError("--sweep-tau", "need 0 < lo <= hi and step > 0");
    std::vector<double> taus;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    taus.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        taus.push_back(us_to_ps(lo + step * static_cast<double>(k)));
    return taus;
}

struct SimArgs {
    double rate_source_hz = 15000.0;
    double rate_dark_hz = 0.0;
    double slot_ns = 100.0;
    std::string ap_model = "null";
    double ap_p0 = 0.03;
    double ap_tau0_us = 1.66;
    double dead_us = 0.0;
    double events = 1e6;
    std::uint64_t seed = 1;
    double tick_ps = 100.0;
    std::string out;
    std::string labels;
};

void run_simulate(const SimArgs& a, bool verbose) {
    if (!(a.events >= 1.0) || a.events != std::floor(a.events) || a.events > 9.0e18)
        throw DomainError("simulate: --events must be a positive integer");
    SimConfig cfg;
    cfg.params = slot_params_from_rates(a.rate_source_hz, a.rate_dark_hz, ns_to_ps(a.slot_ns));
    if (a.ap_model == "exp")
        cfg.model = ExponentialModel{a.ap_p0, us_to_ps(a.ap_tau0_us)};
    else
        cfg.model = NullModel{};
    cfg.dead = dead_time_from_duration(us_to_ps(a.dead_us), cfg.params.slot_width_ps);
    cfg.seed = a.seed;
    cfg.stop = StopRule::by_events(static_cast<std::uint64_t>(a.events));
    const auto events = simulate(cfg);
    const std::uint64_t tick_fs = ps_to_fs_exact(a.tick_ps, "simulate: --tick-ps");
    const auto tags = to_timetags(events, cfg.params.slot_width_ps, tick_fs);
    write_tags(tags, a.out);
    if (!a.labels.empty()) {
        std::ofstream f(a.labels, std::ios::trunc);
        if (!f) throw IoError("simulate: cannot open " + a.labels);
        f << "tick,cause\n";
        for (std::size_t i = 0; i < events.size(); ++i)
            f << tags.ticks[i] << ',' << to_string(events[i].cause) << '\n';
        f.flush();
        if (!f) throw IoError("simulate: write failed for " + a.labels);
    }
    double rate_cps = 0.0;
    if (tags.ticks.size() >= 2) {
        const double span_s = static_cast<double>(tags.ticks.back() - tags.ticks.front()) *
                              static_cast<double>(tick_fs) * 1e-15;
        if (span_s > 0.0) rate_cps = static_cast<double>(tags.ticks.size() - 1) / span_s;
    }
    std::cout << "wrote " << tags.ticks.size() << " events to " << a.out << " (mean rate "
              << detail::fmt_double(rate_cps) << " cps)\n";
    if (verbose)
        std::cerr << "mu_total_per_slot=" << detail::fmt_double(cfg.params.mu_total())
                  << " dead_slots=" << cfg.dead.dead_slots << '\n';
}

struct AnalyzeArgs {
    std::string in;
    double bin_ns = 100.0;
    double range_us = 20.0;
    double tau_us = 5.0;
    std::string sweep;
    bool fit_exp = false;
    double dark_mu = 0.0;
    double source_rate_hz = 0.0;
    std::string report;
    std::string hist;
};

void run_analyze(const AnalyzeArgs& a, bool have_dark_mu, bool have_source, bool verbose) {
    const auto tags = read_tags(a.in);
    const double bin_ps = ns_to_ps(a.bin_ns);
    const double range_ps = us_to_ps(a.range_us);
    const double tau_ps = us_to_ps(a.tau_us);
    const auto h = build_histogram(tags, bin_ps, range_ps);
    const auto fit = fit_tail(h, tau_ps, range_ps);
    const auto bounds = bound_afterpulsing(fit);

    auto doc = ReportDocument::create();
    doc.set_input(a.in, h.bin_width_ps, range_ps, tau_ps);
    doc.set_tail_fit(fit);
    doc.set_bounds(bounds);

    if (!a.sweep.empty()) doc.set_tau_sweep(sweep_tau(h, parse_sweep(a.sweep), range_ps));
    if (a.fit_exp) doc.set_exp_fit(fit_exponential(h, fit, tau_ps));

    RateSeparation rates;
    bool have_rates = false;
    if (have_dark_mu) {
        if (a.dark_mu < 0.0) throw DomainError("analyze: --dark-mu must be non-negative");
        if (a.dark_mu > 0.0) {
            TailFitResult dark;
            dark.mu_hat = a.dark_mu;
            dark.slot_width_ps = fit.slot_width_ps;
            rates = separate_rates(dark, fit);
        } else {
            rates.mu_s_hat = fit.mu_hat;
            rates.mu_d_hat = 0.0;
        }
        doc.set_rates(rates);
        have_rates = true;
    }
    if (have_source) {
        const double mu_s = have_rates ? rates.mu_s_hat : fit.mu_hat;
        const double mu_d = have_rates ? rates.mu_d_hat : 0.0;
        doc.set_efficiency(estimate_efficiency(mu_s, mu_d, fit.slot_width_ps, a.source_rate_hz));
    }

    write_report(doc, a.report);
    if (!a.hist.empty()) write_histogram_csv(h, a.hist);

    std::cout << "mu_hat_per_slot=" << detail::fmt_double(fit.mu_hat)
              << " pa_upper=" << detail::fmt_double(bounds.pa_upper)
              << " n_ap_per_trigger_upper=" << detail::fmt_double(bounds.n_ap_per_trigger_upper)
              << '\n';
    if (verbose)
        std::cerr << "fit window slots [" << fit.window_lo_slot << ", " << fit.window_hi_slot
                  << "], bins used " << fit.bins_used << ", residual rms "
                  << detail::fmt_double(fit.residual_rms) << '\n';
}

struct OptimizeArgs {
    double ap_p0 = 0.03;
    double ap_tau0_us = 1.66;
    double slot_ns = 100.0;
    double target = 0.01;
};

void run_optimize(const OptimizeArgs& a) {
    const ExponentialModel m{a.ap_p0, us_to_ps(a.ap_tau0_us)};
    validate(AfterpulseModel{m});
    const double slot_ps = ns_to_ps(a.slot_ns);
    if (!(slot_ps > 0.0)) throw DomainError("optimize-deadtime: slot width must be positive");
    const DeadTime dead = min_dead_time_for_target(m, slot_ps, a.target);
    const double achieved = total_prob_with_dead(m, dead, slot_ps);
    std::cout << "n_delta=" << dead.dead_slots << " tau_delta_us="
              << detail::fmt_double(static_cast<double>(dead.dead_slots) * slot_ps / 1e6)
              << " achieved_pa=" << detail::fmt_double(achieved) << '\n';
}

struct PlotArgs {
    std::string report;
    std::string hist;
    std::string emit;
};

// One fixed table for all three emissions so downstream plotting scripts
// never have to branch on column layout. Empty cells mean "no value here"
// (zero-count bins have no empirical log-pmf; only the excess emission
// fills the last column).
void run_plot(const PlotArgs& a) {
    const auto doc = read_report(a.report);
    const auto h = read_histogram_csv(a.hist);
    const auto fit = doc.tail_fit();
    std::size_t lo = 1;
    std::size_t hi = h.counts.size();
    if (a.emit == "tail-fit") {
        lo = static_cast<std::size_t>(std::max<std::int64_t>(1, fit.window_lo_slot));
        const std::int64_t whi = std::max<std::int64_t>(0, fit.window_hi_slot);
        hi = std::min<std::size_t>(h.counts.size(), static_cast<std::size_t>(whi));
    }
    ExcessProfile excess;
    if (a.emit == "excess") excess = afterpulse_excess(h, fit);

    std::string out;
    out += "time_us,empirical_log_pmf,fitted_line,excess_bound\n";
    const double total = static_cast<double>(h.total_intervals);
    for (std::size_t n = lo; n <= hi; ++n) {
        out += detail::fmt_double(static_cast<double>(n) * h.bin_width_ps / 1e6);
        out += ',';
        const std::uint64_t c = h.counts[n - 1];
        if (c > 0 && total > 0.0)
            out += detail::fmt_double(std::log(static_cast<double>(c) / total));
        out += ',';
        out += detail::fmt_double(
            linear_tail(fit.mu_hat, fit.c_delta_hat, static_cast<std::int64_t>(n)));
        out += ',';
        if (a.emit == "excess") out += detail::fmt_double(excess.values[n - 1]);
        out += '\n';
    }
    std::cout << out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counting statistics toolkit for single-photon detectors"};
    app.set_version_flag("--version", spadstat::kToolVersion);
    bool verbose = false;
    app.add_flag("--verbose", verbose, "extra diagnostics on stderr");
    app.require_subcommand(1);

    SimArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "generate a labeled detection stream");
    c_sim->add_option("--rate-source-hz", sim.rate_source_hz, "source photon rate");
    c_sim->add_option("--rate-dark-hz", sim.rate_dark_hz, "dark count rate");
    c_sim->add_option("--slot-ns", sim.slot_ns, "time slot width in ns");
    c_sim->add_option("--ap-model", sim.ap_model, "afterpulse model")
        ->check(CLI::IsMember({"null", "exp"}));
    c_sim->add_option("--ap-p0", sim.ap_p0, "afterpulse amplitude");
    c_sim->add_option("--ap-tau0-us", sim.ap_tau0_us, "afterpulse lifetime in us");
    c_sim->add_option("--dead-us", sim.dead_us, "dead time in us");
    c_sim->add_option("--events", sim.events, "number of events to generate");
    c_sim->add_option("--seed", sim.seed, "RNG seed");
    c_sim->add_option("--tick-ps", sim.tick_ps, "tick resolution in ps");
    c_sim->add_option("--out", sim.out, "output tag file")->required();
    c_sim->add_option("--labels", sim.labels, "ground-truth cause CSV");
    c_sim->callback([&]() { run_simulate(sim, verbose); });

    AnalyzeArgs an;
    auto* c_an = app.add_subcommand("analyze", "characterize a detection stream");
    c_an->add_option("--in", an.in, "input tag file")->required();
    c_an->add_option("--bin-ns", an.bin_ns, "histogram bin width in ns");
    c_an->add_option("--range-us", an.range_us, "histogram range in us");
    c_an->add_option("--tau-us", an.tau_us, "fit window start in us");
    c_an->add_option("--sweep-tau", an.sweep, "sweep window start, lo:hi:step in us");
    c_an->add_flag("--fit-exp", an.fit_exp, "fit exponential afterpulse parameters");
    auto* o_dark = c_an->add_option("--dark-mu", an.dark_mu, "dark mu per slot, from a dark run");
    auto* o_src =
        c_an->add_option("--source-rate-hz", an.source_rate_hz, "incident photon rate");
    c_an->add_option("--report", an.report, "output report JSON")->required();
    c_an->add_option("--hist", an.hist, "output histogram CSV");
    c_an->callback([&]() { run_analyze(an, o_dark->count() > 0, o_src->count() > 0, verbose); });

    OptimizeArgs op;
    auto* c_op = app.add_subcommand("optimize-deadtime",
                                    "minimal dead time for a target afterpulse probability");
    c_op->add_option("--ap-p0", op.ap_p0, "afterpulse amplitude")->required();
    c_op->add_option("--ap-tau0-us", op.ap_tau0_us, "afterpulse lifetime in us")->required();
    c_op->add_option("--slot-ns", op.slot_ns, "time slot width in ns");
    c_op->add_option("--target", op.target, "target total afterpulse probability");
    c_op->callback([&]() { run_optimize(op); });

    PlotArgs pl;
    auto* c_pl = app.add_subcommand("plot-data", "emit plot-ready CSV series");
    c_pl->add_option("--report", pl.report, "report JSON from analyze")->required();
    c_pl->add_option("--hist", pl.hist, "histogram CSV from analyze")->required();
    c_pl->add_option("--emit", pl.emit, "series to emit")
        ->required()
        ->check(CLI::IsMember({"waiting-pmf", "tail-fit", "excess"}));
    c_pl->callback([&]() { run_plot(pl); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const spadstat::FitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const spadstat::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const spadstat::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const spadstat::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const spadstat::ModelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
