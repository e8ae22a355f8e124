#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "estimation.hpp"
#include "waiting.hpp"

namespace spadstat {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

// Characterization report. The document wraps a JSON object so fields this
// tool does not know about survive a read-modify-write cycle untouched; the
// typed setters below only ever assign their own keys. Every quantity
// carries its unit in the field name.
class ReportDocument {
public:
    nlohmann::ordered_json root;

    static ReportDocument create() {
        ReportDocument d;
        d.root["schema_version"] = kReportSchemaVersion;
        d.root["tool_version"] = kToolVersion;
        return d;
    }

    bool has(const std::string& section) const { return root.contains(section); }

    void set_input(const std::string& file, double bin_width_ps, double range_ps,
                   double tau_ps) {
        auto& s = root["input"];
        s["file"] = file;
        s["bin_width_ps"] = bin_width_ps;
        s["range_ps"] = range_ps;
        s["tau_ps"] = tau_ps;
    }

    void set_tail_fit(const TailFitResult& fit) {
        auto& s = root["tail_fit"];
        s["mu_hat_per_slot"] = fit.mu_hat;
        s["c_delta_hat"] = fit.c_delta_hat;
        s["window_lo_slot"] = fit.window_lo_slot;
        s["window_hi_slot"] = fit.window_hi_slot;
        s["residual_rms"] = fit.residual_rms;
        s["bins_used"] = fit.bins_used;
        s["slot_width_ps"] = fit.slot_width_ps;
    }

    TailFitResult tail_fit() const {
        const auto& s = section("tail_fit");
        TailFitResult fit;
        fit.mu_hat = s.at("mu_hat_per_slot").get<double>();
        fit.c_delta_hat = s.at("c_delta_hat").get<double>();
        fit.window_lo_slot = s.at("window_lo_slot").get<std::int64_t>();
        fit.window_hi_slot = s.at("window_hi_slot").get<std::int64_t>();
        fit.residual_rms = s.at("residual_rms").get<double>();
        fit.bins_used = s.at("bins_used").get<std::size_t>();
        fit.slot_width_ps = s.at("slot_width_ps").get<double>();
        return fit;
    }

    void set_bounds(const BoundSet& b) {
        auto& s = root["bounds"];
        s["r0_delta"] = b.r0_delta;
        s["pa_upper"] = b.pa_upper;
        s["n_ap_per_trigger_upper"] = b.n_ap_per_trigger_upper;
        s["clamped"] = b.clamped;
    }

    BoundSet bounds() const {
        const auto& s = section("bounds");
        BoundSet b;
        b.r0_delta = s.at("r0_delta").get<double>();
        b.pa_upper = s.at("pa_upper").get<double>();
        b.n_ap_per_trigger_upper = s.at("n_ap_per_trigger_upper").get<double>();
        b.clamped = s.at("clamped").get<bool>();
        return b;
    }

    void set_exp_fit(const ExpFitResult& e) {
        auto& s = root["exp_fit"];
        s["p_a0_hat"] = e.p_a0_hat;
        s["tau0_hat_ps"] = e.tau0_hat_ps;
        s["objective_value"] = e.objective_value;
        s["at_boundary"] = e.at_boundary;
        s["iterations"] = e.iterations;
    }

    ExpFitResult exp_fit() const {
        const auto& s = section("exp_fit");
        ExpFitResult e;
        e.p_a0_hat = s.at("p_a0_hat").get<double>();
        e.tau0_hat_ps = s.at("tau0_hat_ps").get<double>();
        e.objective_value = s.at("objective_value").get<double>();
        e.at_boundary = s.at("at_boundary").get<bool>();
        e.iterations = s.at("iterations").get<int>();
        return e;
    }

    // Failed sweep entries carry NaN in memory; JSON has no NaN, so they are
    // stored as null and restored as NaN.
    void set_tau_sweep(const TauSweepResult& t) {
        auto& s = root["tau_sweep"];
        s["taus_ps"] = t.taus_ps;
        auto pa = nlohmann::ordered_json::array();
        for (double v : t.pa_upper) {
            if (std::isnan(v))
                pa.push_back(nullptr);
            else
                pa.push_back(v);
        }
        s["pa_upper"] = std::move(pa);
        s["notes"] = t.notes;
        if (t.has_plateau)
            s["plateau_tau_ps"] = t.plateau_tau_ps;
        else
            s["plateau_tau_ps"] = nullptr;
        s["has_plateau"] = t.has_plateau;
    }

    TauSweepResult tau_sweep() const {
        const auto& s = section("tau_sweep");
        TauSweepResult t;
        t.taus_ps = s.at("taus_ps").get<std::vector<double>>();
        for (const auto& v : s.at("pa_upper"))
            t.pa_upper.push_back(v.is_null() ? std::nan("") : v.get<double>());
        t.notes = s.at("notes").get<std::vector<std::string>>();
        t.has_plateau = s.at("has_plateau").get<bool>();
        t.plateau_tau_ps = t.has_plateau ? s.at("plateau_tau_ps").get<double>() : 0.0;
        return t;
    }

    void set_rates(const RateSeparation& r) {
        auto& s = root["rates"];
        s["mu_s_hat_per_slot"] = r.mu_s_hat;
        s["mu_d_hat_per_slot"] = r.mu_d_hat;
        s["clamped"] = r.clamped;
    }

    RateSeparation rates() const {
        const auto& s = section("rates");
        RateSeparation r;
        r.mu_s_hat = s.at("mu_s_hat_per_slot").get<double>();
        r.mu_d_hat = s.at("mu_d_hat_per_slot").get<double>();
        r.clamped = s.at("clamped").get<bool>();
        return r;
    }

    void set_efficiency(const EfficiencyEstimate& e) {
        auto& s = root["efficiency"];
        s["eta"] = e.eta;
        s["mu_s_hat_per_slot"] = e.mu_s_hat;
        s["mu_d_hat_per_slot"] = e.mu_d_hat;
        s["source_rate_hz"] = e.source_rate_hz;
        s["clamped"] = e.clamped;
    }

    EfficiencyEstimate efficiency() const {
        const auto& s = section("efficiency");
        EfficiencyEstimate e;
        e.eta = s.at("eta").get<double>();
        e.mu_s_hat = s.at("mu_s_hat_per_slot").get<double>();
        e.mu_d_hat = s.at("mu_d_hat_per_slot").get<double>();
        e.source_rate_hz = s.at("source_rate_hz").get<double>();
        e.clamped = s.at("clamped").get<bool>();
        return e;
    }

    void set_seed(std::uint64_t seed) { root["seed"] = seed; }
    std::uint64_t seed() const { return section("seed").get<std::uint64_t>(); }

private:
    const nlohmann::ordered_json& section(const std::string& name) const {
        if (!root.contains(name))
            throw FormatError("report: missing section '" + name + "'");
        return root.at(name);
    }
};

inline void write_report(const ReportDocument& doc, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("write_report: cannot open " + path);
    f << doc.root.dump(2) << '\n';
    f.flush();
    if (!f) throw IoError("write_report: write failed for " + path);
}

inline ReportDocument read_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_report: cannot open " + path);
    ReportDocument doc;
    try {
        doc.root = nlohmann::ordered_json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("read_report: ") + e.what());
    }
    if (!doc.root.is_object() || !doc.root.contains("schema_version"))
        throw FormatError("read_report: not a report document (no schema_version)");
    const auto ver = doc.root.at("schema_version");
    if (!ver.is_number_integer() || ver.get<int>() != kReportSchemaVersion)
        throw FormatError("read_report: unsupported schema_version " + ver.dump() +
                          " (this tool reads version " +
                          std::to_string(kReportSchemaVersion) + ")");
    return doc;
}

} // namespace spadstat
