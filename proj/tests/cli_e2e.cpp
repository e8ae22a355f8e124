#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <spadstat/spadstat.hpp>

using namespace spadstat;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() /
              ("spadstat-cli-" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) return {};
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    REQUIRE(f.good());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

RunResult run(const TempDir& tmp, const std::string& args) {
    const auto out = tmp.path("stdout.txt");
    const auto err = tmp.path("stderr.txt");
    const std::string cmd = std::string(CLI_BIN) + " " + args + " >" + out + " 2>" + err;
    const int rc = std::system(cmd.c_str());
    RunResult r;
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    r.code = WEXITSTATUS(rc);
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

} // namespace

TEST_CASE("version and usage errors") {
    TempDir tmp;
    const auto v = run(tmp, "--version");
    REQUIRE(v.code == 0);
    REQUIRE(v.out.find("1.0.0") != std::string::npos);

    REQUIRE(run(tmp, "").code == 2);
    REQUIRE(run(tmp, "frobnicate").code == 2);
    REQUIRE(run(tmp, "simulate").code == 2); // --out is required

    const auto zero =
        run(tmp, "simulate --events 0 --out " + tmp.path("x.ttg"));
    REQUIRE(zero.code == 2);
    REQUIRE(zero.err.find("error:") != std::string::npos);
}

TEST_CASE("simulation is reproducible from the command line") {
    TempDir tmp;
    const std::string common =
        "simulate --rate-source-hz 20000 --events 10000 --seed 5 --ap-model exp --out ";
    const auto a = run(tmp, common + tmp.path("a.ttg"));
    REQUIRE(a.code == 0);
    REQUIRE(a.out.rfind("wrote 10000 events", 0) == 0);
    const auto b = run(tmp, common + tmp.path("b.ttg"));
    REQUIRE(b.code == 0);
    REQUIRE(slurp(tmp.path("a.ttg")) == slurp(tmp.path("b.ttg")));
    REQUIRE_FALSE(slurp(tmp.path("a.ttg")).empty());
}

TEST_CASE("simulate then analyze recovers the configured rate") {
    TempDir tmp;
    const auto tags = tmp.path("null.ttg");
    // 100 kHz on 100 ns slots: mu per slot 0.01
    const auto sim = run(tmp, "simulate --rate-source-hz 100000 --events 1000000 "
                              "--seed 3 --out " + tags);
    REQUIRE(sim.code == 0);

    const auto rep1 = tmp.path("r1.json");
    const auto rep2 = tmp.path("r2.json");
    const auto an1 = run(tmp, "analyze --in " + tags + " --report " + rep1);
    REQUIRE(an1.code == 0);
    REQUIRE(an1.out.find("mu_hat_per_slot=") != std::string::npos);
    REQUIRE(an1.out.find("pa_upper=") != std::string::npos);

    const auto doc = read_report(rep1);
    const auto fit = doc.tail_fit();
    REQUIRE(std::abs(fit.mu_hat - 0.01) / 0.01 < 0.02);
    REQUIRE(doc.bounds().pa_upper < 0.02);
    REQUIRE(doc.has("input"));

    // same input, same flags: the report must be identical byte for byte
    const auto an2 = run(tmp, "analyze --in " + tags + " --report " + rep2);
    REQUIRE(an2.code == 0);
    auto r1 = slurp(rep1);
    auto r2 = slurp(rep2);
    REQUIRE_FALSE(r1.empty());
    REQUIRE(r1 == r2);
}

TEST_CASE("analyze failure exit codes") {
    TempDir tmp;
    const auto missing =
        run(tmp, "analyze --in " + tmp.path("nope.ttg") + " --report " + tmp.path("r.json"));
    REQUIRE(missing.code == 3);
    REQUIRE(missing.err.find("error:") != std::string::npos);

    // a valid stream but a window past the histogram range: fit failure
    const auto tags = tmp.path("t.ttg");
    REQUIRE(run(tmp, "simulate --rate-source-hz 100000 --events 20000 --seed 8 --out " +
                          tags).code == 0);
    const auto badwin = run(tmp, "analyze --in " + tags + " --tau-us 30 --report " +
                                     tmp.path("r.json"));
    REQUIRE(badwin.code == 4);

    const auto badsweep = run(tmp, "analyze --in " + tags + " --sweep-tau banana --report " +
                                       tmp.path("r.json"));
    REQUIRE(badsweep.code == 2);

    const auto baddark = run(tmp, "analyze --in " + tags + " --dark-mu -1 --report " +
                                      tmp.path("r.json"));
    REQUIRE(baddark.code == 2);
}

TEST_CASE("afterpulsing run: the reported bound covers the labeled truth") {
    TempDir tmp;
    const auto tags = tmp.path("ap.ttg");
    const auto labels = tmp.path("ap-labels.csv");
    const auto sim = run(tmp, "simulate --rate-source-hz 15000 --ap-model exp --ap-p0 0.03 "
                              "--ap-tau0-us 1.66 --dead-us 0.1 --events 300000 --seed 9 "
                              "--labels " + labels + " --out " + tags);
    REQUIRE(sim.code == 0);

    std::size_t n_total = 0, n_ap = 0;
    const auto rows = lines_of(slurp(labels));
    REQUIRE(rows.size() == 300001);
    REQUIRE(rows[0] == "tick,cause");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto cells = split(rows[i], ',');
        REQUIRE(cells.size() == 2);
        ++n_total;
        if (cells[1] == "afterpulse" || cells[1] == "coincident") ++n_ap;
    }
    const double truth = static_cast<double>(n_ap) / static_cast<double>(n_total);
    REQUIRE(truth > 0.2);

    const auto rep = tmp.path("ap.json");
    const auto an = run(tmp, "analyze --in " + tags + " --report " + rep + " --hist " +
                                 tmp.path("ap.csv"));
    REQUIRE(an.code == 0);
    const auto doc = read_report(rep);
    REQUIRE(doc.bounds().pa_upper > truth);
    REQUIRE_FALSE(slurp(tmp.path("ap.csv")).empty());
}

TEST_CASE("dead time optimizer output") {
    TempDir tmp;
    const auto r = run(tmp, "optimize-deadtime --ap-p0 0.013988901862679783 "
                            "--ap-tau0-us 1.1056496286324209 --slot-ns 100 --target 0.01");
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("n_delta=30 ") != std::string::npos);
    REQUIRE(r.out.find("tau_delta_us=3 ") != std::string::npos);
    REQUIRE(r.out.find("achieved_pa=0.00") != std::string::npos);

    const auto easy = run(tmp, "optimize-deadtime --ap-p0 0.0139 --ap-tau0-us 1.1 "
                               "--target 0.99");
    REQUIRE(easy.code == 0);
    REQUIRE(easy.out.find("n_delta=0 ") != std::string::npos);

    REQUIRE(run(tmp, "optimize-deadtime --ap-p0 0.0139 --ap-tau0-us 1.1 --target -1").code ==
            2);
    REQUIRE(run(tmp, "optimize-deadtime --ap-p0 2 --ap-tau0-us 1.1 --target 0.01").code == 2);
}

TEST_CASE("plot-data emits aligned, analyzable columns") {
    TempDir tmp;
    // noise-free geometric histogram plus the exactly matching report
    const double mu = 0.05;
    InterArrivalHistogram h;
    h.bin_width_ps = 1e5;
    h.total_intervals = 1000000000000000ull;
    std::uint64_t assigned = 0;
    const SlotParams params{mu, 0.0, 1e5};
    for (std::int64_t n = 1; n <= 100; ++n) {
        const auto c = static_cast<std::uint64_t>(std::llround(
            pmf_no_afterpulse(params, n) * static_cast<double>(h.total_intervals)));
        h.counts.push_back(c);
        assigned += c;
    }
    h.overflow = h.total_intervals - assigned;
    const auto hist_path = tmp.path("g.csv");
    write_histogram_csv(h, hist_path);

    TailFitResult fit;
    fit.mu_hat = mu;
    fit.c_delta_hat = std::log(-std::expm1(-mu)) + mu;
    fit.window_lo_slot = 20;
    fit.window_hi_slot = 80;
    fit.bins_used = 61;
    fit.slot_width_ps = 1e5;
    auto doc = ReportDocument::create();
    doc.set_input("g.csv", 1e5, 1e7, 2e6);
    doc.set_tail_fit(fit);
    doc.set_bounds(bound_afterpulsing(fit));
    const auto rep_path = tmp.path("g.json");
    write_report(doc, rep_path);

    const std::string base =
        "plot-data --report " + rep_path + " --hist " + hist_path + " --emit ";

    const auto tail = run(tmp, base + "tail-fit");
    REQUIRE(tail.code == 0);
    const auto tl = lines_of(tail.out);
    REQUIRE(tl.size() == 62);
    REQUIRE(tl[0] == "time_us,empirical_log_pmf,fitted_line,excess_bound");
    for (std::size_t i = 1; i < tl.size(); ++i) {
        const auto cells = split(tl[i], ',');
        REQUIRE(cells.size() == 4);
        REQUIRE(cells[3].empty());
        // exact model data: empirical and fitted agree to rounding noise
        REQUIRE_FALSE(cells[1].empty());
        REQUIRE(std::abs(std::stod(cells[1]) - std::stod(cells[2])) <= 1e-9);
    }
    REQUIRE(split(tl[1], ',')[0] == "2"); // bin 20 starts the window: 2 us

    const auto pmf = run(tmp, base + "waiting-pmf");
    REQUIRE(pmf.code == 0);
    REQUIRE(lines_of(pmf.out).size() == 101);

    const auto ex = run(tmp, base + "excess");
    REQUIRE(ex.code == 0);
    const auto xl = lines_of(ex.out);
    REQUIRE(xl.size() == 101);
    for (std::size_t i = 1; i < xl.size(); ++i) {
        const auto cells = split(xl[i], ',');
        REQUIRE(cells.size() == 4);
        REQUIRE_FALSE(cells[3].empty());
        REQUIRE(std::stod(cells[3]) <= 1e-10);
    }

    REQUIRE(run(tmp, base + "sideways").code == 2);

    // a report without the fit section cannot drive a plot
    spit(rep_path, "{\"schema_version\": 1}\n");
    REQUIRE(run(tmp, base + "tail-fit").code == 3);
}
