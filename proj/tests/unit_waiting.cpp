#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <spadstat/spadstat.hpp>

using namespace spadstat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// Reference model used throughout: mu = 0.1, exponential afterpulsing with
// amplitude 0.2 and one slot equal to half a lifetime, no dead time. All
// pinned numbers were computed independently of this library.
namespace {
SlotParams ref_params() { return {0.1, 0.0, 1e5}; }
AfterpulseModel ref_model() { return ExponentialModel{0.2, 2e5}; }
} // namespace

TEST_CASE("geometric waiting pmf without afterpulsing") {
    const auto p = ref_params();
    REQUIRE_THAT(pmf_no_afterpulse(p, 1), WithinAbs(0.09516258196404043, 1e-16));
    REQUIRE_THAT(pmf_no_afterpulse(p, 3), WithinAbs(0.07791253239626399, 1e-16));
    REQUIRE_THROWS_AS(pmf_no_afterpulse(p, 0), DomainError);

    SlotParams quiet{0.0, 0.0, 1e5};
    REQUIRE(pmf_no_afterpulse(quiet, 1) == 0.0);
}

TEST_CASE("full waiting pmf at pinned values") {
    const auto p = ref_params();
    const auto m = ref_model();
    REQUIRE_THAT(pmf_full(p, m, DeadTime{0}, 1), WithinRel(0.20492490918284575, 1e-14));
    REQUIRE_THAT(pmf_full(p, m, DeadTime{0}, 5), WithinRel(0.05580163678975385, 1e-13));
    REQUIRE_THAT(log_pmf_full(p, m, DeadTime{0}, 1),
                 WithinAbs(-1.5851116636157858, 1e-13));
    REQUIRE(std::exp(log_pmf_full(p, m, DeadTime{0}, 7)) ==
            Catch::Approx(pmf_full(p, m, DeadTime{0}, 7)).epsilon(1e-14));
    REQUIRE_THROWS_AS(pmf_full(p, m, DeadTime{0}, 0), DomainError);

    // zero-probability slot: no Poissonian mean and no afterpulsing
    SlotParams quiet{0.0, 0.0, 1e5};
    REQUIRE(pmf_full(quiet, NullModel{}, DeadTime{0}, 1) == 0.0);
    REQUIRE_THROWS_AS(log_pmf_full(quiet, NullModel{}, DeadTime{0}, 1), DomainError);
}

TEST_CASE("null model reduces the full pmf to the geometric law") {
    const auto p = ref_params();
    for (std::int64_t n : {1, 2, 5, 40, 300})
        REQUIRE_THAT(pmf_full(p, NullModel{}, DeadTime{3}, n),
                     WithinRel(pmf_no_afterpulse(p, n), 1e-14));
}

TEST_CASE("residual sum and its limit") {
    const auto m = ref_model();
    REQUIRE(residual_term(m, DeadTime{0}, 1e5, 1) == 0.0);
    REQUIRE_THAT(residual_term(m, DeadTime{0}, 1e5, 3),
                 WithinAbs(-0.20574186005139747, 1e-14));
    REQUIRE_THAT(r0_limit(m, DeadTime{0}, 1e5), WithinAbs(-0.32077321522365543, 1e-11));
    REQUIRE(r0_limit(NullModel{}, DeadTime{0}, 1e5) == 0.0);
    // dead time can only shrink the attenuation
    REQUIRE(r0_limit(m, DeadTime{4}, 1e5) > r0_limit(m, DeadTime{0}, 1e5));
    REQUIRE_THROWS_AS(r0_limit(m, DeadTime{0}, 1e5, -1.0), DomainError);
}

TEST_CASE("raw indexing: dead slots are empty, the rest is the shifted pmf") {
    const auto p = ref_params();
    const auto m = ref_model();
    const DeadTime d{3};
    REQUIRE(pmf_full_raw_indexed(p, m, d, 1) == 0.0);
    REQUIRE(pmf_full_raw_indexed(p, m, d, 3) == 0.0);
    for (std::int64_t n : {4, 5, 9})
        REQUIRE(pmf_full_raw_indexed(p, m, d, n) == pmf_full(p, m, d, n - 3));
}

TEST_CASE("log-linear asymptote matches the exact log pmf deep in the tail") {
    const auto p = ref_params();
    const auto m = ref_model();
    const double c = tail_intercept(p, m, DeadTime{0});
    REQUIRE_THAT(c, WithinAbs(-2.572941676267746, 1e-11));
    for (std::int64_t n : {60, 80, 120})
        REQUIRE_THAT(linear_tail(0.1, c, n),
                     WithinAbs(log_pmf_full(p, m, DeadTime{0}, n), 1e-10));
    REQUIRE_THROWS_AS(linear_tail(0.1, c, 0), DomainError);
}

TEST_CASE("bulk pmf evaluation agrees with per-slot calls and normalizes") {
    const auto p = ref_params();
    const auto m = ref_model();
    const WaitingPmf table(p, m, DeadTime{2}, 300);
    REQUIRE(table.values().size() == 300);
    for (std::size_t n : {std::size_t{1}, std::size_t{17}, std::size_t{300}})
        REQUIRE_THAT(table.values()[n - 1],
                     WithinRel(pmf_full(p, m, DeadTime{2}, static_cast<std::int64_t>(n)),
                               1e-13));
    REQUIRE_THAT(table.sum() + table.survival(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("waiting bounds bracket and order correctly") {
    const auto p = ref_params();
    const auto m = ref_model();
    for (std::int64_t n : {1, 2, 5, 20, 100}) {
        const auto b = poissonian_waiting_bounds(p, m, DeadTime{0}, n);
        // once the residual product has converged the two lower bounds agree
        // to the last bit, so the ordering holds only up to rounding
        REQUIRE(b.lower_of_lower <= b.lower * (1.0 + 1e-12));
        REQUIRE(b.lower <= b.upper);
        REQUIRE(b.lower_of_lower > 0.0);
    }
    // with an empty residual product the upper bound is the bare geometric pmf
    REQUIRE(poissonian_waiting_bounds(p, m, DeadTime{0}, 1).upper ==
            pmf_no_afterpulse(p, 1));
}

TEST_CASE("per-slot afterpulse share: model form and clamping") {
    const auto p = ref_params();
    const auto m = ref_model();
    const auto u1 = afterpulse_waiting_upper(p, m, DeadTime{0}, 1);
    REQUIRE_FALSE(u1.clamped);
    const auto wb = poissonian_waiting_bounds(p, m, DeadTime{0}, 1);
    REQUIRE_THAT(u1.value,
                 WithinRel(pmf_full(p, m, DeadTime{0}, 1) - wb.lower_of_lower, 1e-12));

    // fitted variant: an empirical point below the line clamps to zero
    const auto clamped = afterpulse_waiting_upper(1e-6, 0.1, -2.0, 10);
    REQUIRE(clamped.clamped);
    REQUIRE(clamped.value == 0.0);
    const auto open = afterpulse_waiting_upper(0.5, 0.1, -2.0, 10);
    REQUIRE_FALSE(open.clamped);
    REQUIRE_THAT(open.value, WithinRel(0.5 - std::exp(-0.1 * 10 - 2.0), 1e-12));
}

TEST_CASE("cumulative bounds at pinned values") {
    const auto p = ref_params();
    const auto m = ref_model();
    const auto b = cumulative_bounds(p, m, DeadTime{0});
    REQUIRE_THAT(b.r0_delta, WithinAbs(-0.32077321522365543, 1e-11));
    REQUIRE_THAT(b.pa_upper, WithinAbs(0.27441221540397454, 1e-11));
    REQUIRE_THAT(b.n_ap_per_trigger_upper, WithinAbs(0.37819299226041253, 1e-11));
    REQUIRE_THAT(b.cum_sd_lower, WithinRel(0.7566506959522362, 1e-9));
    REQUIRE_THAT(b.cum_sd_upper, WithinRel(0.779808444044574, 1e-9));
    REQUIRE(b.pa_cum_lower == 1.0 - b.cum_sd_upper);
    REQUIRE(b.pa_cum_upper == 1.0 - b.cum_sd_lower);
    REQUIRE(std::exp(b.r0_delta) <= b.cum_sd_lower);
    REQUIRE(b.cum_sd_lower <= b.cum_sd_upper);
    REQUIRE(b.cum_sd_upper <= 1.0);
    REQUIRE_FALSE(b.clamped);
    REQUIRE(b.per_slot_ap_upper.empty());

    SlotParams quiet{0.0, 0.0, 1e5};
    REQUIRE_THROWS_AS(cumulative_bounds(quiet, m, DeadTime{0}), DomainError);
}

TEST_CASE("cumulative bounds can carry a per-slot profile") {
    const auto p = ref_params();
    const auto m = ref_model();
    const auto b = cumulative_bounds(p, m, DeadTime{0}, 1e-12, 8);
    REQUIRE(b.per_slot_ap_upper.size() == 8);
    for (std::int64_t n = 1; n <= 8; ++n)
        REQUIRE(b.per_slot_ap_upper[static_cast<std::size_t>(n - 1)] ==
                afterpulse_waiting_upper(p, m, DeadTime{0}, n).value);
}

TEST_CASE("coincidence error series") {
    const auto p = ref_params();
    const auto m = ref_model();
    const auto es = bound_error_series(p, m, DeadTime{0});
    REQUIRE_THAT(es.total, WithinRel(0.023157748092337532, 1e-9));
    REQUIRE(es.per_slot.size() >= 10);
    REQUIRE_THAT(es.per_slot[0],
                 WithinRel(pmf_no_afterpulse(p, 1) *
                               prob_at_slot(m, DeadTime{0}, 1e5, 1),
                           1e-13));
    double acc = 0.0;
    for (double v : es.per_slot) acc += v;
    REQUIRE_THAT(acc, WithinRel(es.total, 1e-12));

    // no Poissonian events means no coincidences at all
    SlotParams quiet{0.0, 0.0, 1e5};
    const auto empty = bound_error_series(quiet, m, DeadTime{0});
    REQUIRE(empty.total == 0.0);
    REQUIRE(empty.per_slot.empty());
}

TEST_CASE("normalization holds across model families") {
    const SlotParams p{0.02, 0.01, 1e5};
    const std::vector<AfterpulseModel> models{
        NullModel{},
        ExponentialModel{0.15, 5e5},
        MultiExponentialModel{{{0.1, 3e5}, {0.05, 2e6}}},
        PowerLawModel{0.2, 2.5, 2},
    };
    for (const auto& m : models) {
        const WaitingPmf table(p, m, DeadTime{1}, 2000);
        REQUIRE_THAT(table.sum() + table.survival(), WithinAbs(1.0, 1e-11));
    }
}
