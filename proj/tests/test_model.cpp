#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bioage/model.hpp"
#include "bioage/quadrature.hpp"
#include "bioage/rng.hpp"

using namespace bioage;

namespace {

ValidatedParams fig4_params() {
    return validate(ModelParams::linear(0.1, 0.1, 1.1, 0.99));
}

// Independent evaluation of the moment-rate formula, kept separate from the
// implementation under test.
double chi_reference(double tp, double gp, double tm, double gm, double x) {
    return tp * (1.0 - std::exp(-x * std::log(gp))) + tm * (1.0 - std::exp(-x * std::log(gm)));
}

}  // namespace

TEST_CASE("validate accepts the symmetric benchmark parameters") {
    const auto vp = validate(ModelParams::linear(0.5, 0.5, 1.1, 0.9));
    CHECK(vp.tau_plus() == 0.5);
    CHECK(vp.tau_minus() == 0.5);
    CHECK(vp.g_plus() == 1.1);
    CHECK(vp.g_minus() == 0.9);
}

TEST_CASE("validate rejects g_plus at the boundary") {
    CHECK_THROWS_AS(validate(ModelParams::linear(1.0, 0.0, 1.0, 0.9)), RangeError);
    CHECK_THROWS_AS(validate(ModelParams::linear(0.0, 1.0, 1.1, 1.0)), RangeError);
    CHECK_THROWS_AS(validate(ModelParams::linear(0.0, 1.0, 1.1, 0.0)), RangeError);
    CHECK_THROWS_AS(validate(ModelParams::linear(-0.1, 0.0, 1.1, 0.9)), RangeError);
    // zero-rate side is unconstrained
    CHECK_NOTHROW(validate(ModelParams::linear(1.0, 0.0, 1.1, 1.0)));
    CHECK_NOTHROW(validate(ModelParams::linear(0.0, 0.0, 1.0, 1.0)));
}

TEST_CASE("tau/p parameterization resolves to the rate pair") {
    const auto params = ModelParams::from_tau_p(1.0, 0.25, 1.1, 0.9);
    CHECK(params.tau_plus == Catch::Approx(0.25).epsilon(1e-15));
    CHECK(params.tau_minus == Catch::Approx(0.75).epsilon(1e-15));
    CHECK_THROWS_AS(ModelParams::from_tau_p(0.0, 0.5, 1.1, 0.9), RangeError);
    CHECK_THROWS_AS(ModelParams::from_tau_p(1.0, 1.5, 1.1, 0.9), RangeError);
}

TEST_CASE("validate rejects demography outside assumptions") {
    const auto params = ModelParams::linear(0.0, 0.0, 1.1, 0.9);
    CHECK_THROWS_AS(validate(params, DemographyParams{0.0, 1.0, 1, 1.0}), RangeError);
    CHECK_THROWS_AS(validate(params, DemographyParams{0.1, 0.0, 1, 1.0}), RangeError);
    CHECK_THROWS_AS(validate(params, DemographyParams{0.1, 1.0, 0, 1.0}), RangeError);
    CHECK_THROWS_AS(validate(params, DemographyParams{0.1, 1.0, 2, 0.0}), RangeError);
    CHECK_NOTHROW(validate(params, DemographyParams{0.1, 1.0, 3, 0.5}));
}

TEST_CASE("chi_k closed-form values") {
    SECTION("chi_0 vanishes for any parameters") {
        CHECK(chi_k(fig4_params(), 0) == 0.0);
        CHECK(chi_k(validate(ModelParams::linear(2.0, 0.0, 3.0, 0.9)), 0) == 0.0);
    }
    SECTION("symmetric case matches -tau delta^2/(1-delta^2)") {
        const auto vp = validate(ModelParams::linear(0.5, 0.5, 1.1, 0.9));
        CHECK(chi_k(vp, 1) == Catch::Approx(-0.01 / 0.99).epsilon(1e-14));
    }
    SECTION("sign change between k=68 and k=69 for the moments benchmark") {
        const auto vp = fig4_params();
        CHECK(chi_k(vp, 68) > 0.0);
        CHECK(chi_k(vp, 69) < 0.0);
        // frozen from a 40-digit evaluation of the formula
        CHECK(chi_k(vp, 69) == Catch::Approx(-2.0449441509735938e-4).epsilon(1e-12));
        CHECK(std::fabs(chi_k(vp, 69)) < 3e-4);
    }
    SECTION("nonlinear families are rejected") {
        const ModelParams params{1.0, 0.0, PolynomialRejuvenation{0.1, 1.0}, LinearJump{0.9}};
        CHECK_THROWS_AS(chi_k(validate(params), 1), UnsupportedFamilyError);
    }
}

TEST_CASE("chi_continuous agrees with chi_k at integers and with hand values") {
    const auto vp = fig4_params();
    CHECK(chi_continuous(vp, 0.0) == 0.0);
    for (int k : {1, 7, 42, 69, 100}) {
        const double a = chi_continuous(vp, static_cast<double>(k));
        const double b = chi_k(vp, k);
        CHECK(a == b);  // same formula, same rounding
    }
    const auto vp2 = validate(ModelParams::linear(1.0, 1.0, 2.0, 0.5));
    CHECK(chi_continuous(vp2, 1.0) == Catch::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("chi_k matches an independent evaluation on random parameters") {
    Rng rng(2024, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const double tp = 0.01 + rng.uniform();
        const double tm = 0.01 + rng.uniform();
        const double gp = 1.0 + 0.01 + rng.uniform();
        const double gm = 0.05 + 0.9 * rng.uniform();
        const auto vp = validate(ModelParams::linear(tp, tm, gp, gm));
        const int k = 1 + static_cast<int>(rng.uniform_index(40));
        CHECK(chi_k(vp, k) ==
              Catch::Approx(chi_reference(tp, gp, tm, gm, k)).margin(1e-12));
    }
}

TEST_CASE("rejuvenation-only chi_k is increasing, bounded by tau_plus") {
    const auto vp = validate(ModelParams::linear(0.7, 0.0, 1.3, 0.9));
    double prev = 0.0;
    for (int k = 1; k <= 60; ++k) {
        const double c = chi_k(vp, k);
        CHECK(c > prev);
        CHECK(c < 0.7);
        prev = c;
    }
    CHECK(chi_k(vp, 2000) == Catch::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("combined chi_k decreases monotonically beyond x_max") {
    const auto vp = fig4_params();
    const ChiShape shape = chi_x_max(vp);
    REQUIRE(shape.case_tag == ChiCase::IncreasingThenDecreasing);
    const int start = static_cast<int>(std::ceil(shape.x_max));
    double prev = chi_k(vp, start);
    bool went_negative = false;
    for (int k = start + 1; k <= 300; ++k) {
        const double c = chi_k(vp, k);
        CHECK(c < prev);
        prev = c;
        went_negative = went_negative || c < 0.0;
    }
    CHECK(went_negative);
}

TEST_CASE("x_max classification and stationarity") {
    SECTION("case (i): derivative vanishes at x_max") {
        const auto vp = fig4_params();
        const ChiShape shape = chi_x_max(vp);
        REQUIRE(shape.case_tag == ChiCase::IncreasingThenDecreasing);
        CHECK(shape.x_max == Catch::Approx(21.350793105160622).epsilon(1e-12));
        const double h = 1e-4;
        const double deriv =
            (chi_continuous(vp, shape.x_max + h) - chi_continuous(vp, shape.x_max - h)) /
            (2.0 * h);
        CHECK(std::fabs(deriv) < 1e-8);
    }
    SECTION("boundary: symmetric logs cancel, no interior maximizer") {
        // g and 1/g both dyadic, so the logs cancel exactly
        const auto vp = validate(ModelParams::linear(0.3, 0.3, 2.0, 0.5));
        const ChiShape shape = chi_x_max(vp);
        CHECK(shape.criterion == 0.0);
        CHECK(shape.case_tag == ChiCase::Decreasing);
    }
    SECTION("case (ii): aging-dominated") {
        const auto vp = validate(ModelParams::linear(0.01, 1.0, 1.01, 0.5));
        const ChiShape shape = chi_x_max(vp);
        CHECK(shape.criterion < 0.0);
        CHECK(shape.case_tag == ChiCase::Decreasing);
    }
    SECTION("finite-difference sign of chi'(0) matches the criterion") {
        Rng rng(7, 0);
        for (int trial = 0; trial < 30; ++trial) {
            const auto vp = validate(ModelParams::linear(
                0.05 + rng.uniform(), 0.05 + rng.uniform(), 1.02 + rng.uniform(),
                0.1 + 0.85 * rng.uniform()));
            const ChiShape shape = chi_x_max(vp);
            const double h = 1e-6;
            const double fd = (chi_continuous(vp, h) - chi_continuous(vp, -h)) / (2.0 * h);
            if (std::fabs(shape.criterion) > 1e-9) {
                CHECK((fd > 0.0) == (shape.criterion > 0.0));
            }
        }
    }
}

TEST_CASE("jump_map_eval analytic values") {
    CHECK(jump_map_eval(LinearJump{0.9}, 10.0).f == Catch::Approx(9.0));
    CHECK(jump_map_eval(LinearJump{0.9}, 10.0).f_prime == 0.9);
    const JumpEval poly = jump_map_eval(PolynomialRejuvenation{0.1, 1.0}, 2.0);
    CHECK(poly.f == Catch::Approx(2.4).epsilon(1e-15));
    CHECK(poly.f_prime == Catch::Approx(1.4).epsilon(1e-15));
    const JumpEval sat = jump_map_eval(SaturatingAging{0.5, 0.0, 0.0}, 3.0);
    CHECK(sat.f == Catch::Approx(1.5).epsilon(1e-15));
    CHECK(sat.f_prime == Catch::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("jump_map_eval derivative matches a central finite difference") {
    const JumpFamily families[] = {
        JumpFamily{LinearJump{1.1}},
        JumpFamily{PolynomialRejuvenation{0.05, 2.0}},
        JumpFamily{SaturatingAging{0.4, 0.2, 1.5}},
    };
    Rng rng(11, 0);
    for (const auto& family : families) {
        for (int trial = 0; trial < 40; ++trial) {
            const double b = 0.1 + 199.9 * rng.uniform();
            const double h = 1e-5 * (1.0 + b);
            const double fd =
                (jump_map_eval(family, b + h).f - jump_map_eval(family, b - h).f) / (2.0 * h);
            CHECK(jump_map_eval(family, b).f_prime == Catch::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("jump_target inverts the jump maps") {
    SECTION("linear rejuvenation lowers the age by the paper's fraction") {
        CHECK(jump_target(LinearJump{1.1}, 30.0) == Catch::Approx(30.0 / 1.1).epsilon(1e-15));
    }
    SECTION("zero is a fixed point of every family") {
        CHECK(jump_target(LinearJump{0.9}, 0.0) == 0.0);
        CHECK(jump_target(PolynomialRejuvenation{0.1, 1.0}, 0.0) == 0.0);
        CHECK(jump_target(SaturatingAging{0.3, 0.1, 1.0}, 0.0) == 0.0);
    }
    SECTION("polynomial round trip at a hand-computed point: f(10) = 20") {
        CHECK(jump_target(PolynomialRejuvenation{0.1, 1.0}, 20.0) ==
              Catch::Approx(10.0).margin(1e-10));
    }
    SECTION("round trip over random ages, all families") {
        const JumpFamily families[] = {
            JumpFamily{LinearJump{1.1}},
            JumpFamily{LinearJump{0.9}},
            JumpFamily{PolynomialRejuvenation{0.1, 1.0}},
            JumpFamily{PolynomialRejuvenation{0.02, 2.5}},
            JumpFamily{SaturatingAging{0.4, 0.2, 1.0}},
            JumpFamily{SaturatingAging{0.2, 0.2, 0.5}},
        };
        Rng rng(13, 0);
        for (const auto& family : families) {
            for (int trial = 0; trial < 100; ++trial) {
                const double b = 200.0 * rng.uniform();
                const double fb = jump_map_eval(family, b).f;
                const double back = jump_map_eval(family, jump_target(family, fb)).f;
                CHECK(std::fabs(back - fb) <= 1e-10 * (1.0 + fb));
            }
        }
    }
    SECTION("rejuvenation moves down, aging moves up") {
        CHECK(jump_target(PolynomialRejuvenation{0.1, 1.0}, 50.0) < 50.0);
        CHECK(jump_target(SaturatingAging{0.3, 0.1, 1.0}, 50.0) > 50.0);
    }
}

TEST_CASE("gamma density and moments") {
    SECTION("exponential special case at zero") {
        CHECK(gamma_density(DemographyParams{1.0, 1.0, 1, 1.0}, 0.0) == Catch::Approx(1.0));
    }
    SECTION("alpha=2, rate=1 at b=1 equals e^-1") {
        CHECK(gamma_density(DemographyParams{1.0, 1.0, 2, 1.0}, 1.0) ==
              Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    }
    SECTION("density integrates to one") {
        const DemographyParams dem{1.0, 1.0, 3, 0.5};
        const double mass = integrate_adaptive(
            [&dem](double b) { return gamma_density(dem, b); }, 0.0, 200.0, 1e-12);
        CHECK(mass == Catch::Approx(1.0).epsilon(1e-10));
    }
    SECTION("closed-form moments") {
        CHECK(gamma_moment(DemographyParams{1.0, 1.0, 1, 1.0}, 0) == 1.0);
        CHECK(gamma_moment(DemographyParams{1.0, 1.0, 1, 2.0}, 1) == Catch::Approx(0.5));
        CHECK(gamma_moment(DemographyParams{1.0, 1.0, 2, 1.0}, 2) == Catch::Approx(6.0));
    }
    SECTION("moments match quadrature for k <= 10, alpha <= 5") {
        for (int alpha : {1, 2, 5}) {
            const DemographyParams dem{1.0, 1.0, alpha, 0.7};
            for (int k = 0; k <= 10; ++k) {
                const double quad = integrate_adaptive(
                    [&dem, k](double b) { return std::pow(b, k) * gamma_density(dem, b); }, 0.0,
                    400.0, 1e-12);
                CHECK(gamma_moment(dem, k) == Catch::Approx(quad).epsilon(1e-8));
            }
        }
    }
    SECTION("cdf is consistent with the density") {
        const DemographyParams dem{1.0, 1.0, 4, 0.8};
        for (double b : {0.5, 2.0, 7.5}) {
            const double quad = integrate_adaptive(
                [&dem](double x) { return gamma_density(dem, x); }, 0.0, b, 1e-12);
            CHECK(gamma_cdf(dem, b) == Catch::Approx(quad).epsilon(1e-10));
        }
    }
}
