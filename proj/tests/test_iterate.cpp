#include <doctest.h>

#include <cmath>
#include <numbers>

#include "z2s/iterate.hpp"
#include "z2s/polar.hpp"

using namespace z2s;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0.0, 1.0);

// (4x(1-x))^6 on [a, b]
double bump(double r, double a, double b) {
    if (r <= a || r >= b) return 0.0;
    const double x = (r - a) / (b - a);
    return std::pow(4.0 * x * (1.0 - x), 6);
}

PolarField sample_field(const std::shared_ptr<const PolarGrid>& g) {
    PolarField f(g);
    const struct {
        int k, l;
        cplx p, m;
    } modes[] = {{0, 1, {1.0, 0.5}, {-0.3, 0.2}}, {1, -2, {0.4, 0.0}, {0.0, 0.7}}, {-1, 0, {0.2, -0.1}, {0.5, 0.0}}};
    for (const auto& m : modes) {
        auto& p = f.at(polar_key(0, m.k, m.l));
        auto& q = f.at(polar_key(1, m.k, m.l));
        for (std::size_t j = 0; j < g->size(); ++j) {
            const double b = bump(g->r()[j], 0.05, 0.9);
            p[j] = m.p * b;
            q[j] = m.m * b;
        }
    }
    return f;
}

}  // namespace

TEST_CASE("polar dirac agrees with the per-mode operator") {
    const auto g = make_polar_grid(1.0, 600, 1e-3, 0.13);
    const PolarField f = sample_field(g);
    const PolarField Df = dirac(f);
    for (const auto& [k, l] : field_modes(f)) {
        const auto ref = dirac_apply_mode(k, l, mode_of(f, k, l), g->r(), g->stencils);
        const auto got = mode_of(Df, k, l);
        for (std::size_t j = 0; j < g->size(); ++j) {
            CHECK(std::abs(got.plus[j] - ref.plus[j]) <= 1e-10 * (1.0 + std::abs(ref.plus[j])));
            CHECK(std::abs(got.minus[j] - ref.minus[j]) <= 1e-10 * (1.0 + std::abs(ref.minus[j])));
        }
    }
}

TEST_CASE("first-order variation matches the derivative of the pulled-back coefficients") {
    const auto g = make_polar_grid(1.0, 600, 1e-3, 0.13);
    const PolarField u = sample_field(g);
    const Cutoff chi{0.2, 0.5};
    Series eta(2);
    eta.ref(0) = 0.3;
    eta.ref(1) = 0.2;
    eta.ref(-2) = -0.1 * I;
    const PolarField V = first_order_variation(u, chi, eta, 1.0);
    const PolarField ut = d_t(u), uz = d_z(u), uzb = d_zbar(u);
    const double h = 1e-4;
    double worst = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < g->size(); j += 7) {
        const double r = g->r()[j];
        if (r > 0.6) break;
        for (double th : {0.3, 2.1, 4.4})
            for (double t : {0.0, 1.7, 5.2}) {
                // Central difference in s of C_j = sum_i M(j, i) E_i.
                const auto Cp = pulled_back_coefficients(pullback_matrix_M(chi, eta, h, 1.0, r, th, t));
                const auto Cm = pulled_back_coefficients(pullback_matrix_M(chi, eta, -h, 1.0, r, th, t));
                const auto a = evaluate(ut, j, th, t), b = evaluate(uz, j, th, t), c = evaluate(uzb, j, th, t);
                const Eigen::Vector2cd dt(a[0], a[1]), dz(b[0], b[1]), dzb(c[0], c[1]);
                const Eigen::Vector2cd expect =
                    ((Cp[0] - Cm[0]) * dt + (Cp[1] - Cm[1]) * dz + (Cp[2] - Cm[2]) * dzb) / (2.0 * h);
                const auto v = evaluate(V, j, th, t);
                worst = std::max({worst, std::abs(v[0] - expect(0)), std::abs(v[1] - expect(1))});
                scale = std::max({scale, std::abs(expect(0)), std::abs(expect(1))});
            }
    }
    CHECK(scale > 0.1);
    CHECK(worst <= 1e-6 * scale);
}

TEST_CASE("the decaying k = 0 harmonic pair is annihilated") {
    const auto g = make_polar_grid(1.0, 800, 1e-4, 0.13);
    for (int l : {-5, -1, 0, 2, 12}) {
        RadialSamples u;
        const double sg = l > 0 ? 1.0 : (l < 0 ? -1.0 : 0.0);
        for (double r : g->r()) {
            const double v = std::exp(-std::abs(l) * r) / std::sqrt(r);
            u.plus.push_back(v);
            u.minus.push_back(sg * v);
        }
        const auto Du = dirac_apply_mode(0, l, u, g->r(), g->stencils);
        const double sc = dirac_term_scale(0, l, u, g->r(), g->stencils);
        double res = 0.0;
        for (std::size_t j = 0; j < g->size(); ++j) res = std::max({res, std::abs(Du.plus[j]), std::abs(Du.minus[j])});
        CHECK(res <= 1e-7 * sc);
    }
}

TEST_CASE("iteration configuration checks") {
    const auto sym = make_symbol(Series::constant(1.0), Series::constant(1.0));
    IterationConfig c;
    CHECK_NOTHROW(validate_iteration(c, sym));
    IterationConfig bad = c;
    bad.frak_r = 0.3;
    CHECK_THROWS_AS(validate_iteration(bad, sym), std::invalid_argument);
    bad = c;
    bad.strict = true;
    bad.T = 16.0;
    CHECK_THROWS_WITH_AS(validate_iteration(bad, sym), doctest::Contains("512"), std::invalid_argument);
    bad.T = 1024.0;  // window (3.38, 4) is nonempty
    bad.P = 3.7;
    bad.s = 1e-4;
    CHECK_NOTHROW(validate_iteration(bad, sym));
    bad.P = 2.0;
    CHECK_THROWS_WITH_AS(validate_iteration(bad, sym), doctest::Contains("outside"), std::invalid_argument);
    bad = c;
    bad.P = 20.0;
    CHECK_THROWS_AS(validate_iteration(bad, sym), std::invalid_argument);
    bad = c;
    bad.s = 10.0;
    CHECK_THROWS_WITH_AS(validate_iteration(bad, sym), doctest::Contains("threshold"), std::invalid_argument);
}

TEST_CASE("zero defect gives an all-zero ledger") {
    const auto sym = make_symbol(Series::constant(1.0), Series::constant(1.0));
    IterationConfig c;
    c.steps = 2;
    c.kappa0 = 1.0;
    c.kappa1 = 1.0;
    const auto L = iterate(InitialDefect{}, sym, c);
    REQUIRE(L.records.size() == 3);
    for (const auto& r : L.records) {
        CHECK(r.norm_A == 0.0);
        CHECK(r.norm_B == 0.0);
        CHECK(r.norm_C == 0.0);
        CHECK(r.eta_c1_proxy == 0.0);
    }
    CHECK(L.failure_index == -1);
    CHECK(L.decay_ok);
    for (const auto& e : L.etas) CHECK(e.is_zero());
}

TEST_CASE("short iteration stays within budget and shrinks eta") {
    const auto sym = make_symbol(Series::constant(1.0), Series::constant(1.0));
    IterationConfig c;
    c.steps = 3;
    InitialDefect d;
    d.class_A.push_back({0, 1, cplx(1.0), cplx(0.5)});
    const auto L = iterate(d, sym, c);
    REQUIRE(L.records.size() == 4);
    CHECK(L.kappa_calibrated);
    CHECK(L.all_within_budget());
    for (std::size_t i = 1; i < L.records.size(); ++i) {
        CHECK(L.records[i].bvp_residual < 1e-7);
        CHECK(L.records[i].leading_residual < 1e-10);
        CHECK(L.records[i].neumann_gap < 1e-9);
    }
    CHECK(L.records[2].eta_c1_proxy < L.records[1].eta_c1_proxy);
    CHECK(L.ratio_fit <= c.P / c.T);
    const auto tail = cauchy_tail(L);
    CHECK(tail.holds);
    CHECK(tail.partial_sums.size() == 3);
    const auto csv = ledger_csv(L);
    CHECK(csv.rfind("i,norm_A,bound_A,norm_B,bound_B,norm_C,bound_C,eta_c1_proxy,ratio_fit\n", 0) == 0);
}

TEST_CASE("cauchy tail on a synthetic geometric sequence") {
    DefectLedger L;
    for (int i = 0; i < 5; ++i) L.etas.push_back(Series::constant(std::pow(0.1, i) / std::sqrt(2.0 * kPi)));
    const auto t = cauchy_tail(L);
    CHECK(t.holds);
    CHECK(t.partial_sums.back() == doctest::Approx(1.1111));
    CHECK(t.tail_actual[0] == doctest::Approx(0.1111));
    CHECK(t.tail_bound[0] == doctest::Approx(0.1 / 0.9));
    CHECK(t.tail_actual.back() == 0.0);
}

TEST_CASE("iteration inputs round-trip through JSON") {
    IterationConfig c;
    c.kappa1 = 2.5;
    c.steps = 5;
    const auto c2 = iteration_config_from_json(iteration_config_to_json(c));
    CHECK(c2.steps == 5);
    CHECK(c2.kappa1.value() == 2.5);
    CHECK(!c2.kappa0.has_value());
    CHECK_THROWS_AS(iteration_config_from_json(nlohmann::json{{"bogus", 1}}), std::invalid_argument);

    InitialDefect d;
    d.class_A.push_back({1, -2, cplx(0.5, 1.0), cplx(0.0, -1.0)});
    TypedLeadingTerm t;
    t.a = 0.0;
    t.b = 0.5;
    t.coeff_plus = Series::mode(1, 0.3);
    t.coeff_minus = Series::constant(0.1);
    d.class_C.push_back(t);
    const auto d2 = initial_defect_from_json(initial_defect_to_json(d));
    REQUIRE(d2.class_A.size() == 1);
    CHECK(d2.class_A[0].amp_plus == cplx(0.5, 1.0));
    REQUIRE(d2.class_C.size() == 1);
    CHECK(d2.class_C[0].coeff_plus[1] == cplx(0.3));
    CHECK(!d2.is_zero());
}
