#include <doctest.h>

#include <cmath>
#include <numbers>

#include "z2s/cylinder.hpp"
#include "z2s/radial.hpp"
#include "z2s/rng.hpp"

using namespace z2s;

namespace {
constexpr double kPi = std::numbers::pi;

double interior_residual(const SpinorModeExpansion& e, int k, int l) {
    const auto& r = e.geometry.radial_grid;
    const auto u = mode_samples(e, k, l, r);
    const auto res = dirac_apply_mode(k, e.l_value(l), u, r);
    double m = 0.0;
    for (std::size_t j = 2; j + 2 < r.size(); ++j) m = std::max({m, std::abs(res.plus[j]), std::abs(res.minus[j])});
    return m / dirac_term_scale(k, e.l_value(l), u, r);
}
}  // namespace

TEST_CASE("bessel_I against closed forms and the standard library") {
    CHECK(bessel_I(0.5, 1.0) == doctest::Approx(std::sqrt(2.0 / kPi) * std::sinh(1.0)).epsilon(1e-14));
    CHECK(bessel_I(-0.5, 1.0) == doctest::Approx(std::sqrt(2.0 / kPi) * std::cosh(1.0)).epsilon(1e-14));
    CHECK(bessel_I(0.5, 1.0) == doctest::Approx(0.9376748882).epsilon(1e-10));
    CHECK(bessel_I(-0.5, 1.0) == doctest::Approx(1.2312002).epsilon(1e-7));
    CHECK(bessel_I(2.5, 0.0) == 0.0);
    for (double p : {0.0, 0.5, 1.5, 3.5, 5.5, 2.0})
        for (double x : {0.01, 0.7, 3.0, 12.0, 40.0})
            CHECK(bessel_I(p, x) == doctest::Approx(std::cyl_bessel_i(p, x)).epsilon(1e-13));
    // I_{-3/2}(x) = sqrt(2/(pi x)) (sinh x - cosh x / x)
    const double x = 2.3;
    CHECK(bessel_I(-1.5, x) == doctest::Approx(std::sqrt(2 / (kPi * x)) * (std::sinh(x) - std::cosh(x) / x)).epsilon(1e-13));
    CHECK(bessel_I(-2.0, 1.3) == doctest::Approx(bessel_I(2.0, 1.3)));
    CHECK_THROWS(bessel_I(0.5, 701.0));
    CHECK_THROWS(bessel_I(0.5, -1.0));
}

TEST_CASE("frak_I normalization") {
    const double r = 0.37;
    for (double l : {1.0, 3.0}) CHECK(frak_I(0.5, l, r) == doctest::Approx(std::sqrt(2 / kPi) * std::sinh(l * r) / (l * std::sqrt(r))).epsilon(1e-13));
    CHECK(frak_I(1.5, 1.0, r) == doctest::Approx(bessel_I(1.5, r)));
    for (double p : {0.5, 1.5, -0.5}) {
        const double small = 1e-6;
        CHECK(frak_I(p, 4.0, small) / std::pow(small, p) == doctest::Approx(1.0 / (std::pow(2.0, p) * std::tgamma(p + 1))).epsilon(1e-9));
    }
    CHECK(frak_I(0.5, -2.0, r) == frak_I(0.5, 2.0, r));
    CHECK_THROWS(frak_I(0.5, 0.0, r));
}

TEST_CASE("dirac residual vanishes on the standard solutions") {
    const auto g = make_geometry(1.0, 5, 5, 512);
    SpinorModeExpansion e;
    e.geometry = g;
    build_harmonic_mode(e, 0, 0, 1.0, 0.0, ProfileClass::L2_KERNEL);
    CHECK(interior_residual(e, 0, 0) < 1e-8);

    RadialSamples zero{std::vector<cplx>(g.radial_grid.size()), std::vector<cplx>(g.radial_grid.size())};
    const auto rz = dirac_apply_mode(3, 2.0, zero, g.radial_grid);
    for (auto z : rz.plus) CHECK(z == cplx(0.0));

    // (k=1, l=2): (J_{1/2}, -2 J_{3/2})
    RadialSamples u;
    for (double r : g.radial_grid) {
        u.plus.emplace_back(frak_I(0.5, 2.0, r));
        u.minus.emplace_back(-2.0 * frak_I(1.5, 2.0, r));
    }
    const auto res = dirac_apply_mode(1, 2.0, u, g.radial_grid);
    double m = 0.0;
    for (std::size_t j = 2; j + 2 < g.radial_grid.size(); ++j) m = std::max({m, std::abs(res.plus[j]), std::abs(res.minus[j])});
    CHECK(m <= 1e-8 * dirac_term_scale(1, 2.0, u, g.radial_grid));
    CHECK_THROWS(dirac_apply_mode(0, 0.0, RadialSamples{{1, 1, 1}, {1, 1, 1}}, {0.1, 0.2, 0.3}));
}

TEST_CASE("both families are harmonic for negative l and every sign of k") {
    // Derivative of the closed-form profile, by a fine central difference, must equal the
    // right-hand side of the radial system evaluated on the profile itself.
    for (int k = -3; k <= 3; ++k)
        for (double l : {-3.0, -1.0, 2.0})
            for (Family f : {Family::Plus, Family::Minus})
                for (double r : {0.07, 0.4, 0.95}) {
                    const double h = 1e-5 * r;
                    const auto up = family_value(f, k, l, r + h), um = family_value(f, k, l, r - h);
                    const auto rhs = family_derivative(f, k, l, r);
                    const auto v = family_value(f, k, l, r);
                    const double scale = std::abs(rhs[0]) + std::abs(rhs[1]) + (std::abs(v[0]) + std::abs(v[1])) / r;
                    for (int c = 0; c < 2; ++c) {
                        const double fd = (up[c] - um[c]) / (2 * h);
                        CHECK(std::abs(fd - rhs[c]) <= 1e-8 * scale);
                    }
                }
}

TEST_CASE("class constraints on k") {
    SpinorModeExpansion e;
    e.geometry = make_geometry(1.0, 3, 3, 128);
    CHECK_THROWS(build_harmonic_mode(e, -1, 0, 1.0, 0.0, ProfileClass::L2_KERNEL));
    CHECK_THROWS(build_harmonic_mode(e, 0, 0, 1.0, 0.0, ProfileClass::L21_KERNEL));
    CHECK_THROWS(build_harmonic_mode(e, 4, 0, 1.0, 0.0, ProfileClass::L2_KERNEL));
    build_harmonic_mode(e, 1, 0, 1.0, 0.0, ProfileClass::L21_KERNEL);
    CHECK_THROWS(build_harmonic_mode(e, 0, 0, 1.0, 0.0, ProfileClass::L2_KERNEL));
    const auto s = mode_samples(e, 1, 0, {0.25});
    CHECK(s.plus[0].real() == doctest::Approx(0.5));
    CHECK(s.minus[0] == cplx(0.0));
}

TEST_CASE("leading data extraction") {
    SpinorModeExpansion e;
    e.geometry = make_geometry(1.0, 3, 3, 128);
    build_harmonic_mode(e, 1, 3, 2.0, 0.0, ProfileClass::L21_KERNEL);
    auto d = extract_leading(e);
    CHECK(d.d_plus[3] == cplx(2.0));
    CHECK(d.d_minus.is_zero());

    SpinorModeExpansion z;
    z.geometry = e.geometry;
    const auto dz = extract_leading(z);
    CHECK(dz.d_plus.is_zero());
    CHECK(!dz.valid());

    SpinorModeExpansion l2;
    l2.geometry = e.geometry;
    build_harmonic_mode(l2, 0, 2, 1.0, 1.0, ProfileClass::L2_KERNEL);
    const auto [hp, hm] = hat_coefficients(1.0, 1.0, 2.0);
    CHECK(hp == cplx(0.0));
    CHECK(hm == cplx(2.0));
    const auto d2 = extract_leading(l2);
    CHECK(d2.d_plus[2] == cplx(0.0));
    CHECK(d2.d_minus[2] == cplx(0.0));
}

TEST_CASE("extraction inverts construction on admissible data") {
    Stream rng(11, 0);
    SpinorModeExpansion e;
    e.geometry = make_geometry(1.0, 3, 4, 128);
    Series dp(4), dm(4);
    for (int l = -4; l <= 4; ++l) {
        dp.ref(l) = cplx(rng.normal(), rng.normal());
        dm.ref(l) = cplx(rng.normal(), rng.normal());
        build_harmonic_mode(e, 1, l, dp[l], 0.0, ProfileClass::L21_KERNEL);
        build_harmonic_mode(e, -1, l, 0.0, dm[l], ProfileClass::L21_KERNEL);
        build_harmonic_mode(e, 2, l, cplx(rng.normal()), 0.0, ProfileClass::L21_KERNEL);
    }
    const auto d = extract_leading(e);
    for (int l = -4; l <= 4; ++l) {
        CHECK(d.d_plus[l] == dp[l]);
        CHECK(d.d_minus[l] == dm[l]);
    }

    // K_R data: hat-minus vanishes for |l| > 1/(2R).
    SpinorModeExpansion k;
    k.geometry = e.geometry;
    for (int l = -4; l <= 4; ++l) {
        const cplx h = cplx(rng.normal(), rng.normal());
        const double s = (l > 0) - (l < 0);
        if (l == 0) build_harmonic_mode(k, 0, 0, h, 2.0 * h, ProfileClass::L2_KERNEL);
        else build_harmonic_mode(k, 0, l, h / 2.0, -s * h / 2.0, ProfileClass::L2_KERNEL);
    }
    const auto dk = extract_leading(k);
    for (int l = -4; l <= 4; ++l) {
        const auto& t = k.terms.at({0, l});
        const auto [hp, hm] = hat_coefficients(t.u_plus, t.u_minus, l);
        if (l == 0) {
            CHECK(dk.d_plus[0] == t.u_plus);
            CHECK(dk.d_minus[0] == t.u_minus);
        } else {
            CHECK(std::abs(hm) == 0.0);
            CHECK(std::abs(dk.d_plus[l] - hp) < 1e-15);
        }
    }
}

TEST_CASE("norm oracles") {
    SpinorModeExpansion e;
    e.geometry = make_geometry(1.0, 2, 2, 512);
    CHECK(cyl_norm(e, 1.0, 0) == 0.0);
    build_harmonic_mode(e, 0, 0, 1.0, 0.0, ProfileClass::L2_KERNEL);
    for (double r : {1.0, 0.5, 0.1234})
        CHECK(std::pow(cyl_norm(e, r, 0), 2) == doctest::Approx(4 * kPi * kPi * r).epsilon(1e-12));
    SpinorModeExpansion v;
    v.geometry = e.geometry;
    build_harmonic_mode(v, 1, 0, 1.0, 0.0, ProfileClass::L21_KERNEL);
    for (double r : {1.0, 0.5, 0.3})
        CHECK(std::pow(cyl_norm(v, r, 0), 2) == doctest::Approx(4 * kPi * kPi * r * r * r / 3).epsilon(1e-10));
    CHECK_THROWS(cyl_norm(v, 1.5, 0));
    CHECK_THROWS(cyl_norm(v, 0.0, 0));
    CHECK(std::isinf(cyl_norm(e, 1.0, 1)));
}

TEST_CASE("norms converge under grid refinement") {
    Stream rng(12, 0);
    auto make = [&](int n) {
        SpinorModeExpansion e;
        e.geometry = make_geometry(1.0, 3, 3, n);
        return e;
    };
    SpinorModeExpansion a = make(512), b = make(1023);
    for (int k = 0; k <= 3; ++k)
        for (int l = -3; l <= 3; ++l) {
            const cplx c(rng.normal(), rng.normal());
            const cplx d = (k == 0) ? cplx(rng.normal(), rng.normal()) : cplx(0.0);
            build_harmonic_mode(a, k, l, c, d, ProfileClass::L2_KERNEL);
            build_harmonic_mode(b, k, l, c, d, ProfileClass::L2_KERNEL);
        }
    for (double r : {1.0, 0.5, 0.2}) CHECK(std::abs(cyl_norm(a, r, 0) / cyl_norm(b, r, 0) - 1.0) < 1e-6);
}

TEST_CASE("modes are orthogonal in L2 of the cylinder") {
    Stream rng(13, 0);
    SpinorModeExpansion e;
    e.geometry = make_geometry(1.0, 2, 2, 256);
    for (int k = 1; k <= 2; ++k)
        for (int l = -2; l <= 2; ++l) build_harmonic_mode(e, k, l, cplx(rng.normal(), rng.normal()), 0.0, ProfileClass::L21_KERNEL);
    for (int l = -2; l <= 2; ++l) build_harmonic_mode(e, -1, l, 0.0, cplx(rng.normal(), rng.normal()), ProfileClass::L21_KERNEL);
    const double per_mode = std::pow(cyl_norm(e, 1.0, 0), 2);

    // Full field on a (theta, t) grid with the e^{i(k -+ 1/2) theta} e^{ilt} phases, then radial Simpson.
    const auto& r = e.geometry.radial_grid;
    const int nth = 16, nt = 16;
    std::vector<double> dens(r.size(), 0.0);
    std::map<std::pair<int, int>, RadialSamples> cache;
    for (const auto& [key, t] : e.terms) cache[key] = mode_samples(e, key.first, key.second, r);
    for (int a = 0; a < nth; ++a)
        for (int b = 0; b < nt; ++b) {
            const double th = 2 * kPi * a / nth, tt = 2 * kPi * b / nt;
            for (std::size_t j = 0; j < r.size(); ++j) {
                cplx up(0.0), um(0.0);
                for (const auto& [key, s] : cache) {
                    const auto [k, l] = key;
                    up += s.plus[j] * std::polar(1.0, (k - 0.5) * th + l * tt);
                    um += s.minus[j] * std::polar(1.0, (k + 0.5) * th + l * tt);
                }
                dens[j] += (std::norm(up) + std::norm(um)) * (2 * kPi / nth) * (2 * kPi / nt);
            }
        }
    const auto sw = simpson_weights(r);
    double brute = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) brute += sw[j] * dens[j] * r[j];
    brute += dens[0] * r[0] * r[0] / 3.0;  // density ~ r at the axis
    CHECK(std::abs(brute / per_mode - 1.0) < 1e-10);
}

TEST_CASE("poincare ratio for the (1,0) mode is 1/(3 pi^2)") {
    SpinorModeExpansion v;
    v.geometry = make_geometry(1.0, 1, 0, 512);
    build_harmonic_mode(v, 1, 0, 1.0, 0.0, ProfileClass::L21_KERNEL);
    CHECK(poincare_check(v, 0.5) == doctest::Approx(1.0 / (3 * kPi * kPi)).epsilon(1e-9));
    SpinorModeExpansion z;
    z.geometry = v.geometry;
    CHECK_THROWS(poincare_check(z, 0.5));
}

TEST_CASE("decay ratio") {
    SpinorModeExpansion v;
    v.geometry = make_geometry(1.0, 3, 3, 512);
    build_harmonic_mode(v, 1, 0, 1.0, 0.0, ProfileClass::L21_KERNEL);
    CHECK(decay_ratio(v, 0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS(decay_ratio(v, 0.7, 1.0));
    build_harmonic_mode(v, 2, -3, cplx(0.3, 1.0), 0.0, ProfileClass::L21_KERNEL);
    build_harmonic_mode(v, -1, 2, 0.0, cplx(-2.0, 0.5), ProfileClass::L21_KERNEL);
    for (double r : {0.5, 0.25, 0.125}) CHECK(decay_ratio(v, r, 1.0) <= 1.0);
}

TEST_CASE("growth margin") {
    SpinorModeExpansion v;
    v.geometry = make_geometry(1.0, 1, 1, 512);
    CHECK(growth_bound_margin(v, 0) == 0.0);
    build_harmonic_mode(v, 1, 1, 1.0, 0.0, ProfileClass::L21_KERNEL);
    for (int k = 0; k <= 3; ++k) CHECK(growth_bound_margin(v, k) <= 1.0);
    CHECK_THROWS(growth_bound_margin(v, 7));
}
