#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "z2s/deformation.hpp"
#include "z2s/fredholm.hpp"
#include "z2s/rng.hpp"

using namespace z2s;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0.0, 1.0);

Series random_series(Stream& rng, int band) {
    Series s(band);
    for (int l = -band; l <= band; ++l) s.ref(l) = cplx(rng.normal(), rng.normal()) / (1.0 + l * l);
    return s;
}

double max_diff(const Series& a, const Series& b) {
    const int band = std::max(a.band(), b.band());
    double m = 0.0;
    for (int l = -band; l <= band; ++l) m = std::max(m, std::abs(a[l] - b[l]));
    return m;
}

// eta scaled to half the kappa0 = 1 bounds, kappa1 set to the smallest admissible value.
PerturbationFrame random_frame(Stream& rng, double s) {
    PerturbationFrame f;
    f.R = 1.0;
    f.frak_r = 0.2;
    f.T = 16.0;
    f.P = 2.0;
    f.kappa0 = 1.0;
    Series eta = random_series(rng, 2);
    const double r = f.frak_r;
    const double scale = std::max({eta.norm() / (r * r), eta.derivative().norm() / r, eta.derivative().derivative().norm()});
    f.eta = (0.5 / scale) * eta;
    f.kappa1 = kappa1_required(f.eta, f.chi(), f.frak_r, f.T, f.R);
    f.s = s;
    return f;
}

// (4x(1-x))^8 on [a, b], C^7 at the ends.
double bump(double r, double a, double b) {
    if (r <= a || r >= b) return 0.0;
    const double x = (r - a) / (b - a);
    return std::pow(4.0 * x * (1.0 - x), 8);
}

double bump_d(double r, double a, double b) {
    if (r <= a || r >= b) return 0.0;
    const double x = (r - a) / (b - a);
    return 8.0 * std::pow(4.0 * x * (1.0 - x), 7) * 4.0 * (1.0 - 2.0 * x) / (b - a);
}

}  // namespace

TEST_CASE("cutoff profile and its derivative bounds") {
    const Cutoff c = level_cutoff(0.2, 16.0, 0);
    CHECK(c.value(0.01) == 1.0);
    CHECK(c.value(0.25) == 0.0);
    double m1 = 0.0, m2 = 0.0;
    for (int j = 0; j <= 4000; ++j) {
        const double r = c.inner + c.width() * j / 4000.0;
        m1 = std::max(m1, std::abs(c.d1(r)));
        m2 = std::max(m2, std::abs(c.d2(r)));
        if (j > 0 && j < 4000) {
            const double h = 1e-7;
            CHECK(std::abs((c.value(r + h) - c.value(r - h)) / (2 * h) - c.d1(r)) < 1e-5 * c.max_d1());
        }
    }
    CHECK(m1 <= c.max_d1() * (1 + 1e-12));
    CHECK(m1 > 0.999 * c.max_d1());
    CHECK(m2 <= c.max_d2() * (1 + 1e-12));
    // |chi'| <= (15/8) gamma_T / frak_r
    CHECK(c.max_d1() == doctest::Approx(15.0 / 8.0 * (16.0 / 15.0) / 0.2));
}

TEST_CASE("pull-back matrix is the identity at s = 0") {
    Stream rng(3, 0);
    auto f = random_frame(rng, 0.0);
    const auto M = pullback_matrix_M(f, 0.1, 0.7, 1.3);
    CHECK((M - Eigen::Matrix3cd::Identity()).norm() == 0.0);
}

TEST_CASE("pull-back matrix inverts the Jacobian of the deformation") {
    Stream rng(5, 0);
    auto f = random_frame(rng, 0.02);
    const Cutoff chi = f.chi();
    // Jacobian of (tau, u, ubar) in (t, z, zbar) by finite differences of the map itself.
    auto u_of = [&](double x, double y, double t) {
        const double r = std::hypot(x, y);
        return cplx(x, y) + f.s * chi.value(r) * f.eta.eval(t);
    };
    for (double r : {0.005, 0.02, 0.1, 0.15, 0.19}) {
        for (double th : {0.3, 2.0, 4.4}) {
            const double t = 0.9 + th;
            const double x = r * std::cos(th), y = r * std::sin(th), h = 1e-6;
            const cplx ux = (u_of(x + h, y, t) - u_of(x - h, y, t)) / (2 * h);
            const cplx uy = (u_of(x, y + h, t) - u_of(x, y - h, t)) / (2 * h);
            const cplx ut = (u_of(x, y, t + h) - u_of(x, y, t - h)) / (2 * h);
            const cplx u_z = 0.5 * (ux - I * uy), u_zb = 0.5 * (ux + I * uy);
            Eigen::Matrix3cd J;
            J << 1.0, 0.0, 0.0, ut, u_z, u_zb, std::conj(ut), std::conj(u_zb), std::conj(u_z);
            const auto M = pullback_matrix_M(f, r, th, t);
            CHECK((M * J - Eigen::Matrix3cd::Identity()).norm() < 1e-8);
        }
    }
}

TEST_CASE("pull-back matrix in the core with constant and varying eta") {
    PerturbationFrame f;
    f.frak_r = 0.2;
    f.T = 16.0;
    f.kappa0 = 1.0;
    f.eta = Series::constant(0.01);
    f.kappa1 = kappa1_required(f.eta, f.chi(), f.frak_r, f.T, f.R);
    f.s = 0.05;
    CHECK((pullback_matrix_M(f, 0.005, 1.0, 2.0) - Eigen::Matrix3cd::Identity()).norm() < 1e-15);
    f.eta = Series::mode(1, 0.01);
    const auto M = pullback_matrix_M(f, 0.005, 1.0, 2.0);
    const cplx et = f.eta.derivative().eval(2.0);
    Eigen::Matrix3cd expect = Eigen::Matrix3cd::Identity();
    expect(1, 0) = -f.s * et;
    expect(2, 0) = -f.s * std::conj(et);
    CHECK((M - expect).norm() < 1e-15);
}

TEST_CASE("pull-back matrix depends smoothly on s") {
    Stream rng(8, 0);
    auto f = random_frame(rng, 0.0);
    const double r = 0.15, th = 1.1, t = 2.2, s0 = 0.03;
    const auto p = frame_point(f.chi(), f.eta, f.eta.derivative(), r, th, t);
    // N(s) = N0 + s N1 + s^2 N2 from the displayed entries, M = N / (1 + s a).
    const cplx eb = std::conj(p.eta), etb = std::conj(p.eta_t), cross = p.eta_t * eb - etb * p.eta;
    Eigen::Matrix3cd N1, N2;
    N1 << p.a, 0, 0, -p.chi * p.eta_t, p.chi_zbar * eb, -p.chi_zbar * p.eta, -p.chi * etb, -p.chi_z * eb, p.chi_z * p.eta;
    N2.setZero();
    N2(1, 0) = -p.chi * p.chi_zbar * cross;
    N2(2, 0) = p.chi * p.chi_z * cross;
    const double den = 1.0 + s0 * p.a;
    const Eigen::Matrix3cd N = Eigen::Matrix3cd::Identity() + s0 * N1 + s0 * s0 * N2;
    const Eigen::Matrix3cd dM = (N1 + 2.0 * s0 * N2) / den - N * p.a / (den * den);
    auto fd = [&](double h) {
        auto g = f;
        g.s = s0 + h;
        const auto Mp = pullback_matrix_M(g, r, th, t);
        g.s = s0 - h;
        const auto Mm = pullback_matrix_M(g, r, th, t);
        return ((Mp - Mm) / (2 * h) - dM).norm();
    };
    const double e1 = fd(1e-2), e2 = fd(5e-3);
    CHECK(e1 > 0.0);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("pull-back matrix rejects large perturbations and points off the cylinder") {
    PerturbationFrame f;
    f.frak_r = 0.2;
    f.T = 16.0;
    f.eta = Series::constant(0.04);
    // theta = 0 makes a = chi' eta negative; s = 1/|a| puts 1 + s a at zero.
    const auto p = frame_point(f.chi(), f.eta, f.eta.derivative(), 0.1, 0.0, 0.0);
    REQUIRE(p.a < 0.0);
    f.s = 1.0 / std::abs(p.a);
    CHECK_THROWS_AS(pullback_matrix_M(f, 0.1, 0.0, 0.0), std::domain_error);
    f.s = 0.01;
    CHECK_THROWS_AS(pullback_matrix_M(f, 1.5, 0.0, 0.0), std::domain_error);
}

TEST_CASE("rho stays within 2 gamma kappa1 s on a sample grid") {
    Stream rng(21, 0);
    for (int trial = 0; trial < 3; ++trial) {
        auto f = random_frame(rng, 0.0);
        f.s = f.s_max();
        double worst = 0.0;
        for (int a = 0; a < 10; ++a)
            for (int b = 0; b < 10; ++b)
                for (int c = 0; c < 10; ++c) {
                    const double r = f.frak_r / f.T + (f.frak_r - f.frak_r / f.T) * (a + 0.5) / 10.0;
                    worst = std::max(worst, std::abs(varrho(f, r, 2 * kPi * b / 10.0, 2 * kPi * c / 10.0)));
                }
        CHECK(worst <= 2.0 * f.gamma_T() * f.kappa1 * f.s);
    }
}

TEST_CASE("coefficient split: Theta is the linear part and the remainder is quadratic in s") {
    Stream rng(9, 0);
    auto f = random_frame(rng, 0.0);
    const Cutoff chi = f.chi();
    double prev = 0.0;
    for (double s : {0.02, 0.01}) {
        double worst = 0.0;
        for (double r : {0.02, 0.05, 0.1, 0.15}) {
            const auto sp = split_coefficients(chi, f.eta, s, f.R, r, 0.4, 1.7);
            for (const auto& m : sp.remainder) worst = std::max(worst, m.norm());
        }
        if (prev > 0.0) CHECK(prev / worst == doctest::Approx(4.0).epsilon(0.05));
        prev = worst;
    }
}

TEST_CASE("closed-form remainder matches the coefficient split") {
    Stream rng(10, 0);
    auto f = random_frame(rng, 0.0);
    const Cutoff chi = f.chi();
    const Series eta_t = f.eta.derivative();
    const double s = 0.05;
    for (double r : {0.02, 0.05, 0.1, 0.15})
        for (double th : {0.3, 2.9})
            for (double t : {0.0, 1.7, 4.4}) {
                const auto sp = split_coefficients(chi, f.eta, s, f.R, r, th, t);
                const auto rq = remainder_over_s2(frame_point(chi, f.eta, eta_t, r, th, t), s);
                for (int j = 0; j < 3; ++j) {
                    const double scale = std::max(1e-300, (sp.remainder[j] / (s * s)).norm());
                    CHECK((rq[j] - sp.remainder[j] / (s * s)).norm() <= 1e-8 * std::max(scale, 1.0));
                }
            }
}

TEST_CASE("decomposition budget vanishes at s = 0 and for eta = 0") {
    Stream rng(4, 0);
    auto f = random_frame(rng, 0.0);
    auto rep = decomposition_norm_budget(f);
    CHECK(rep.R_measured == 0.0);
    CHECK(rep.theta_sup == 0.0);
    for (double a : rep.A_measured) CHECK(a == 0.0);
    CHECK(rep.F_sup == 0.0);
    CHECK(rep.all_ok);
    f.eta = Series(2);
    f.s = 0.01;
    rep = decomposition_norm_budget(f);
    CHECK(rep.R_measured == 0.0);
    CHECK(rep.theta_sup == 0.0);
    for (double a : rep.A_measured) CHECK(a == 0.0);
    CHECK(rep.F_sup == 0.0);
    CHECK(rep.F_displayed_sup == 0.0);
}

TEST_CASE("decomposition budget on random admissible frames at s = 0.01") {
    Stream rng(17, 0);
    for (int trial = 0; trial < 3; ++trial) {
        auto f = random_frame(rng, 0.01);
        f.kappa1 = 1.0;
        REQUIRE(check_frame(f).ok);
        const auto rep = decomposition_norm_budget(f);
        CHECK(rep.R_measured <= rep.R_budget);
        for (double a : rep.A_measured) CHECK(a <= rep.A_budget);
        CHECK(rep.rho_sup <= rep.rho_budget);
        CHECK(rep.all_ok);
    }
}

TEST_CASE("connection remainder is quadratic in s; tight kappa1 overshoots the slice budget") {
    // With kappa1 at its smallest admissible value the A_s slice integral exceeds
    // gamma^2 kappa1^4 frak_r s^4 by a bounded factor; the scaling in s is exactly quartic.
    Stream rng(17, 0);
    auto f = random_frame(rng, 0.01);
    const auto a = decomposition_norm_budget(f);
    f.s = 0.005;
    const auto b = decomposition_norm_budget(f);
    CHECK(a.A_measured[1] / b.A_measured[1] == doctest::Approx(16.0).epsilon(0.01));
    CHECK(a.R_measured / b.R_measured == doctest::Approx(4.0).epsilon(0.01));
    const double ratio = a.A_measured[1] / a.A_budget;
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
    CHECK(a.R_measured <= a.R_budget);
}

TEST_CASE("frame validation and JSON round trip") {
    Stream rng(2, 0);
    auto f = random_frame(rng, 0.01);
    CHECK(check_frame(f).ok);
    const auto g = frame_from_json(frame_to_json(f));
    CHECK(g.frak_r == f.frak_r);
    CHECK(g.kappa1 == f.kappa1);
    CHECK(max_diff(g.eta, f.eta) == 0.0);
    f.kappa1 *= 0.5;
    CHECK_FALSE(check_frame(f).ok);
    CHECK_THROWS_AS(validate_frame(f), std::invalid_argument);
    auto h = random_frame(rng, 0.01);
    h.frak_r = 0.3;
    CHECK_FALSE(check_frame(h).ok);
}

TEST_CASE("J map on the admissible seeds") {
    const Series ed = Series::mode(1, 0.3);
    TypedLeadingTerm t{0.5, 0.0, Series::constant(1.0), Series::constant(2.0), 1};
    auto out = j_map_apply(t, ed);
    REQUIRE(out.size() == 1);
    CHECK(out[0].a == 0.0);
    CHECK(out[0].b == 0.5);
    CHECK(max_diff(out[0].coeff_plus, Series::mode(1, -0.3 * I)) < 1e-15);
    CHECK(max_diff(out[0].coeff_minus, Series::mode(-1, 0.6 * I)) < 1e-15);

    TypedLeadingTerm u{0.0, 0.5, Series::constant(1.0), Series::constant(1.0), 1};
    out = j_map_apply(u, ed);
    REQUIRE(out.size() == 2);
    CHECK(out[0].a == 0.5);
    CHECK(out[0].b == 0.0);
    CHECK(out[1].a == -0.5);
    CHECK(out[1].b == 1.0);
    // factor b/(a+1) = 1/2
    CHECK(max_diff(out[1].coeff_plus, Series::mode(-1, -0.5 * 0.3 * I)) < 1e-15);
    CHECK(max_diff(out[1].coeff_minus, Series::mode(1, 0.5 * 0.3 * I)) < 1e-15);
    for (const auto& o : out) CHECK(o.a + o.b == doctest::Approx(0.5));

    TypedLeadingTerm z{0.0, 0.5, Series(2), Series(2), 1};
    CHECK(j_map_apply(z, ed).empty());
    TypedLeadingTerm bad{-1.0, 1.5, Series::constant(1.0), Series::constant(1.0), 1};
    CHECK_THROWS_AS(j_map_apply(bad, ed), std::invalid_argument);
}

TEST_CASE("e-prime series terminates when eta is constant") {
    PerturbationFrame f;
    f.frak_r = 0.2;
    f.T = 16.0;
    f.kappa0 = 1.0;
    f.eta = Series::constant(0.01);
    f.kappa1 = kappa1_required(f.eta, f.chi(), f.frak_r, f.T, f.R);
    f.s = 0.01;
    TypedLeadingTerm seed{0.5, 0.0, Series::constant(0.01), Series::constant(0.01), 1};
    const auto res = eprime_series(seed, f, 20);
    CHECK(res.converged);
    CHECK(res.sum().size() == 1);
    CHECK(res.differences.size() == 2);
    CHECK(res.differences[1].empty());
}

TEST_CASE("e-prime series from both seeds at half the threshold") {
    Stream rng(33, 0);
    for (int trial = 0; trial < 3; ++trial) {
        auto f = random_frame(rng, 0.0);
        const double gamma = f.gamma_T();
        f.s = 0.5 / (2.0 * gamma * gamma * f.kappa1 * std::sqrt(f.frak_r));
        f.s = std::min(f.s, f.s_max());
        for (int which = 0; which < 2; ++which) {
            TypedLeadingTerm seed{which == 0 ? 0.5 : 0.0, which == 0 ? 0.0 : 0.5, random_series(rng, 2), random_series(rng, 2), 1};
            const double sc = std::max({seed.coeff_plus.norm() / f.frak_r, seed.coeff_minus.norm() / f.frak_r,
                                        seed.coeff_plus.derivative().norm(), seed.coeff_minus.derivative().norm()});
            seed.coeff_plus *= f.kappa1 / sc;
            seed.coeff_minus *= f.kappa1 / sc;
            const auto res = eprime_series(seed, f, 20, false);
            CHECK_FALSE(res.forbidden_type);
            CHECK(res.max_ratio <= 0.5);
            CHECK(res.norm_12 <= 2.0 * f.kappa1);
            for (const auto& d : res.differences)
                for (const auto& t : d) CHECK(t.a + t.b == doctest::Approx(0.5));
        }
    }
}

TEST_CASE("leading correction: zero data") {
    const auto sym = make_symbol(Series::constant(1.0), Series::constant(1.0));
    const auto H0 = cokernel_complement(sym, 8);
    const auto sol = solve_leading_correction(sym, Series(3), Series(3), H0);
    CHECK(sol.eta.is_zero());
    CHECK(sol.c.is_zero());
    CHECK(sol.k_plus.is_zero());
    CHECK(sol.k_minus.is_zero());
}

TEST_CASE("leading correction: round trip for constant symbols") {
    const auto sym = make_symbol(Series::constant(1.0), Series::constant(1.0));
    const auto H0 = cokernel_complement(sym, 8);
    Stream rng(12, 0);
    const Series eta = random_series(rng, 4), c = random_series(rng, 4);
    const Series hp = -0.5 * (convolve(sym.d_plus, eta) + c);
    const Series hm = -0.5 * (convolve(sym.d_minus, eta.conj()) + aps(c));
    const auto sol = solve_leading_correction(sym, hp, hm, H0);
    CHECK(max_diff(sol.c, c) < 1e-12);
    CHECK(max_diff(sol.eta, eta) < 1e-12);
    CHECK(sol.residual_plus < 1e-10);
    CHECK(sol.residual_minus < 1e-10);
}

TEST_CASE("leading correction: round trip for random symbols up to the kernel of T") {
    Stream rng(13, 0);
    for (int trial = 0; trial < 4; ++trial) {
        const auto sym = random_symbol(rng, 2, 0.3);
        const int L = 20;
        const auto H0 = cokernel_complement(sym, L);
        const Series eta = random_series(rng, 3), c = random_series(rng, 3);
        const Series hp = -0.5 * (convolve(sym.d_plus, eta) + c);
        const Series hm = -0.5 * (convolve(sym.d_minus, eta.conj()) + aps(c));
        LeadingCorrectionOptions opt;
        opt.band = L;
        const auto sol = solve_leading_correction(sym, hp, hm, H0, opt);
        const double scale = hp.norm() + hm.norm();
        CHECK(sol.residual_plus < 1e-9 * scale);
        CHECK(sol.residual_minus < 1e-9 * scale);
        // The c difference lies in ker T.
        CHECK(apply_T(sym, sol.c - c).norm() < 1e-9 * scale);
        for (double x : sol.h0_coefficients) CHECK(std::abs(x) < 1e-9 * scale);
    }
}

TEST_CASE("leading correction agrees with a dense least-squares oracle") {
    const auto sym = make_symbol(Series::constant(1.0), Series::constant(1.0));
    const auto H0 = cokernel_complement(sym, 32);
    const Series hp = Series::mode(1), hm(1);
    LeadingCorrectionOptions opt;
    opt.band = 32;
    const auto sol = solve_leading_correction(sym, hp, hm, H0, opt);
    CHECK(sol.residual_plus <= 1e-9);
    CHECK(sol.residual_minus <= 1e-9);
    // Oracle: columns of T from apply_T on the real basis, complex QR least squares.
    const int L = 32, tb = L;
    Eigen::MatrixXd A(2 * (2 * tb + 1), 2 * (2 * L + 1));
    for (int l = -L; l <= L; ++l)
        for (int part = 0; part < 2; ++part) {
            const Series img = apply_T(sym, Series::mode(l, part == 0 ? cplx(1.0) : I)).resized(tb);
            for (int m = -tb; m <= tb; ++m) {
                A(2 * (m + tb), 2 * (l + L) + part) = img[m].real();
                A(2 * (m + tb) + 1, 2 * (l + L) + part) = img[m].imag();
            }
        }
    const Series rhs = apply_J(sym, hp, hm).resized(tb);
    Eigen::VectorXd b(2 * (2 * tb + 1));
    for (int m = -tb; m <= tb; ++m) {
        b(2 * (m + tb)) = rhs[m].real();
        b(2 * (m + tb) + 1) = rhs[m].imag();
    }
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    Series c_or(L);
    for (int l = -L; l <= L; ++l) c_or.ref(l) = cplx(x(2 * (l + L)), x(2 * (l + L) + 1));
    CHECK(max_diff(sol.c, c_or) < 1e-12);
    // eta from the first equation, d+ = 1.
    CHECK(max_diff(sol.eta, -2.0 * hp - c_or) < 1e-12);
}

TEST_CASE("leading correction rejects a degenerate symbol") {
    SymbolPair sym{Series::constant(0.0), Series::constant(0.0), 0.0};
    CokernelComplement H0;
    CHECK_THROWS_AS(solve_leading_correction(sym, Series::mode(0), Series(0), H0), std::invalid_argument);
}

TEST_CASE("radial solve: zero source gives zero") {
    const auto g = make_geometry(1.0, 5, 5, 512);
    RadialSamples f{std::vector<cplx>(512, 0.0), std::vector<cplx>(512, 0.0)};
    const auto sol = radial_bvp_solve(g, 1, 2, f, false);
    for (std::size_t j = 0; j < 512; ++j) {
        CHECK(sol.u.plus[j] == cplx(0.0));
        CHECK(sol.u.minus[j] == cplx(0.0));
    }
}

namespace {

// Source D(bump (v+, v-)) in closed form, bump = (4x(1-x))^6 on [0.15, 0.95].
RadialSamples manufactured(const std::vector<double>& r, int k, int l, RadialSamples& U) {
    const std::size_t n = r.size();
    RadialSamples f;
    U.plus.resize(n);
    U.minus.resize(n);
    f.plus.resize(n);
    f.minus.resize(n);
    const double lo = 0.15, hi = 0.95;
    for (std::size_t j = 0; j < n; ++j) {
        const double x = r[j];
        double b = 0.0, db = 0.0;
        if (x > lo && x < hi) {
            const double y = (x - lo) / (hi - lo);
            b = std::pow(4 * y * (1 - y), 6);
            db = 6 * std::pow(4 * y * (1 - y), 5) * 4 * (1 - 2 * y) / (hi - lo);
        }
        const cplx vp(x * x, 0.5), vm(1.0 - x, x * x * x);
        const cplx dvp(2 * x, 0.0), dvm(-1.0, 3 * x * x);
        const cplx up = b * vp, um = b * vm;
        const cplx dup = db * vp + b * dvp, dum = db * vm + b * dvm;
        U.plus[j] = up;
        U.minus[j] = um;
        f.plus[j] = double(l) * up + dum + (k + 0.5) * um / x;
        f.minus[j] = -double(l) * um - dup + (k - 0.5) * up / x;
    }
    return f;
}

}  // namespace

TEST_CASE("radial solve against manufactured solutions") {
    // The residual is read off with the fourth-order stencil, so the grid has to resolve the
    // manufactured profile; 2048 nodes put the stencil error of the profile itself near 1e-9.
    const auto g = make_geometry(1.0, 5, 5, 2048);
    const auto& r = g.radial_grid;
    const std::size_t n = r.size();
    for (int k : {-2, -1, 0, 1, 3}) {
        for (int l : {0, 1, -3}) {
            RadialSamples U;
            const auto f = manufactured(r, k, l, U);
            const auto sol = radial_bvp_solve(g, k, l, f, false);
            CHECK(sol.residual <= 1e-8);
            // The difference is an admissible homogeneous solution.
            const cplx a = sol.alpha, bb = sol.beta;
            if (k >= 1) CHECK(bb == cplx(0.0));
            if (k <= -1) CHECK(a == cplx(0.0));
            double worst = 0.0, scale = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const auto p = family_value(Family::Plus, k, l, r[j]);
                const auto m = family_value(Family::Minus, k, l, r[j]);
                const cplx hp = a * p[0] + bb * m[0], hm = a * p[1] + bb * m[1];
                worst = std::max({worst, std::abs(sol.u.plus[j] - U.plus[j] - hp), std::abs(sol.u.minus[j] - U.minus[j] - hm)});
                scale = std::max({scale, std::abs(U.plus[j]), std::abs(U.minus[j])});
            }
            CHECK(worst <= 1e-8 * scale);
        }
    }
}

TEST_CASE("radial solve residual converges at fourth order") {
    double prev = 0.0;
    for (int n : {512, 1024}) {
        const auto g = make_geometry(1.0, 5, 5, n);
        RadialSamples U;
        const auto f = manufactured(g.radial_grid, 1, 2, U);
        const double res = radial_bvp_solve(g, 1, 2, f, false).residual;
        if (prev > 0.0) CHECK(prev / res >= 8.0);
        prev = res;
    }
}

TEST_CASE("radial solve with the K_r flag kills the hat-minus coefficient") {
    const auto g = make_geometry(1.0, 5, 5, 512);
    const auto& r = g.radial_grid;
    const std::size_t n = r.size();
    RadialSamples f{std::vector<cplx>(n, 0.0), std::vector<cplx>(n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) f.plus[j] = bump(r[j], 0.4, 0.9);
    for (int l : {2, -3, 4}) {
        const auto sol = radial_bvp_solve(g, 0, l, f, true);
        REQUIRE(sol.kr_constrained);
        const auto [hp, hm] = hat_coefficients(sol.alpha, sol.beta, l);
        CHECK(std::abs(hm) <= 1e-14 * std::abs(hp));
        CHECK(sol.residual <= 1e-8);
        const auto free = radial_bvp_solve(g, 0, l, f, false);
        CHECK_FALSE(free.kr_constrained);
    }
}
