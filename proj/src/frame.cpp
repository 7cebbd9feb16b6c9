#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "z2s/deformation.hpp"
#include "z2s/radial.hpp"

namespace z2s {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0.0, 1.0);

double smoothstep(double x) { return x * x * x * (10.0 + x * (-15.0 + 6.0 * x)); }
double smoothstep_d1(double x) { return 30.0 * x * x * (1.0 - x) * (1.0 - x); }
double smoothstep_d2(double x) { return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x); }

double frac(const Cutoff& c, double r) { return (r - c.inner) / c.width(); }

double max_abs_samples(const Series& s, int n = 4096) {
    double m = 0.0;
    for (const auto& v : s.sample(n)) m = std::max(m, std::abs(v));
    return m;
}

// 2 pi int_0^R g(r)^2 r dr over the transition only (g vanishes elsewhere for the uses below).
double radial_l2_squared(const Cutoff& chi, double (*g)(const Cutoff&, double)) {
    const int n = 801;
    std::vector<double> x(n), f(n);
    for (int j = 0; j < n; ++j) {
        x[j] = chi.inner + chi.width() * j / (n - 1);
        const double v = g(chi, x[j]);
        f[j] = v * v * x[j];
    }
    const auto w = simpson_weights(x);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += w[j] * f[j];
    return 2.0 * kPi * acc;
}

double abs_chi_z(const Cutoff& c, double r) { return 0.5 * std::abs(c.d1(r)); }
double abs_chi_zz(const Cutoff& c, double r) { return 0.25 * std::abs(c.d2(r) - c.d1(r) / r); }
double abs_chi_zzbar(const Cutoff& c, double r) { return 0.25 * std::abs(c.d2(r) + c.d1(r) / r); }

}  // namespace

Eigen::Matrix2cd clifford_e1() {
    Eigen::Matrix2cd m;
    m << -I, 0.0, 0.0, I;
    return m;
}
Eigen::Matrix2cd clifford_e2() {
    Eigen::Matrix2cd m;
    m << 0.0, 1.0, 0.0, 0.0;
    return m;
}
Eigen::Matrix2cd clifford_e3() {
    Eigen::Matrix2cd m;
    m << 0.0, 0.0, -1.0, 0.0;
    return m;
}
std::array<Eigen::Matrix2cd, 3> dirac_symbols() {
    return {clifford_e1(), Eigen::Matrix2cd(2.0 * clifford_e2()), Eigen::Matrix2cd(2.0 * clifford_e3())};
}

double Cutoff::value(double r) const {
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    return 1.0 - smoothstep(frac(*this, r));
}
double Cutoff::d1(double r) const {
    if (r <= inner || r >= outer) return 0.0;
    return -smoothstep_d1(frac(*this, r)) / width();
}
double Cutoff::d2(double r) const {
    if (r <= inner || r >= outer) return 0.0;
    return -smoothstep_d2(frac(*this, r)) / (width() * width());
}
double Cutoff::max_d2() const { return 10.0 / (std::sqrt(3.0) * width() * width()); }

Cutoff level_cutoff(double frak_r, double T, int level) {
    const double outer = frak_r / std::pow(T, level);
    return {outer / T, outer};
}

double PerturbationFrame::s_max() const { return 1.0 / (4.0 * gamma_T() * kappa1 * std::sqrt(frak_r)); }

double kappa1_required(const Series& eta, const Cutoff& chi, double frak_r, double T, double R) {
    (void)R;
    const double gamma = T / (T - 1.0);
    const Series eta_t = eta.derivative();
    const double sup_eta = max_abs_samples(eta);
    const double sup_eta_t = max_abs_samples(eta_t);
    const double sqrt_r = std::sqrt(frak_r);
    double req = std::max(0.5 * chi.max_d1() * sup_eta, sup_eta_t) / (gamma * sqrt_r);
    // ||chi_z eta_t||_{L2(N_R)}^2 = (2 pi int |chi_z|^2 r dr) ||eta_t||^2_{L2(S1)}
    const double rad_z = radial_l2_squared(chi, abs_chi_z);
    req = std::max(req, std::sqrt(rad_z) * eta_t.norm() / gamma);
    const double rad_zz = radial_l2_squared(chi, abs_chi_zz);
    const double rad_zzbar = radial_l2_squared(chi, abs_chi_zzbar);
    req = std::max(req, std::sqrt(std::max(rad_zz, rad_zzbar)) * eta.norm() / (gamma * gamma));
    return req;
}

FrameCheck check_frame(const PerturbationFrame& f) {
    FrameCheck c;
    auto fail = [&](std::string m) {
        c.ok = false;
        c.violations.push_back(std::move(m));
    };
    if (!(f.R > 0.0)) fail("R must be positive");
    if (!(f.frak_r > 0.0) || f.frak_r > f.R / 4.0) fail("frak_r must lie in (0, R/4]");
    if (!(f.T > 1.0)) fail("T must exceed 1");
    if (!(f.kappa0 > 0.0) || !(f.kappa1 > 0.0)) fail("kappa0 and kappa1 must be positive");
    if (!(f.s >= 0.0)) fail("s must be nonnegative");
    if (!c.ok) return c;
    const Series et = f.eta.derivative();
    c.eta_norm = f.eta.norm();
    c.eta_t_norm = et.norm();
    c.eta_tt_norm = et.derivative().norm();
    const double r = f.frak_r;
    const double tol = 1.0 + 1e-12;
    if (c.eta_norm > tol * f.kappa0 * r * r) fail("||eta|| exceeds kappa0 frak_r^2");
    if (c.eta_t_norm > tol * f.kappa0 * r) fail("||eta_t|| exceeds kappa0 frak_r");
    if (c.eta_tt_norm > tol * f.kappa0) fail("||eta_tt|| exceeds kappa0");
    c.kappa1_required = kappa1_required(f.eta, f.chi(), f.frak_r, f.T, f.R);
    if (c.kappa1_required > tol * f.kappa1) fail("kappa1 is below the cutoff-weighted bounds of eta");
    if (f.s > f.s_max()) fail("s exceeds 1/(4 gamma_T kappa1 frak_r^{1/2})");
    return c;
}

void validate_frame(const PerturbationFrame& f) {
    const auto c = check_frame(f);
    if (!c.ok) throw std::invalid_argument("invalid perturbation frame: " + c.violations.front());
}

nlohmann::json frame_to_json(const PerturbationFrame& f) {
    nlohmann::json j;
    j["frak_r"] = f.frak_r;
    j["T"] = f.T;
    j["P"] = f.P;
    j["s"] = f.s;
    j["kappa0"] = f.kappa0;
    j["kappa1"] = f.kappa1;
    j["eta"] = series_to_json(f.eta);
    j["R"] = f.R;
    return j;
}

PerturbationFrame frame_from_json(const nlohmann::json& j) {
    PerturbationFrame f;
    f.frak_r = j.at("frak_r").get<double>();
    f.T = j.at("T").get<double>();
    f.P = j.value("P", 2.0);
    f.s = j.at("s").get<double>();
    f.kappa0 = j.at("kappa0").get<double>();
    f.kappa1 = j.at("kappa1").get<double>();
    f.eta = series_from_json(j.at("eta"));
    f.R = j.value("R", 1.0);
    return f;
}

FramePoint frame_point(const Cutoff& chi, const Series& eta, const Series& eta_t, double r, double theta, double t) {
    FramePoint p;
    p.chi = chi.value(r);
    p.chi_r = chi.d1(r);
    p.chi_rr = chi.d2(r);
    p.chi_z = 0.5 * std::polar(1.0, -theta) * p.chi_r;
    p.chi_zbar = std::conj(p.chi_z);
    p.eta = eta.eval(t);
    p.eta_t = eta_t.eval(t);
    p.a = 2.0 * std::real(p.chi_z * p.eta);
    return p;
}

namespace {

Eigen::Matrix3cd M_from_point(const FramePoint& p, double s) {
    const double den = 1.0 + s * p.a;
    if (std::abs(den) < 0.5) throw std::domain_error("perturbation too large: |1 + s(chi_z eta + chi_zbar eta^*)| < 1/2");
    const cplx eb = std::conj(p.eta), etb = std::conj(p.eta_t);
    const cplx cross = p.eta_t * eb - etb * p.eta;  // eta_t conj(eta) - conj(eta_t) eta
    Eigen::Matrix3cd N;
    N(0, 0) = den;
    N(0, 1) = 0.0;
    N(0, 2) = 0.0;
    N(1, 0) = -s * p.chi * p.eta_t - s * s * p.chi * p.chi_zbar * cross;
    N(1, 1) = 1.0 + s * p.chi_zbar * eb;
    N(1, 2) = -s * p.chi_zbar * p.eta;
    N(2, 0) = -s * p.chi * etb + s * s * p.chi * p.chi_z * cross;
    N(2, 1) = -s * p.chi_z * eb;
    N(2, 2) = 1.0 + s * p.chi_z * p.eta;
    return N / den;
}

void check_point(double R, double r) {
    if (!(r > 0.0) || r > R * (1.0 + 1e-12)) throw std::domain_error("point outside N_R");
}

}  // namespace

Eigen::Matrix3cd pullback_matrix_M(const Cutoff& chi, const Series& eta, double s, double R, double r, double theta,
                                   double t) {
    check_point(R, r);
    if (s == 0.0) return Eigen::Matrix3cd::Identity();
    return M_from_point(frame_point(chi, eta, eta.derivative(), r, theta, t), s);
}

Eigen::Matrix3cd pullback_matrix_M(const PerturbationFrame& f, double r, double theta, double t) {
    return pullback_matrix_M(f.chi(), f.eta, f.s, f.R, r, theta, t);
}

double varrho(const PerturbationFrame& f, double r, double theta, double t) {
    check_point(f.R, r);
    const auto p = frame_point(f.chi(), f.eta, f.eta.derivative(), r, theta, t);
    const double den = 1.0 + f.s * p.a;
    if (std::abs(den) < 0.5) throw std::domain_error("perturbation too large");
    return 1.0 / den - 1.0;
}

std::array<Eigen::Matrix2cd, 3> pulled_back_coefficients(const Eigen::Matrix3cd& M) {
    const auto E = dirac_symbols();
    std::array<Eigen::Matrix2cd, 3> C;
    for (int j = 0; j < 3; ++j) {
        C[j].setZero();
        for (int i = 0; i < 3; ++i) C[j] += M(j, i) * E[i];
    }
    return C;
}

namespace {

CoefficientSplit split_at(const FramePoint& p, double s) {
    const auto E = dirac_symbols();
    CoefficientSplit out;
    const Eigen::Matrix3cd M = (s == 0.0) ? Eigen::Matrix3cd::Identity() : M_from_point(p, s);
    const auto C = pulled_back_coefficients(M);
    out.rho = 1.0 / (1.0 + s * p.a) - 1.0;
    const cplx eb = std::conj(p.eta), etb = std::conj(p.eta_t);
    out.theta[0].setZero();
    out.theta[1] = s * (-p.chi * p.eta_t * E[0] + p.chi_zbar * eb * E[1] - p.chi_zbar * p.eta * E[2]);
    out.theta[2] = s * (-p.chi * etb * E[0] - p.chi_z * eb * E[1] + p.chi_z * p.eta * E[2]);
    for (int j = 0; j < 3; ++j) {
        out.remainder[j] = C[j] - (1.0 + out.rho) * E[j] - out.theta[j];
        if (j == 0) out.remainder[j] -= s * p.a * E[0];
    }
    return out;
}

}  // namespace

std::array<Eigen::Matrix2cd, 3> remainder_over_s2(const FramePoint& p, double s) {
    const double den = 1.0 + s * p.a;
    if (std::abs(den) < 0.5) throw std::domain_error("perturbation too large: |1 + s(chi_z eta + chi_zbar eta^*)| < 1/2");
    const auto E = dirac_symbols();
    const cplx eb = std::conj(p.eta), etb = std::conj(p.eta_t);
    const cplx cross = p.eta_t * eb - etb * p.eta;
    Eigen::Matrix3cd N1, N2;
    N1 << p.a, 0.0, 0.0,
          -p.chi * p.eta_t, p.chi_zbar * eb, -p.chi_zbar * p.eta,
          -p.chi * etb, -p.chi_z * eb, p.chi_z * p.eta;
    N2.setZero();
    N2(1, 0) = -p.chi * p.chi_zbar * cross;
    N2(2, 0) = p.chi * p.chi_z * cross;
    const Eigen::Matrix3cd K = (N2 - p.a * N1) / den;
    std::array<Eigen::Matrix2cd, 3> out;
    for (int j = 0; j < 3; ++j) {
        out[j].setZero();
        for (int i = 0; i < 3; ++i) out[j] += K(j, i) * E[i];
    }
    return out;
}

CoefficientSplit split_coefficients(const Cutoff& chi, const Series& eta, double s, double R, double r, double theta,
                                    double t) {
    check_point(R, r);
    return split_at(frame_point(chi, eta, eta.derivative(), r, theta, t), s);
}

namespace {

// Evaluates M at the Cartesian point (x, y, t).
struct MField {
    const Cutoff& chi;
    const Series& eta;
    const Series& eta_t;
    double s;

    Eigen::Matrix3cd at(double x, double y, double t) const {
        const double r = std::hypot(x, y);
        const double th = std::atan2(y, x);
        if (s == 0.0) return Eigen::Matrix3cd::Identity();
        return M_from_point(frame_point(chi, eta, eta_t, r, th, t), s);
    }

    // Fourth-order central differences: returns (d_t M, d_z M, d_zbar M).
    std::array<Eigen::Matrix3cd, 3> derivatives(double x, double y, double t, double h) const {
        auto d4 = [&](auto fn) {
            return Eigen::Matrix3cd((8.0 * (fn(h) - fn(-h)) - (fn(2 * h) - fn(-2 * h))) / (12.0 * h));
        };
        const Eigen::Matrix3cd Mt = d4([&](double e) { return at(x, y, t + e); });
        const Eigen::Matrix3cd Mx = d4([&](double e) { return at(x + e, y, t); });
        const Eigen::Matrix3cd My = d4([&](double e) { return at(x, y + e, t); });
        return {Mt, Eigen::Matrix3cd(0.5 * (Mx - I * My)), Eigen::Matrix3cd(0.5 * (Mx + I * My))};
    }
};

Eigen::Matrix2cd connection_term(const MField& mf, double x, double y, double t, double h) {
    const std::array<Eigen::Matrix2cd, 3> e = {clifford_e1(), clifford_e2(), clifford_e3()};
    const Eigen::Matrix3cd M = mf.at(x, y, t);
    const Eigen::Matrix3cd Minv = M.inverse();
    const auto dM = mf.derivatives(x, y, t, h);
    Eigen::Matrix2cd G = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 3; ++i) {
        // v_i = sum_j M(j, i) d_j
        Eigen::Matrix3cd dvM = Eigen::Matrix3cd::Zero();
        for (int j = 0; j < 3; ++j) dvM += M(j, i) * dM[j];
        const Eigen::Matrix3cd Om = dvM * Minv;
        Eigen::Matrix2cd inner = Eigen::Matrix2cd::Zero();
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) inner += Om(k, l) * e[k] * e[l];
        G += 0.5 * e[i] * inner;
    }
    return G;
}

double opnorm(const Eigen::MatrixXcd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(0);
}

}  // namespace

nlohmann::json DecompositionReport::to_json() const {
    nlohmann::json j;
    j["R_measured"] = R_measured;
    j["R_budget"] = R_budget;
    j["slice_radius"] = slice_radius;
    j["A_measured"] = A_measured;
    j["A_budget"] = A_budget;
    j["theta_sup"] = theta_sup;
    j["F_sup"] = F_sup;
    j["F_displayed_sup"] = F_displayed_sup;
    j["F_mismatch_sup"] = F_mismatch_sup;
    j["rho_sup"] = rho_sup;
    j["rho_budget"] = rho_budget;
    j["all_ok"] = all_ok;
    return j;
}

DecompositionReport decomposition_norm_budget(const PerturbationFrame& f) {
    DecompositionReport rep;
    const Cutoff chi = f.chi();
    const Series eta_t = f.eta.derivative();
    const double gamma = f.gamma_T();
    const double s = f.s;
    rep.R_budget = gamma * gamma * f.kappa1 * f.kappa1 * s * s;
    rep.A_budget = gamma * gamma * std::pow(f.kappa1, 4) * f.frak_r * std::pow(s, 4);
    rep.rho_budget = 2.0 * gamma * f.kappa1 * s;

    std::vector<double> radii;
    for (int j = 0; j < 4; ++j) radii.push_back(chi.inner * (0.2 + 0.2 * j));
    for (int j = 0; j <= 24; ++j) radii.push_back(chi.inner + chi.width() * j / 24.0);
    const int n_theta = 12, n_t = 16;
    const auto E = dirac_symbols();
    for (double r : radii) {
        for (int a = 0; a < n_theta; ++a) {
            const double th = 2.0 * std::numbers::pi * a / n_theta;
            for (int b = 0; b < n_t; ++b) {
                const double t = 2.0 * std::numbers::pi * b / n_t;
                const auto p = frame_point(chi, f.eta, eta_t, r, th, t);
                const auto sp = split_at(p, s);
                Eigen::MatrixXcd stacked(2, 6);
                for (int j = 0; j < 3; ++j) stacked.block(0, 2 * j, 2, 2) = sp.remainder[j];
                rep.R_measured = std::max(rep.R_measured, opnorm(stacked));
                Eigen::MatrixXcd th_st(2, 6);
                for (int j = 0; j < 3; ++j) th_st.block(0, 2 * j, 2, 2) = sp.theta[j];
                rep.theta_sup = std::max(rep.theta_sup, opnorm(th_st));
                rep.rho_sup = std::max(rep.rho_sup, std::abs(sp.rho));
            }
        }
    }

    // Connection term on the three slices and its s-derivative at 0.
    rep.slice_radius = {f.frak_r, f.frak_r / 2.0, f.frak_r / f.T};
    const int ng = 32;
    const double hx = 1e-3 * chi.inner;
    const double ds = std::max(1e-6, 0.05 * s);
    auto gamma_at = [&](double sv, double x, double y, double t) {
        const MField mf{chi, f.eta, eta_t, sv};
        return connection_term(mf, x, y, t, hx);
    };
    const std::array<Eigen::Matrix2cd, 3> Ed = {E[0], E[1], E[2]};
    for (int q = 0; q < 3; ++q) {
        const double r0 = rep.slice_radius[q];
        double acc = 0.0;
        for (int a = 0; a < ng; ++a) {
            const double th = 2.0 * std::numbers::pi * a / ng;
            const double x = r0 * std::cos(th), y = r0 * std::sin(th);
            for (int b = 0; b < ng; ++b) {
                const double t = 2.0 * std::numbers::pi * b / ng;
                if (s == 0.0) continue;
                const Eigen::Matrix2cd G = gamma_at(s, x, y, t);
                const Eigen::Matrix2cd dG = (8.0 * (gamma_at(ds, x, y, t) - gamma_at(-ds, x, y, t)) -
                                             (gamma_at(2 * ds, x, y, t) - gamma_at(-2 * ds, x, y, t))) /
                                            (12.0 * ds);
                const Eigen::Matrix2cd F = s * dG;
                const Eigen::Matrix2cd A = G - F;
                acc += A.squaredNorm();
                rep.F_sup = std::max(rep.F_sup, opnorm(F));
                // Displayed F: D applied to the matrix fields s a Id and s chi [[0, i eta_t], [-i conj eta_t, 0]].
                auto Gfield = [&](double xx, double yy, double tt) {
                    const double rr = std::hypot(xx, yy);
                    const auto p = frame_point(chi, f.eta, eta_t, rr, std::atan2(yy, xx), tt);
                    Eigen::Matrix2cd m;
                    m << s * p.a, I * s * p.chi * p.eta_t, -I * s * p.chi * std::conj(p.eta_t), s * p.a;
                    return m;
                };
                auto d4 = [&](auto fn) {
                    return Eigen::Matrix2cd((8.0 * (fn(hx) - fn(-hx)) - (fn(2 * hx) - fn(-2 * hx))) / (12.0 * hx));
                };
                const Eigen::Matrix2cd Gt = d4([&](double e) { return Gfield(x, y, t + e); });
                const Eigen::Matrix2cd Gx = d4([&](double e) { return Gfield(x + e, y, t); });
                const Eigen::Matrix2cd Gy = d4([&](double e) { return Gfield(x, y + e, t); });
                const Eigen::Matrix2cd Fd = Ed[0] * Gt + Ed[1] * (0.5 * (Gx - I * Gy)) + Ed[2] * (0.5 * (Gx + I * Gy));
                rep.F_displayed_sup = std::max(rep.F_displayed_sup, opnorm(Fd));
                rep.F_mismatch_sup = std::max(rep.F_mismatch_sup, opnorm(Fd - F));
            }
        }
        const double cell = (2.0 * std::numbers::pi / ng) * (2.0 * std::numbers::pi / ng);
        rep.A_measured[q] = acc * cell * r0;
    }

    const double tiny = 1e-300;
    bool ok = rep.R_measured <= rep.R_budget * (1.0 + 1e-12) + tiny;
    for (double a : rep.A_measured) ok = ok && a <= rep.A_budget * (1.0 + 1e-12) + tiny;
    ok = ok && rep.rho_sup <= rep.rho_budget * (1.0 + 1e-12) + tiny;
    rep.all_ok = ok;
    return rep;
}

}  // namespace z2s
