#include "z2s/iterate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "z2s/report.hpp"

namespace z2s {

namespace {

const cplx I(0.0, 1.0);
constexpr double kPi = std::numbers::pi;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

double rho(const IterationConfig& c, int j) { return c.frak_r / std::pow(c.T, j); }

double sin4_bump(double r, double a, double b) {
    if (r <= a || r >= b) return 0.0;
    const double s = std::sin(kPi * (r - a) / (b - a));
    return s * s * s * s;
}

template <class F>
std::vector<double> on_grid(const PolarGrid& g, F f) {
    std::vector<double> out(g.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = f(g.r()[j]);
    return out;
}

PolarField shell_field(const std::shared_ptr<const PolarGrid>& grid, const std::vector<ShellMode>& modes,
                       const std::vector<double>& profile) {
    PolarField out(grid);
    for (const auto& m : modes) {
        auto& p = out.at(polar_key(0, m.k, m.l));
        auto& q = out.at(polar_key(1, m.k, m.l));
        for (std::size_t j = 0; j < profile.size(); ++j) {
            p[j] += m.amp_plus * profile[j];
            q[j] += m.amp_minus * profile[j];
        }
    }
    out.prune();
    return out;
}

// Zeroes coefficients at the least-squares noise floor so that they do not multiply the work of
// every later operator application.
Series denoised(const Series& g, double rel_tol) {
    const double thr = rel_tol * g.coeff_norm();
    Series out = g;
    for (int l = -g.band(); l <= g.band(); ++l)
        if (std::abs(g[l]) <= thr) out.ref(l) = 0.0;
    return out.trimmed(0.0);
}

// One level of the perturbation, with everything apply_V needs precomputed.
struct Level {
    Cutoff chi;
    Series eta, eta_t, eta_bar, eta_bar_t;
    std::vector<double> chi_s, half_chi_r;
};

Level make_level(const PolarGrid& g, const Cutoff& chi, const Series& eta) {
    Level L;
    L.chi = chi;
    L.eta = eta;
    L.eta_t = eta.derivative();
    L.eta_bar = eta.conj();
    L.eta_bar_t = L.eta_t.conj();
    L.chi_s = on_grid(g, [&](double r) { return chi.value(r); });
    L.half_chi_r = on_grid(g, [&](double r) { return 0.5 * chi.d1(r); });
    return L;
}

PolarField shifted_nu(const PolarField& f, int m) {
    PolarField out(f.grid_ptr());
    for (const auto& [key, v] : f.components()) out.at({key.comp, key.twice_nu + 2 * m, key.l}) = v;
    return out;
}

// First-order part of D_{s chi eta} - D, given u_z and u_zbar. Theta_z d_z + Theta_zbar d_zbar minus
// s a (E2 d_z + E3 d_zbar) collapses to
//   -s [E1 chi (eta_t d_z + conj(eta_t) d_zbar) + (E2 chi_z + E3 chi_zbar)(eta d_z + conj(eta) d_zbar)],
// the chain rule for d_t, d_z, d_zbar under z -> z + s chi eta.
PolarField apply_V(const Level& L, double s, const PolarField& uz, const PolarField& uzb, int l_cap) {
    const auto E = dirac_symbols();
    PolarField Wt = multiply(uz, L.chi_s, 0, L.eta_t, l_cap);
    Wt += multiply(uzb, L.chi_s, 0, L.eta_bar_t, l_cap);
    PolarField Wa = multiply(uz, L.half_chi_r, 0, L.eta, l_cap);
    Wa += multiply(uzb, L.half_chi_r, 0, L.eta_bar, l_cap);
    PolarField out = clifford(E[0], Wt);
    out += clifford(E[1], shifted_nu(Wa, -1));
    out += clifford(E[2], shifted_nu(Wa, +1));
    out *= -s;
    return out;
}

struct FieldSolve {
    PolarField u;
    Series h_plus, h_minus;  // r^{-1/2} coefficients of the k = 0 modes
    double residual = 0.0;
};

// The residual is relative to the whole field, so modes carrying only round-off do not dominate it.
FieldSolve solve_field(RadialSolver& solver, const PolarField& src, int l_cap, double kr_radius) {
    FieldSolve out{PolarField(src.grid_ptr()), Series(l_cap), Series(l_cap), 0.0};
    const auto& r = solver.geometry().radial_grid;
    double res_abs = 0.0, scale = 0.0;
    for (const auto& [k, l] : field_modes(src)) {
        const RadialSamples f = mode_of(src, k, l);
        const auto sol = solver.solve(k, l, f, true, kr_radius);
        set_mode(out.u, k, l, sol.u);
        double fmax = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) fmax = std::max({fmax, std::abs(f.plus[j]), std::abs(f.minus[j])});
        const double mode_scale = std::max(dirac_term_scale(k, l, sol.u, r, solver.stencils()), fmax);
        res_abs = std::max(res_abs, sol.residual * mode_scale);
        scale = std::max(scale, mode_scale);
        if (k == 0 && std::abs(l) <= l_cap) {
            const double f0 = axis_leading_factor(l);
            out.h_plus.ref(l) = sol.alpha * f0;
            out.h_minus.ref(l) = sol.beta * f0;
        }
    }
    out.residual = scale > 0.0 ? res_abs / scale : 0.0;
    out.u.prune();
    return out;
}

// chi (h+ / sqrt z, h- / sqrt zbar)
PolarField leading_field(const std::shared_ptr<const PolarGrid>& grid, const Series& hp, const Series& hm,
                         const std::vector<double>& chi_s) {
    PolarField out(grid);
    const auto& r = grid->r();
    for (int l = -hp.band(); l <= hp.band(); ++l) {
        if (hp[l] != cplx(0.0)) {
            auto& v = out.at(polar_key(0, 0, l));
            for (std::size_t j = 0; j < r.size(); ++j) v[j] += hp[l] * chi_s[j] / std::sqrt(r[j]);
        }
    }
    for (int l = -hm.band(); l <= hm.band(); ++l) {
        if (hm[l] != cplx(0.0)) {
            auto& v = out.at(polar_key(1, 0, l));
            for (std::size_t j = 0; j < r.size(); ++j) v[j] += hm[l] * chi_s[j] / std::sqrt(r[j]);
        }
    }
    return out;
}

// The harmonic section with leading term (c / (2 sqrt z), c^aps / (2 sqrt zbar)) that decays in r:
// mode l is (c_l / 2) r^{-1/2} e^{-|l| r} (1, sign l).
PolarField harmonic_c(const std::shared_ptr<const PolarGrid>& grid, const Series& c, int l_cap) {
    PolarField out(grid);
    const auto& r = grid->r();
    for (int l = -std::min(c.band(), l_cap); l <= std::min(c.band(), l_cap); ++l) {
        if (c[l] == cplx(0.0)) continue;
        const double sg = l > 0 ? 1.0 : (l < 0 ? -1.0 : 0.0);
        auto& p = out.at(polar_key(0, 0, l));
        auto& q = out.at(polar_key(1, 0, l));
        for (std::size_t j = 0; j < r.size(); ++j) {
            const cplx v = 0.5 * c[l] * std::exp(-std::abs(l) * r[j]) / std::sqrt(r[j]);
            p[j] += v;
            q[j] += sg * v;
        }
    }
    out.prune();
    return out;
}

// R(psi_dom) / s^2 for psi_dom = (d+ sqrt z, d- sqrt zbar), sampled in the transition annulus of the
// level and projected onto (nu, l) by discrete Fourier transforms in theta and t.
PolarField remainder_on_dominant(const std::shared_ptr<const PolarGrid>& grid, const Level& L, const SymbolPair& sym,
                                 double s, const IterationConfig& cfg) {
    PolarField out(grid);
    if (L.eta.is_zero()) return out;
    const auto& r = grid->r();
    const int n_theta = cfg.theta_samples;
    const int m_band = n_theta / 2 - 1;
    const int content = 2 * L.eta.band() + sym.d_plus.band();
    const int n_t = std::max(cfg.t_samples, next_pow2(cfg.l_cap + content + 1));
    const auto eta_s = L.eta.sample(n_t), eta_t_s = L.eta_t.sample(n_t);
    const auto dp = sym.d_plus.sample(n_t), dm = sym.d_minus.sample(n_t);
    const auto dpt = sym.d_plus.derivative().sample(n_t), dmt = sym.d_minus.derivative().sample(n_t);
    std::vector<std::vector<cplx>> g0(n_theta, std::vector<cplx>(n_t)), g1 = g0;
    std::vector<cplx> over_theta(static_cast<std::size_t>(n_theta));
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (!(r[j] > L.chi.inner && r[j] < L.chi.outer)) continue;
        FramePoint p;
        p.chi = L.chi.value(r[j]);
        p.chi_r = L.chi.d1(r[j]);
        p.chi_rr = L.chi.d2(r[j]);
        const double sr = std::sqrt(r[j]);
        for (int a = 0; a < n_theta; ++a) {
            const double th = 2.0 * kPi * a / n_theta;
            p.chi_z = 0.5 * std::polar(1.0, -th) * p.chi_r;
            p.chi_zbar = std::conj(p.chi_z);
            const cplx sz = sr * std::polar(1.0, 0.5 * th), szb = std::conj(sz);
            const cplx unwind = std::polar(1.0, -0.5 * th);
            for (int b = 0; b < n_t; ++b) {
                p.eta = eta_s[b];
                p.eta_t = eta_t_s[b];
                p.a = 2.0 * std::real(p.chi_z * p.eta);
                const auto Rq = remainder_over_s2(p, s);
                const Eigen::Vector2cd dt(dpt[b] * sz, dmt[b] * szb);
                const Eigen::Vector2cd dz(dp[b] / (2.0 * sz), 0.0);
                const Eigen::Vector2cd dzb(0.0, dm[b] / (2.0 * szb));
                const Eigen::Vector2cd v = Rq[0] * dt + Rq[1] * dz + Rq[2] * dzb;
                g0[a][b] = v(0) * unwind;
                g1[a][b] = v(1) * unwind;
            }
        }
        for (int comp = 0; comp < 2; ++comp) {
            const auto& g = comp == 0 ? g0 : g1;
            std::vector<Series> in_t;
            in_t.reserve(static_cast<std::size_t>(n_theta));
            for (int a = 0; a < n_theta; ++a) in_t.push_back(Series::from_samples(g[a], cfg.l_cap));
            for (int l = -cfg.l_cap; l <= cfg.l_cap; ++l) {
                for (int a = 0; a < n_theta; ++a) over_theta[a] = in_t[a][l];
                const Series in_theta = Series::from_samples(over_theta, m_band);
                for (int m = -m_band; m <= m_band; ++m) {
                    const cplx c = in_theta[m];
                    if (c == cplx(0.0)) continue;
                    out.at({comp, 2 * m + 1, l})[j] = c;
                }
            }
        }
    }
    return out;
}

// ||f||_{L2_{-1}} <= min(1, 2 pi r_out) ||f||_{L2}: duality against L2_1 and, for support in N_{r_out},
// the Poincare inequality ||zeta||_{N_r} <= 2 pi r ||grad zeta||.
double dual_norm_proxy(const PolarField& f) {
    const double r_out = f.support_outer();
    return std::min(1.0, 2.0 * kPi * r_out) * std::sqrt(f.norm2());
}

// Largest ||f||^2_{N_{r} - N_{r/2}} / ((r^3 - (r/2)^3) rho_c^{1/4}) over r = rho_c 2^{-j}.
double class_C_norm(const PolarField& f, double rho_c, double r_first) {
    if (f.empty()) return 0.0;
    double worst = 0.0;
    for (double r1 = rho_c; 0.5 * r1 >= r_first; r1 *= 0.5) {
        const double r2 = 0.5 * r1;
        const double vol = r1 * r1 * r1 - r2 * r2 * r2;
        worst = std::max(worst, f.norm2(r2, r1) / (vol * std::pow(rho_c, 0.25)));
    }
    return worst;
}

// exp of the least-squares slope of log v against the index.
double geometric_fit(const std::vector<double>& v) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] > 0.0) {
            x.push_back(static_cast<double>(i));
            y.push_back(std::log(v[i]));
        }
    if (x.size() < 2) return kNaN;
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
}

cplx complex_from_json(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("complex numbers are written as [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

nlohmann::json complex_to_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

}  // namespace

PolarField first_order_variation(const PolarField& u, const Cutoff& chi, const Series& eta, double s, int l_cap) {
    const Level L = make_level(u.grid(), chi, eta);
    return apply_V(L, s, d_z(u), d_zbar(u), l_cap);
}

bool InitialDefect::is_zero() const {
    for (const auto& m : class_A)
        if (m.amp_plus != cplx(0.0) || m.amp_minus != cplx(0.0)) return false;
    for (const auto& m : class_B)
        if (m.amp_plus != cplx(0.0) || m.amp_minus != cplx(0.0)) return false;
    for (const auto& t : class_C)
        if (!t.is_zero()) return false;
    return true;
}

void validate_regime(double T, double P, bool strict) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (strict) {
        const double lo = std::pow(T, 0.125) + 1.0, hi = std::pow(T, 0.2);
        if (!(lo < hi))
            fail("T = " + format_double(T) + " is too small for the strict window: (T^{1/8} + 1, T^{1/5}) = (" +
                 format_double(lo) + ", " + format_double(hi) +
                 ") is empty and the strict regime needs T > 512; rerun without --strict for the desk-scale regime "
                 "T >= 8, 1 < P < T");
        if (!(T > 512.0)) fail("strict regime needs T > 512; rerun without --strict for the desk-scale regime T >= 8");
        if (!(P > lo && P < hi))
            fail("P = " + format_double(P) + " lies outside (T^{1/8} + 1, T^{1/5}) = (" + format_double(lo) + ", " +
                 format_double(hi) + ")");
    } else {
        if (!(T >= 8.0)) fail("T must be at least 8 in the desk-scale regime");
        if (!(P > 1.0 && P < T)) fail("P must satisfy 1 < P < T in the desk-scale regime");
    }
}

void validate_iteration(const IterationConfig& c, const SymbolPair& sym) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(c.R > 0.0)) fail("R must be positive");
    if (!(c.frak_r > 0.0) || c.frak_r > c.R / 4.0) fail("frak_r must satisfy 0 < frak_r <= R/4");
    validate_regime(c.T, c.P, c.strict);
    if (!(c.s >= 0.0) || !std::isfinite(c.s)) fail("s must be a finite nonnegative number");
    const double k1 = c.kappa1.value_or(1.0);
    if (c.kappa0 && !(*c.kappa0 > 0.0)) fail("kappa0 must be positive");
    if (c.kappa1 && !(*c.kappa1 > 0.0)) fail("kappa1 must be positive");
    const double gamma = c.T / (c.T - 1.0);
    const double threshold = 1.0 / (2.0 * gamma * gamma * k1 * std::sqrt(c.frak_r));
    if (!(c.s < threshold))
        fail("s = " + format_double(c.s) + " is not below the e-prime threshold 1/(2 gamma_T^2 kappa1 frak_r^{1/2}) = " +
             format_double(threshold));
    if (c.steps < 1) fail("steps must be at least 1");
    if (c.k_cap < 1 || c.l_cap < 1) fail("k_cap and l_cap must be at least 1");
    if (!(c.dx > 0.0 && c.dx <= 0.5)) fail("dx must lie in (0, 0.5]");
    if (c.theta_samples < 8) fail("theta_samples must be at least 8");
    if (c.t_samples < 2 * c.l_cap + 1) fail("t_samples must be at least 2 l_cap + 1");
    if (c.eprime_terms < 1) fail("eprime_terms must be at least 1");
    if (c.neumann_max < 1 || !(c.neumann_tol > 0.0)) fail("neumann_max must be >= 1 and neumann_tol > 0");
    const double r_first = rho(c, c.steps + 2) / 8.0;
    if (!(r_first > 1e-200)) fail("steps too large: the innermost cutoff radius underflows");
    const double range = std::log(c.R / r_first) + (c.R - r_first) / (0.13 * c.R);
    if (range / c.dx > 200000.0) fail("radial grid would exceed 200000 points; raise dx or lower steps");
    if (!(sym.tau > 0.0)) fail("tau = 0: the symbol pair degenerates");
}

nlohmann::json DefectLedger::to_json() const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json j;
        j["i"] = r.i;
        j["norm_A"] = r.norm_A;
        j["bound_A"] = r.bound_A;
        j["norm_B"] = r.norm_B;
        j["bound_B"] = r.bound_B;
        j["norm_C"] = r.norm_C;
        j["bound_C"] = r.bound_C;
        j["eta_c1_proxy"] = r.eta_c1_proxy;
        j["ratio_fit"] = std::isnan(r.ratio_fit) ? nlohmann::json() : nlohmann::json(r.ratio_fit);
        j["neumann_iterations"] = r.neumann_iterations;
        j["contraction"] = r.contraction;
        j["neumann_gap"] = r.neumann_gap;
        j["bvp_residual"] = r.bvp_residual;
        j["leading_residual"] = r.leading_residual;
        j["dropped"] = r.dropped;
        j["eprime_max_ratio"] = r.eprime_max_ratio;
        recs.push_back(j);
    }
    nlohmann::json j;
    j["records"] = recs;
    j["kappa0"] = kappa0;
    j["kappa1"] = kappa1;
    j["kappa_calibrated"] = kappa_calibrated;
    j["failure_index"] = failure_index;
    j["ratio_fit"] = std::isnan(ratio_fit) ? nlohmann::json() : nlohmann::json(ratio_fit);
    j["decay_ok"] = decay_ok;
    j["regime"] = regime;
    return j;
}

std::string ledger_csv(const DefectLedger& ledger) {
    CsvTable t({"i", "norm_A", "bound_A", "norm_B", "bound_B", "norm_C", "bound_C", "eta_c1_proxy", "ratio_fit"});
    for (const auto& r : ledger.records)
        t.add_row({std::to_string(r.i), format_double(r.norm_A), format_double(r.bound_A), format_double(r.norm_B),
                   format_double(r.bound_B), format_double(r.norm_C), format_double(r.bound_C),
                   format_double(r.eta_c1_proxy), format_double(r.ratio_fit)});
    return t.str();
}

DefectLedger iterate(const InitialDefect& defect, const SymbolPair& sym, const IterationConfig& cfg) {
    validate_iteration(cfg, sym);
    const double R = cfg.R, s = cfg.s;
    const double r_first = rho(cfg, cfg.steps + 2) / 8.0;
    const double lambda = 0.13 * R;
    const double range = std::log(R / r_first) + (R - r_first) / lambda;
    const int n = std::max(64, static_cast<int>(std::ceil(range / cfg.dx)) + 1);
    const auto grid = make_polar_grid(R, n, r_first, lambda);
    RadialSolver solver(grid->geometry);
    const auto E = dirac_symbols();

    const auto w_shell = on_grid(*grid, [&](double r) { return sin4_bump(r, 0.5 * R, R); });
    PolarField fA = shell_field(grid, defect.class_A, w_shell);
    PolarField fB = shell_field(grid, defect.class_B,
                                on_grid(*grid, [&](double r) { return sin4_bump(r, rho(cfg, 1), rho(cfg, 0)); }));
    PolarField fC(grid);
    const Cutoff chi0 = level_cutoff(cfg.frak_r, cfg.T, 0);
    for (const auto& t : defect.class_C)
        fC += typed_field(grid, t.a, t.b, t.coeff_plus, t.coeff_minus, chi0, t.chi_power);
    fC.prune();

    const int M = sym.M();
    const int band = cfg.l_cap + 2 * M + 8;
    const auto H0 = cokernel_complement(sym, std::max(cfg.l_cap, 2 * M + 1));
    LeadingCorrectionOptions lopt;
    lopt.band = band;

    DefectLedger ledger;
    ledger.regime = cfg.strict ? "strict" : "relaxed";
    auto record = [&](int i, const PolarField& A, const PolarField& B, const PolarField& C) {
        LedgerRecord rec;
        rec.i = i;
        rec.norm_A = dual_norm_proxy(A);
        rec.norm_B = dual_norm_proxy(B);
        rec.norm_C = class_C_norm(C, rho(cfg, i), r_first);
        return rec;
    };
    ledger.records.push_back(record(0, fA, fB, fC));

    std::vector<Level> levels;
    for (int i = 0; i < cfg.steps; ++i) {
        const int lam = i + 1;
        const Cutoff chi = level_cutoff(cfg.frak_r, cfg.T, lam);
        const Cutoff chi_next = level_cutoff(cfg.frak_r, cfg.T, lam + 1);
        const auto chi_s = on_grid(*grid, [&](double r) { return chi.value(r); });
        const auto chi_r = on_grid(*grid, [&](double r) { return chi.d1(r); });
        const auto chi_next_s = on_grid(*grid, [&](double r) { return chi_next.value(r); });
        const auto one_minus = on_grid(*grid, [&](double r) { return 1.0 - chi.value(r); });
        double dropped = 0.0;

        // Step 1: D_{s eta^i} h = s f_A + s f_B + (1 - chi) f_C; chi f_C is carried into class C.
        PolarField src = s * fA + s * fB;
        src += multiply(fC, one_minus);
        src.prune();
        dropped += src.truncate(cfg.k_cap, cfg.l_cap);
        PolarField eps = multiply(fC, chi_s);

        FieldSolve sol = solve_field(solver, src, cfg.l_cap, chi.inner);
        int iterations = 1;
        double contraction = 0.0, gap = 0.0;
        if (!levels.empty() && !src.empty()) {
            // Stops at the tolerance or once the update no longer shrinks: the high-|k| solves near
            // the axis set a round-off floor that can sit above neumann_tol.
            double prev = 0.0;
            for (int it = 1; it <= cfg.neumann_max; ++it) {
                const PolarField hg = sol.u - leading_field(grid, sol.h_plus, sol.h_minus, chi_next_s);
                const PolarField hz = d_z(hg), hzb = d_zbar(hg);
                PolarField g = src;
                for (const auto& L : levels) g -= apply_V(L, s, hz, hzb, cfg.l_cap);
                g.prune();
                dropped += g.truncate(cfg.k_cap, cfg.l_cap);
                FieldSolve next = solve_field(solver, g, cfg.l_cap, chi.inner);
                const double diff = std::sqrt((next.u - sol.u).norm2());
                const double scale = std::max(std::sqrt(next.u.norm2()), 1e-300);
                if (prev > 0.0 && diff >= prev) break;
                if (prev > 0.0) contraction = std::max(contraction, diff / prev);
                prev = diff;
                gap = diff / scale;
                sol = std::move(next);
                iterations = it + 1;
                if (gap <= cfg.neumann_tol) break;
            }
            if (gap > 1e-6)
                throw std::runtime_error("iterate: the Neumann loop stalled at relative change " + format_double(gap) +
                                         " in step " + std::to_string(i));
        }

        // Step 2: d+ eta + c + 2h+ = k+, d- conj(eta) + c^aps + 2h- = k-.
        const auto lc = solve_leading_correction(sym, sol.h_plus, sol.h_minus, H0, lopt);
        const Series eta = denoised(lc.eta, 1e-14);

        // Step 3: the next defect.
        PolarField A_next = sol.u + harmonic_c(grid, lc.c, cfg.l_cap);
        A_next = multiply(A_next, w_shell);
        A_next *= -1.0;

        PolarField C_next = eps;
        PolarField B_next(grid);
        const Series eta_t = eta.derivative();
        const TypedLeadingTerm Te{0.0, 0.5, (0.5 * I) * convolve(sym.d_minus.derivative(), eta.conj()),
                                  (0.5 * I) * convolve(sym.d_plus.derivative(), eta), 1};
        double eprime_ratio = 0.0;
        if (!Te.is_zero()) {
            const auto ep = eprime_series_raw(Te, eta_t, chi, s, R, cfg.eprime_terms);
            eprime_ratio = ep.max_ratio;
            for (std::size_t k = 0; k < ep.differences.size(); ++k) {
                const int p = static_cast<int>(k) + 1;
                const auto gp = on_grid(*grid, [&](double r) { return std::pow(chi.value(r), p); });
                std::vector<double> gpp(gp.size());
                for (std::size_t j = 0; j < gp.size(); ++j)
                    gpp[j] = p * std::pow(chi_s[j], p - 1) * chi_r[j];
                for (const auto& t : ep.differences[k]) {
                    const PolarField F = typed_field(grid, t.a, t.b, t.coeff_plus, t.coeff_minus, chi, 0);
                    C_next += multiply(clifford(E[0], d_t(F)), gp);
                    if (k == 0) {
                        C_next += sigma_grad(gpp, F);
                    } else if (s > 0.0) {
                        B_next += (1.0 / s) * sigma_grad(gpp, F);
                    }
                }
            }
        }
        Level cur = make_level(*grid, chi, eta);
        if (s > 0.0) B_next += remainder_on_dominant(grid, cur, sym, s, cfg);
        levels.push_back(std::move(cur));

        for (PolarField* f : {&A_next, &B_next, &C_next}) {
            f->prune();
            dropped += f->truncate(cfg.k_cap, cfg.l_cap);
        }
        fA = std::move(A_next);
        fB = std::move(B_next);
        fC = std::move(C_next);

        LedgerRecord rec = record(i + 1, fA, fB, fC);
        rec.eta_c1_proxy = eta.c1_proxy();
        rec.neumann_iterations = iterations;
        rec.contraction = contraction;
        rec.neumann_gap = gap;
        rec.bvp_residual = sol.residual;
        rec.leading_residual = std::max(lc.residual_plus, lc.residual_minus) / std::max(lc.scale, 1e-300);
        rec.dropped = dropped;
        rec.eprime_max_ratio = eprime_ratio;
        ledger.records.push_back(rec);
        ledger.etas.push_back(eta);
    }

    // Budgets kappa P^i / T^{5i/2} (classes A, B) and kappa P^i (class C); kappas frozen from records 0, 1.
    auto& rec = ledger.records;
    const double decay = cfg.P / std::pow(cfg.T, 2.5);
    if (cfg.kappa0 && cfg.kappa1) {
        ledger.kappa0 = *cfg.kappa0;
        ledger.kappa1 = *cfg.kappa1;
    } else {
        ledger.kappa_calibrated = true;
        ledger.kappa0 = cfg.kappa0.value_or(2.0 * std::max(rec[0].norm_A, rec[1].norm_A / decay));
        ledger.kappa1 = cfg.kappa1.value_or(
            2.0 * std::max({rec[0].norm_B, rec[1].norm_B / decay, rec[0].norm_C, rec[1].norm_C / cfg.P}));
    }
    std::vector<double> proxies;
    for (auto& r : rec) {
        const double pi = std::pow(cfg.P, r.i);
        r.bound_A = ledger.kappa0 * pi * std::pow(decay / cfg.P, r.i);
        r.bound_B = ledger.kappa1 * pi * std::pow(decay / cfg.P, r.i);
        r.bound_C = ledger.kappa1 * pi;
        const double tol = 1.0 + 1e-12;
        if (ledger.failure_index < 0 &&
            (!(r.norm_A <= r.bound_A * tol) || !(r.norm_B <= r.bound_B * tol) || !(r.norm_C <= r.bound_C * tol)))
            ledger.failure_index = r.i;
        if (r.i >= 1) proxies.push_back(r.eta_c1_proxy);
        r.ratio_fit = r.i >= 2 ? geometric_fit(proxies) : kNaN;
    }
    ledger.ratio_fit = rec.back().ratio_fit;
    const bool any_eta = std::any_of(proxies.begin(), proxies.end(), [](double v) { return v > 0.0; });
    ledger.decay_ok = !any_eta || (ledger.ratio_fit <= cfg.P / cfg.T);
    return ledger;
}

CauchyTail cauchy_tail(const DefectLedger& ledger) {
    CauchyTail out;
    std::vector<double> v;
    for (const auto& e : ledger.etas) v.push_back(e.norm());
    double acc = 0.0;
    for (double x : v) {
        acc += x;
        out.partial_sums.push_back(acc);
    }
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        double tail = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) tail += v[j];
        double bound = 0.0;
        if (i + 1 < n) {
            double q = 0.0;
            for (std::size_t j = i + 1; j + 1 < n; ++j)
                if (v[j] > 0.0) q = std::max(q, v[j + 1] / v[j]);
            bound = q < 1.0 ? v[i + 1] / (1.0 - q) : std::numeric_limits<double>::infinity();
        }
        out.tail_actual.push_back(tail);
        out.tail_bound.push_back(bound);
        if (!(tail <= bound * (1.0 + 1e-12) + 1e-300)) out.holds = false;
    }
    return out;
}

nlohmann::json iteration_config_to_json(const IterationConfig& c) {
    nlohmann::json j;
    j["R"] = c.R;
    j["frak_r"] = c.frak_r;
    j["T"] = c.T;
    j["P"] = c.P;
    j["s"] = c.s;
    j["kappa0"] = c.kappa0 ? nlohmann::json(*c.kappa0) : nlohmann::json();
    j["kappa1"] = c.kappa1 ? nlohmann::json(*c.kappa1) : nlohmann::json();
    j["steps"] = c.steps;
    j["k_cap"] = c.k_cap;
    j["l_cap"] = c.l_cap;
    j["dx"] = c.dx;
    j["theta_samples"] = c.theta_samples;
    j["t_samples"] = c.t_samples;
    j["eprime_terms"] = c.eprime_terms;
    j["neumann_max"] = c.neumann_max;
    j["neumann_tol"] = c.neumann_tol;
    j["strict"] = c.strict;
    return j;
}

IterationConfig iteration_config_from_json(const nlohmann::json& j) {
    static const char* known[] = {"R",     "frak_r",        "T",         "P",            "s",           "kappa0",
                                  "kappa1", "steps",        "k_cap",     "l_cap",        "dx",          "theta_samples",
                                  "t_samples", "eprime_terms", "neumann_max", "neumann_tol", "strict"};
    for (const auto& [key, val] : j.items())
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw std::invalid_argument("unknown iteration parameter '" + key + "'");
    IterationConfig c;
    c.R = j.value("R", c.R);
    c.frak_r = j.value("frak_r", c.frak_r);
    c.T = j.value("T", c.T);
    c.P = j.value("P", c.P);
    c.s = j.value("s", c.s);
    if (j.contains("kappa0") && !j["kappa0"].is_null()) c.kappa0 = j["kappa0"].get<double>();
    if (j.contains("kappa1") && !j["kappa1"].is_null()) c.kappa1 = j["kappa1"].get<double>();
    c.steps = j.value("steps", c.steps);
    c.k_cap = j.value("k_cap", c.k_cap);
    c.l_cap = j.value("l_cap", c.l_cap);
    c.dx = j.value("dx", c.dx);
    c.theta_samples = j.value("theta_samples", c.theta_samples);
    c.t_samples = j.value("t_samples", c.t_samples);
    c.eprime_terms = j.value("eprime_terms", c.eprime_terms);
    c.neumann_max = j.value("neumann_max", c.neumann_max);
    c.neumann_tol = j.value("neumann_tol", c.neumann_tol);
    c.strict = j.value("strict", c.strict);
    return c;
}

nlohmann::json initial_defect_to_json(const InitialDefect& d) {
    auto modes = [](const std::vector<ShellMode>& ms) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& m : ms)
            a.push_back({{"k", m.k}, {"l", m.l}, {"amp_plus", complex_to_json(m.amp_plus)},
                         {"amp_minus", complex_to_json(m.amp_minus)}});
        return a;
    };
    nlohmann::json c = nlohmann::json::array();
    for (const auto& t : d.class_C)
        c.push_back({{"a", t.a},
                     {"b", t.b},
                     {"coeff_plus", series_to_json(t.coeff_plus)},
                     {"coeff_minus", series_to_json(t.coeff_minus)},
                     {"chi_power", t.chi_power}});
    return {{"class_A", modes(d.class_A)}, {"class_B", modes(d.class_B)}, {"class_C", c}};
}

InitialDefect initial_defect_from_json(const nlohmann::json& j) {
    auto modes = [](const nlohmann::json& a) {
        std::vector<ShellMode> out;
        for (const auto& m : a) {
            ShellMode s;
            s.k = m.at("k").get<int>();
            s.l = m.at("l").get<int>();
            s.amp_plus = m.contains("amp_plus") ? complex_from_json(m["amp_plus"]) : cplx(0.0);
            s.amp_minus = m.contains("amp_minus") ? complex_from_json(m["amp_minus"]) : cplx(0.0);
            out.push_back(s);
        }
        return out;
    };
    InitialDefect d;
    if (j.contains("class_A")) d.class_A = modes(j["class_A"]);
    if (j.contains("class_B")) d.class_B = modes(j["class_B"]);
    if (j.contains("class_C"))
        for (const auto& t : j["class_C"]) {
            TypedLeadingTerm term;
            term.a = t.at("a").get<double>();
            term.b = t.at("b").get<double>();
            if (std::abs(term.a + term.b - 0.5) > 1e-12) throw std::invalid_argument("class_C term needs a + b = 1/2");
            term.coeff_plus = t.contains("coeff_plus") ? series_from_json(t["coeff_plus"]) : Series(0);
            term.coeff_minus = t.contains("coeff_minus") ? series_from_json(t["coeff_minus"]) : Series(0);
            term.chi_power = t.value("chi_power", 1);
            d.class_C.push_back(term);
        }
    return d;
}

}  // namespace z2s
