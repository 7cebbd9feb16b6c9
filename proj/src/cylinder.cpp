#include "z2s/cylinder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "z2s/radial.hpp"

namespace z2s {

namespace {
constexpr double kFourPiSq = 4.0 * std::numbers::pi * std::numbers::pi;

bool is_negative_integer(double p) { return p < 0.0 && std::floor(p) == p; }

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

int sign_of(double l) { return l > 0.0 ? 1 : (l < 0.0 ? -1 : 0); }
}  // namespace

double bessel_I(double p, double x) {
    if (!(x >= 0.0)) throw std::domain_error("bessel_I: x must be nonnegative");
    if (x > 700.0) throw std::overflow_error("bessel_I: x > 700 overflows double precision");
    if (is_negative_integer(p)) p = -p;  // I_{-n} = I_n
    if (x == 0.0) {
        if (p == 0.0) return 1.0;
        if (p > 0.0) return 0.0;
        return std::numeric_limits<double>::infinity();
    }
    const double half = 0.5 * x;
    const int gamma_sign = std::tgamma(p + 1.0) < 0.0 ? -1 : 1;
    const double lg = std::lgamma(p + 1.0);
    double term = gamma_sign * std::exp(p * std::log(half) - lg);
    double sum = term;
    const double q = half * half;
    for (int m = 0; m < 100000; ++m) {
        term *= q / ((m + 1.0) * (m + 1.0 + p));
        sum += term;
        if (m + 1 > half && m + 1.0 + p > 0.0 && std::abs(term) < 1e-16 * std::abs(sum)) break;
    }
    return sum;
}

double frak_I(double p, double l, double r) {
    if (l == 0.0) throw std::invalid_argument("frak_I: l = 0 uses the power-law profiles");
    if (!(r > 0.0)) throw std::invalid_argument("frak_I: r must be positive");
    const double a = std::abs(l);
    return std::pow(a, -p) * bessel_I(p, a * r);
}

void CylinderGeometry::validate() const {
    if (!(R > 0.0)) throw std::invalid_argument("geometry: R must be positive");
    if (k_max < 0 || l_max < 0) throw std::invalid_argument("geometry: bands must be nonnegative");
    if (radial_grid.size() < 64) throw std::invalid_argument("geometry: radial grid needs at least 64 points");
    if (!(radial_grid.front() > 0.0)) throw std::invalid_argument("geometry: first radius must be positive");
    if (std::abs(radial_grid.back() - R) > 1e-14 * R) throw std::invalid_argument("geometry: last radius must equal R");
    for (std::size_t i = 1; i < radial_grid.size(); ++i)
        if (!(radial_grid[i] > radial_grid[i - 1])) throw std::invalid_argument("geometry: grid must increase strictly");
}

CylinderGeometry make_geometry(double R, int k_max, int l_max, int n_points) {
    CylinderGeometry g;
    g.R = R;
    g.k_max = k_max;
    g.l_max = l_max;
    g.radial_grid = mapped_radial_grid(R, n_points, R / 2048.0, 0.13 * R);
    g.validate();
    return g;
}

double family_exponent(Family f, int k) { return f == Family::Plus ? k - 0.5 : -k - 0.5; }

std::array<double, 2> family_value(Family f, int k, double l, double r) {
    if (l == 0.0) {
        if (f == Family::Plus) return {std::pow(r, k - 0.5), 0.0};
        return {0.0, std::pow(r, -k - 0.5)};
    }
    if (f == Family::Plus) return {frak_I(k - 0.5, l, r), -l * frak_I(k + 0.5, l, r)};
    return {-l * frak_I(-k + 0.5, l, r), frak_I(-k - 0.5, l, r)};
}

std::array<double, 2> family_derivative(Family f, int k, double l, double r) {
    const auto u = family_value(f, k, l, r);
    return {(k - 0.5) / r * u[0] - l * u[1], -l * u[0] - (k + 0.5) / r * u[1]};
}

bool SpinorModeExpansion::is_zero() const {
    for (const auto& [key, t] : terms)
        if (t.u_plus != cplx(0.0) || t.u_minus != cplx(0.0)) return false;
    return true;
}

RadialSamples dirac_apply_mode(int k, double l, const RadialSamples& u, const std::vector<double>& r) {
    if (r.size() < 5) throw std::invalid_argument("dirac_apply_mode: grid needs at least 5 points");
    return dirac_apply_mode(k, l, u, r, derivative_stencils(r));
}

RadialSamples dirac_apply_mode(int k, double l, const RadialSamples& u, const std::vector<double>& r,
                               const DerivativeStencils& st) {
    if (u.plus.size() != r.size() || u.minus.size() != r.size() || st.start.size() != r.size())
        throw std::invalid_argument("dirac_apply_mode: samples do not match the grid");
    const auto dp = differentiate(st, u.plus);
    const auto dm = differentiate(st, u.minus);
    RadialSamples out;
    out.plus.resize(r.size());
    out.minus.resize(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
        out.plus[j] = l * u.plus[j] + dm[j] + (k + 0.5) * u.minus[j] / r[j];
        out.minus[j] = -l * u.minus[j] - dp[j] + (k - 0.5) * u.plus[j] / r[j];
    }
    return out;
}

double dirac_term_scale(int k, double l, const RadialSamples& u, const std::vector<double>& r) {
    return dirac_term_scale(k, l, u, r, derivative_stencils(r));
}

double dirac_term_scale(int k, double l, const RadialSamples& u, const std::vector<double>& r,
                        const DerivativeStencils& st) {
    const auto dp = differentiate(st, u.plus);
    const auto dm = differentiate(st, u.minus);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
        s = std::max({s, std::abs(l * u.plus[j]), std::abs(dm[j]), std::abs((k + 0.5) * u.minus[j] / r[j]),
                      std::abs(l * u.minus[j]), std::abs(dp[j]), std::abs((k - 0.5) * u.plus[j] / r[j])});
    }
    return s;
}

void check_term_admissible(int k, const ModeTerm& t, int k_max, int l, int l_max) {
    if (std::abs(k) > k_max || std::abs(l) > l_max) throw std::invalid_argument("mode (k, l) outside the geometry bands");
    const bool has_plus = t.u_plus != cplx(0.0), has_minus = t.u_minus != cplx(0.0);
    if (t.cls == ProfileClass::L2_KERNEL) {
        if (k <= -1 && has_plus) throw std::invalid_argument("L2 class requires u+_{k,l} = 0 for k <= -1");
        if (k >= 1 && has_minus) throw std::invalid_argument("L2 class requires u-_{k,l} = 0 for k >= 1");
    } else {
        if (k <= 0 && has_plus) throw std::invalid_argument("L21 class requires u+_{k,l} = 0 for k <= 0");
        if (k >= 0 && has_minus) throw std::invalid_argument("L21 class requires u-_{k,l} = 0 for k >= 0");
    }
}

void build_harmonic_mode(SpinorModeExpansion& e, int k, int l, cplx u_plus, cplx u_minus, ProfileClass cls) {
    ModeTerm t{u_plus, u_minus, cls};
    check_term_admissible(k, t, e.geometry.k_max, l, e.geometry.l_max);
    for (const auto& [key, other] : e.terms)
        if (other.cls != cls) throw std::invalid_argument("expansion mixes L2 and L21 classes");
    e.terms[{k, l}] = t;
}

RadialSamples mode_samples(const SpinorModeExpansion& e, int k, int l, const std::vector<double>& r) {
    RadialSamples s;
    s.plus.assign(r.size(), cplx(0.0));
    s.minus.assign(r.size(), cplx(0.0));
    const auto it = e.terms.find({k, l});
    if (it == e.terms.end()) return s;
    const double lv = e.l_value(l);
    const ModeTerm& t = it->second;
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (t.u_plus != cplx(0.0)) {
            const auto v = family_value(Family::Plus, k, lv, r[j]);
            s.plus[j] += t.u_plus * v[0];
            s.minus[j] += t.u_plus * v[1];
        }
        if (t.u_minus != cplx(0.0)) {
            const auto v = family_value(Family::Minus, k, lv, r[j]);
            s.plus[j] += t.u_minus * v[0];
            s.minus[j] += t.u_minus * v[1];
        }
    }
    return s;
}

double compute_tau(const Series& d_plus, const Series& d_minus, int samples) {
    const auto a = d_plus.sample(samples);
    const auto b = d_minus.sample(samples);
    double tau = std::numeric_limits<double>::infinity();
    for (int j = 0; j < samples; ++j)
        tau = std::min(tau, std::sqrt(std::norm(a[static_cast<std::size_t>(j)]) + std::norm(b[static_cast<std::size_t>(j)])));
    return tau;
}

std::pair<cplx, cplx> hat_coefficients(cplx u_plus, cplx u_minus, double l) {
    const double s = sign_of(l);
    return {u_plus - s * u_minus, u_plus + s * u_minus};
}

LeadingData extract_leading(const SpinorModeExpansion& e) {
    if (e.spin_offset == SpinOffset::HALF_INTEGER_L)
        throw std::invalid_argument("extract_leading: half-integer frequencies have no integer Fourier series");
    const int L = e.geometry.l_max;
    LeadingData d{Series(L), Series(L), 0.0};
    std::optional<ProfileClass> cls;
    for (const auto& [key, t] : e.terms) {
        if (cls && *cls != t.cls) throw std::invalid_argument("extract_leading: mixed classes");
        cls = t.cls;
        const auto [k, l] = key;
        check_term_admissible(k, t, e.geometry.k_max, l, e.geometry.l_max);
        if (t.cls == ProfileClass::L21_KERNEL) {
            if (k == 1) d.d_plus.ref(l) += t.u_plus;
            if (k == -1) d.d_minus.ref(l) += t.u_minus;
        } else if (k == 0) {
            if (l == 0) {
                d.d_plus.ref(0) += t.u_plus;
                d.d_minus.ref(0) += t.u_minus;
                continue;
            }
            const double s = sign_of(l);
            const auto [hp, hm] = hat_coefficients(t.u_plus, t.u_minus, l);
            cplx up = hp, um = -s * hp;
            if (std::abs(static_cast<double>(l)) <= 1.0 / (2.0 * e.geometry.R)) {
                up += hm;
                um += s * hm;
            }
            d.d_plus.ref(l) += up;
            d.d_minus.ref(l) += um;
        }
    }
    d.tau = compute_tau(d.d_plus, d.d_minus);
    return d;
}

namespace {

// Per-mode radial density integrated over [0, r]: order 0 is |U|^2, order 1 adds |grad U|^2,
// order -1 is the angular gradient part alone.
double radial_integral(const SpinorModeExpansion& e, int k, int l, double r, int mode) {
    const auto it = e.terms.find({k, l});
    if (it == e.terms.end()) return 0.0;
    const ModeTerm& t = it->second;
    if (t.u_plus == cplx(0.0) && t.u_minus == cplx(0.0)) return 0.0;
    const double lv = e.l_value(l);

    std::vector<double> nodes;
    for (double x : e.geometry.radial_grid) {
        if (x < r * (1.0 - 1e-14)) nodes.push_back(x);
        else break;
    }
    nodes.push_back(r);

    double p = std::numeric_limits<double>::infinity();
    if (t.u_plus != cplx(0.0)) p = std::min(p, family_exponent(Family::Plus, k));
    if (t.u_minus != cplx(0.0)) p = std::min(p, family_exponent(Family::Minus, k));

    auto density = [&](double rho) {
        cplx up(0.0), um(0.0), dup(0.0), dum(0.0);
        if (t.u_plus != cplx(0.0)) {
            const auto v = family_value(Family::Plus, k, lv, rho);
            const auto dv = family_derivative(Family::Plus, k, lv, rho);
            up += t.u_plus * v[0];
            um += t.u_plus * v[1];
            dup += t.u_plus * dv[0];
            dum += t.u_plus * dv[1];
        }
        if (t.u_minus != cplx(0.0)) {
            const auto v = family_value(Family::Minus, k, lv, rho);
            const auto dv = family_derivative(Family::Minus, k, lv, rho);
            up += t.u_minus * v[0];
            um += t.u_minus * v[1];
            dup += t.u_minus * dv[0];
            dum += t.u_minus * dv[1];
        }
        const double val = std::norm(up) + std::norm(um);
        const double ang = ((k - 0.5) * (k - 0.5) * std::norm(up) + (k + 0.5) * (k + 0.5) * std::norm(um)) / (rho * rho);
        if (mode == -1) return ang * rho;
        if (mode == 0) return val * rho;
        return (val + std::norm(dup) + std::norm(dum) + ang + lv * lv * val) * rho;
    };

    // Leading power of the integrand near the axis.
    const double q = (mode == 0) ? 2.0 * p + 1.0 : 2.0 * p - 1.0;
    const double r1 = nodes.front();
    double tail = 0.0;
    const double g1 = density(r1);
    if (g1 != 0.0) {
        if (q <= -1.0) return std::numeric_limits<double>::infinity();
        tail = g1 * r1 / (q + 1.0);
    }
    if (nodes.size() == 1) return kFourPiSq * tail;
    const auto w = simpson_weights(nodes);
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) acc += w[j] * density(nodes[j]);
    return kFourPiSq * (acc + tail);
}

void check_radius(const SpinorModeExpansion& e, double r) {
    if (!(r > 0.0) || r > e.geometry.R * (1.0 + 1e-14)) throw std::invalid_argument("radius must lie in (0, R]");
}

}  // namespace

double mode_norm2(const SpinorModeExpansion& e, int k, int l, double r, int derivative_order) {
    check_radius(e, r);
    if (derivative_order != 0 && derivative_order != 1) throw std::invalid_argument("derivative order must be 0 or 1");
    return radial_integral(e, k, l, r, derivative_order);
}

double cyl_norm(const SpinorModeExpansion& e, double r, int derivative_order) {
    check_radius(e, r);
    double s = 0.0;
    for (const auto& [key, t] : e.terms) s += mode_norm2(e, key.first, key.second, r, derivative_order);
    return std::sqrt(s);
}

double angular_gradient_norm2(const SpinorModeExpansion& e, double r) {
    check_radius(e, r);
    double s = 0.0;
    for (const auto& [key, t] : e.terms) s += radial_integral(e, key.first, key.second, r, -1);
    return s;
}

double decay_ratio(const SpinorModeExpansion& e, double r, double R) {
    if (e.is_zero()) throw std::invalid_argument("decay_ratio: zero expansion");
    if (r > 0.5 * R * (1.0 + 1e-14)) throw std::invalid_argument("decay_ratio: requires r <= R/2");
    const double inner = std::pow(cyl_norm(e, r, 0), 2);
    const double outer = std::pow(cyl_norm(e, R, 0), 2);
    return inner / (outer * std::pow(r / R, 3));
}

double growth_bound_margin(const SpinorModeExpansion& e, int k) {
    if (k < 0 || k > 6) throw std::invalid_argument("growth_bound_margin: derivative count must be in [0, 6]");
    if (e.is_zero()) return 0.0;
    const LeadingData d = extract_leading(e);
    double lhs = 0.0;
    for (int l = -d.d_plus.band(); l <= d.d_plus.band(); ++l) {
        const double w = (k == 0) ? 1.0 : std::pow(std::abs(static_cast<double>(l)), 2 * k);
        lhs += w * (std::norm(d.d_plus[l]) + std::norm(d.d_minus[l]));
    }
    const double R = e.geometry.R;
    const double n2 = std::pow(cyl_norm(e, R, 0), 2);
    const bool l2 = e.terms.begin()->second.cls == ProfileClass::L2_KERNEL;
    const double rhs = l2 ? 3.0 * factorial(2 * k + 1) / std::pow(R, 2 * k + 1) * n2
                          : factorial(2 * k + 3) / std::pow(R, 2 * k + 3) * n2;
    return lhs / rhs;
}

double poincare_check(const SpinorModeExpansion& e, double r) {
    if (e.is_zero()) throw std::invalid_argument("poincare_check: zero expansion");
    const double lhs = std::pow(cyl_norm(e, r, 0), 2);
    const double rhs = kFourPiSq * r * r * angular_gradient_norm2(e, r);
    return lhs / rhs;
}

nlohmann::json expansion_to_json(const SpinorModeExpansion& e) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [key, t] : e.terms) {
        nlohmann::json jt;
        jt["k"] = key.first;
        jt["l"] = key.second;
        jt["u_plus"] = {t.u_plus.real(), t.u_plus.imag()};
        jt["u_minus"] = {t.u_minus.real(), t.u_minus.imag()};
        jt["class"] = t.cls == ProfileClass::L2_KERNEL ? "L2" : "L21";
        terms.push_back(std::move(jt));
    }
    nlohmann::json j;
    j["R"] = e.geometry.R;
    j["terms"] = std::move(terms);
    return j;
}

SpinorModeExpansion expansion_from_json(const nlohmann::json& j, int n_points) {
    if (!j.is_object() || !j.contains("R") || !j.contains("terms")) throw std::invalid_argument("expansion JSON needs R and terms");
    const double R = j.at("R").get<double>();
    int kmax = 0, lmax = 0;
    for (const auto& jt : j.at("terms")) {
        kmax = std::max(kmax, std::abs(jt.at("k").get<int>()));
        lmax = std::max(lmax, std::abs(jt.at("l").get<int>()));
    }
    SpinorModeExpansion e;
    e.geometry = make_geometry(R, kmax, lmax, n_points);
    for (const auto& jt : j.at("terms")) {
        const auto& up = jt.at("u_plus");
        const auto& um = jt.at("u_minus");
        const std::string c = jt.at("class").get<std::string>();
        if (c != "L2" && c != "L21") throw std::invalid_argument("expansion JSON: class must be L2 or L21");
        build_harmonic_mode(e, jt.at("k").get<int>(), jt.at("l").get<int>(), cplx(up[0].get<double>(), up[1].get<double>()),
                            cplx(um[0].get<double>(), um[1].get<double>()),
                            c == "L2" ? ProfileClass::L2_KERNEL : ProfileClass::L21_KERNEL);
    }
    return e;
}

}  // namespace z2s
