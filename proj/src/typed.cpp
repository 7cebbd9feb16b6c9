#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "z2s/deformation.hpp"
#include "z2s/radial.hpp"

namespace z2s {

namespace {

const cplx I(0.0, 1.0);

bool is_minus_one(double a) { return std::abs(a + 1.0) < 1e-12; }

double q_norm2(const Series& q) {
    const double n = q.norm();
    return n * n;
}

}  // namespace

std::vector<TypedLeadingTerm> j_map_apply(const TypedLeadingTerm& term, const Series& eta_dot) {
    if (is_minus_one(term.a)) throw std::invalid_argument("j_map_apply: type with a = -1 has no J image");
    if (std::abs(term.a + term.b - 0.5) > 1e-12) throw std::invalid_argument("j_map_apply: a + b must equal 1/2");
    std::vector<TypedLeadingTerm> out;
    const Series eb = eta_dot.conj();
    TypedLeadingTerm first{term.b, term.a, -I * convolve(eta_dot, term.coeff_plus), I * convolve(eb, term.coeff_minus),
                           term.chi_power};
    if (!first.is_zero()) out.push_back(std::move(first));
    const double factor = term.b / (term.a + 1.0);
    if (factor != 0.0) {
        TypedLeadingTerm second{term.b - 1.0, term.a + 1.0, (-I * factor) * convolve(eb, term.coeff_plus),
                                (I * factor) * convolve(eta_dot, term.coeff_minus), term.chi_power};
        if (!second.is_zero()) out.push_back(std::move(second));
    }
    return out;
}

std::vector<TypedLeadingTerm> merge_by_type(const std::vector<TypedLeadingTerm>& terms) {
    // a is a half-integer, so 2a is an exact key.
    std::map<std::tuple<long, int>, TypedLeadingTerm> acc;
    for (const auto& t : terms) {
        const auto key = std::make_tuple(std::lround(2.0 * t.a), t.chi_power);
        auto it = acc.find(key);
        if (it == acc.end()) {
            acc.emplace(key, t);
        } else {
            it->second.coeff_plus += t.coeff_plus;
            it->second.coeff_minus += t.coeff_minus;
        }
    }
    std::vector<TypedLeadingTerm> out;
    for (auto& [k, t] : acc)
        if (!t.is_zero()) out.push_back(std::move(t));
    return out;
}

double typed_l21_norm(const TypedLeadingTerm& term, const Cutoff& chi, double R) {
    const double p = term.chi_power;
    const double a = term.a, b = term.b;
    double total = 0.0;
    for (int comp = 0; comp < 2; ++comp) {
        const Series& q = comp == 0 ? term.coeff_plus : term.coeff_minus;
        if (q.is_zero()) continue;
        const double Q0 = q_norm2(q);
        const double Q1 = q_norm2(q.derivative());
        // Where chi = 1 the profile is exactly r^{1/2} times the angular factor.
        const double r1 = std::min(chi.inner, R);
        double acc = r1 * r1 * r1 / 3.0 * (Q0 + Q1);
        acc += 2.0 * Q0 * (a * a + b * b) * r1;
        const double r2 = std::min(chi.outer, R);
        if (r2 > r1) {
            const int n = 1201;
            std::vector<double> x(n), f(n);
            for (int j = 0; j < n; ++j) {
                x[j] = r1 + (r2 - r1) * j / (n - 1);
                const double r = x[j];
                const double c = chi.value(r);
                const double cp = std::pow(c, p);
                const double dc = (p == 0.0) ? 0.0 : 0.5 * p * std::pow(c, p - 1.0) * chi.d1(r);
                const double ga = dc + a * cp / r;
                const double gb = dc + b * cp / r;
                f[j] = (cp * cp * r * (Q0 + Q1) + 2.0 * r * Q0 * (ga * ga + gb * gb)) * r;
            }
            const auto w = simpson_weights(x);
            for (int j = 0; j < n; ++j) acc += w[j] * f[j];
        }
        total += 2.0 * std::numbers::pi * acc;
    }
    return std::sqrt(total);
}

std::vector<TypedLeadingTerm> EprimeResult::sum() const {
    std::vector<TypedLeadingTerm> all;
    for (const auto& d : differences) all.insert(all.end(), d.begin(), d.end());
    return merge_by_type(all);
}

EprimeResult eprime_series_raw(const TypedLeadingTerm& seed, const Series& eta_dot, const Cutoff& chi, double s,
                               double R, int max_terms, double stop_rel) {
    if (max_terms < 1) throw std::invalid_argument("eprime_series: max_terms must be positive");
    EprimeResult res;
    TypedLeadingTerm s0 = seed;
    s0.chi_power = 1;
    std::vector<TypedLeadingTerm> cur;
    if (!s0.is_zero()) cur.push_back(s0);
    auto norm_of = [&](const std::vector<TypedLeadingTerm>& d) {
        double n2 = 0.0;
        for (const auto& t : d) {
            const double n = typed_l21_norm(t, chi, R);
            n2 += n * n;
        }
        return std::sqrt(n2);
    };
    res.differences.push_back(cur);
    res.difference_norms.push_back(norm_of(cur));
    const double first = res.difference_norms.front();
    if (cur.empty()) {
        res.converged = true;
        return res;
    }
    for (int k = 1; k < max_terms; ++k) {
        std::vector<TypedLeadingTerm> next;
        for (const auto& t : cur) {
            if (is_minus_one(t.a)) {
                res.forbidden_type = true;
                continue;
            }
            for (auto& o : j_map_apply(t, eta_dot)) {
                o.coeff_plus *= s;
                o.coeff_minus *= s;
                o.chi_power = k + 1;
                next.push_back(std::move(o));
            }
        }
        next = merge_by_type(next);
        for (const auto& t : next)
            if (is_minus_one(t.a)) res.forbidden_type = true;
        cur = std::move(next);
        res.differences.push_back(cur);
        const double n = norm_of(cur);
        res.ratios.push_back(res.difference_norms.back() > 0.0 ? n / res.difference_norms.back() : 0.0);
        res.difference_norms.push_back(n);
        if (cur.empty() || n <= stop_rel * first) break;
    }
    for (double r : res.ratios) res.max_ratio = std::max(res.max_ratio, r);
    for (double n : res.difference_norms) res.norm_12 += n;
    const double last = res.difference_norms.back();
    if (cur.empty() || last <= 1e-14 * first) {
        res.converged = true;
    } else {
        const double rho = res.ratios.empty() ? 1.0 : res.ratios.back();
        res.converged = rho < 1.0 && last * rho / (1.0 - rho) <= 1e-10 * res.norm_12;
    }
    return res;
}

EprimeResult eprime_series(const TypedLeadingTerm& seed, const PerturbationFrame& f, int max_terms, bool strict) {
    const bool type_ok = (std::abs(seed.a - 0.5) < 1e-12 && std::abs(seed.b) < 1e-12) ||
                         (std::abs(seed.a) < 1e-12 && std::abs(seed.b - 0.5) < 1e-12);
    if (!type_ok) throw std::invalid_argument("eprime_series: seed must have type (1/2, 0) or (0, 1/2)");
    validate_frame(f);
    const double gamma = f.gamma_T();
    const double threshold = 1.0 / (2.0 * gamma * gamma * f.kappa1 * std::sqrt(f.frak_r));
    if (f.s >= threshold) throw std::invalid_argument("eprime_series: s is not below 1/(2 gamma_T^2 kappa1 frak_r^{1/2})");
    auto res = eprime_series_raw(seed, f.eta.derivative(), f.chi(), f.s, f.R, max_terms, 0.0);
    res.threshold = threshold;
    if (strict && res.forbidden_type) throw std::runtime_error("eprime_series: reached a component with a = -1");
    if (strict && !res.converged) throw std::runtime_error("eprime_series: no convergence within max_terms");
    return res;
}

}  // namespace z2s
