#include "z2s/radial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace z2s {

std::vector<double> mapped_radial_grid(double R, int n, double r_first, double lambda) {
    if (!(R > 0.0) || !(r_first > 0.0) || r_first >= R || n < 5 || !(lambda > 0.0))
        throw std::invalid_argument("mapped_radial_grid: need 0 < r_first < R, lambda > 0, n >= 5");
    auto xmap = [lambda](double r) { return std::log(r) + r / lambda; };
    const double x0 = xmap(r_first), x1 = xmap(R);
    std::vector<double> r(static_cast<std::size_t>(n));
    double guess = r_first;
    for (int j = 0; j < n; ++j) {
        const double xt = x0 + (x1 - x0) * j / (n - 1);
        double rr = guess;
        for (int it = 0; it < 100; ++it) {
            const double f = xmap(rr) - xt;
            const double step = f / (1.0 / rr + 1.0 / lambda);
            double next = rr - step;
            if (next <= 0.0) next = 0.5 * rr;
            if (std::abs(next - rr) <= 1e-16 * rr) {
                rr = next;
                break;
            }
            rr = next;
        }
        r[static_cast<std::size_t>(j)] = rr;
        guess = rr;
    }
    r.front() = r_first;
    r.back() = R;
    return r;
}

namespace {

// d/dz of the Lagrange basis through nodes x[0..n-1], evaluated at z.
std::vector<double> lagrange_derivative(const double* x, int n, double z) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int m = 0; m < n; ++m) {
            if (m == i) continue;
            double prod = 1.0 / (x[i] - x[m]);
            for (int q = 0; q < n; ++q) {
                if (q == i || q == m) continue;
                prod *= (z - x[q]) / (x[i] - x[q]);
            }
            acc += prod;
        }
        w[static_cast<std::size_t>(i)] = acc;
    }
    return w;
}

int window_start(int j, int width, int n) {
    return std::clamp(j - width / 2, 0, n - width);
}

}  // namespace

DerivativeStencils derivative_stencils(const std::vector<double>& r) {
    const int n = static_cast<int>(r.size());
    if (n < 5) throw std::invalid_argument("finite differences need at least 5 grid points");
    // Differences are taken in the grid index and divided by dr/dj, which is itself
    // differentiated with a wider stencil so the map contributes no visible error.
    const int wide = std::min(n, 9);
    std::vector<double> idx(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = j;
    DerivativeStencils st;
    st.start.resize(static_cast<std::size_t>(n));
    st.w.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const int sw = window_start(j, wide, n);
        const auto wr = lagrange_derivative(&idx[static_cast<std::size_t>(sw)], wide, j);
        double drdj = 0.0;
        for (int i = 0; i < wide; ++i) drdj += wr[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(sw + i)];
        if (!(drdj > 0.0)) throw std::invalid_argument("finite differences need a strictly increasing grid");
        const int s = window_start(j, 5, n);
        const auto w = lagrange_derivative(&idx[static_cast<std::size_t>(s)], 5, j);
        st.start[static_cast<std::size_t>(j)] = s;
        for (int i = 0; i < 5; ++i) st.w[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / drdj;
    }
    return st;
}

std::vector<std::complex<double>> differentiate(const DerivativeStencils& st,
                                                const std::vector<std::complex<double>>& f) {
    std::vector<std::complex<double>> out(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) {
        std::complex<double> acc(0.0);
        const auto s = static_cast<std::size_t>(st.start[j]);
        for (std::size_t i = 0; i < 5; ++i) acc += st.w[j][i] * f[s + i];
        out[j] = acc;
    }
    return out;
}

std::vector<double> interpolatory_weights(const std::vector<double>& x, double a, double b) {
    const int m = static_cast<int>(x.size());
    const double c = 0.5 * (x.front() + x.back());
    double s = 0.5 * (x.back() - x.front());
    if (s <= 0.0) s = 1.0;
    Eigen::MatrixXd V(m, m);
    Eigen::VectorXd mom(m);
    const double ua = (a - c) / s, ub = (b - c) / s;
    for (int k = 0; k < m; ++k) {
        for (int i = 0; i < m; ++i) V(k, i) = std::pow((x[static_cast<std::size_t>(i)] - c) / s, k);
        mom(k) = s * (std::pow(ub, k + 1) - std::pow(ua, k + 1)) / (k + 1);
    }
    Eigen::VectorXd w = V.fullPivLu().solve(mom);
    return {w.data(), w.data() + m};
}

std::vector<double> simpson_weights(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> w(n, 0.0);
    if (n < 2) return w;
    if (n == 2) {
        w[0] = w[1] = 0.5 * (x[1] - x[0]);
        return w;
    }
    const std::size_t intervals = n - 1;
    const std::size_t paired = intervals - (intervals % 2);
    for (std::size_t i = 0; i + 2 <= paired; i += 2) {
        const double h0 = x[i + 1] - x[i], h1 = x[i + 2] - x[i + 1];
        const double f = (h0 + h1) / 6.0;
        w[i] += f * (2.0 - h1 / h0);
        w[i + 1] += f * (h0 + h1) * (h0 + h1) / (h0 * h1);
        w[i + 2] += f * (2.0 - h0 / h1);
    }
    if (paired < intervals) {
        const std::vector<double> nodes{x[n - 3], x[n - 2], x[n - 1]};
        const auto lw = interpolatory_weights(nodes, x[n - 2], x[n - 1]);
        for (std::size_t i = 0; i < 3; ++i) w[n - 3 + i] += lw[i];
    }
    return w;
}

CumulativeRule cumulative_rule(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    CumulativeRule rule;
    if (n < 2) return rule;
    const int width = std::min(6, n);
    std::vector<double> nodes(static_cast<std::size_t>(width));
    rule.start.resize(static_cast<std::size_t>(n - 1));
    rule.w.assign(static_cast<std::size_t>(n - 1), std::array<double, 6>{});
    for (int j = 0; j + 1 < n; ++j) {
        const int s = std::clamp(j - (width / 2 - 1), 0, n - width);
        for (int i = 0; i < width; ++i) nodes[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(s + i)];
        const auto w = interpolatory_weights(nodes, x[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j + 1)]);
        rule.start[static_cast<std::size_t>(j)] = s;
        for (int i = 0; i < width; ++i) rule.w[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)];
    }
    return rule;
}

std::vector<std::complex<double>> cumulative_integral(const CumulativeRule& rule,
                                                      const std::vector<std::complex<double>>& f) {
    const std::size_t n = rule.start.size() + 1;
    if (f.size() != n && !(rule.start.empty() && f.size() <= 1))
        throw std::invalid_argument("cumulative_integral: samples do not match the rule");
    std::vector<std::complex<double>> out(f.size(), std::complex<double>(0.0));
    const std::size_t width = std::min<std::size_t>(6, n);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const auto s = static_cast<std::size_t>(rule.start[j]);
        std::complex<double> piece(0.0);
        for (std::size_t i = 0; i < width; ++i) piece += rule.w[j][i] * f[s + i];
        out[j + 1] = out[j] + piece;
    }
    return out;
}

std::vector<std::complex<double>> cumulative_integral(const std::vector<double>& x,
                                                      const std::vector<std::complex<double>>& f) {
    if (f.size() != x.size()) throw std::invalid_argument("cumulative_integral: samples do not match the grid");
    return cumulative_integral(cumulative_rule(x), f);
}

}  // namespace z2s
