#include "z2s/polar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace z2s {

namespace {

const cplx I(0.0, 1.0);

void axpy(std::vector<cplx>& y, cplx a, const std::vector<cplx>& x) {
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += a * x[j];
}

}  // namespace

int polar_mode_k(const PolarKey& key) { return key.comp == 0 ? (key.twice_nu + 1) / 2 : (key.twice_nu - 1) / 2; }

PolarKey polar_key(int comp, int k, int l) { return {comp, comp == 0 ? 2 * k - 1 : 2 * k + 1, l}; }

std::shared_ptr<const PolarGrid> make_polar_grid(double R, int n, double r_first, double lambda) {
    auto g = std::make_shared<PolarGrid>();
    g->geometry.R = R;
    g->geometry.radial_grid = mapped_radial_grid(R, n, r_first, lambda);
    g->stencils = derivative_stencils(g->geometry.radial_grid);
    return g;
}

std::vector<cplx>& PolarField::at(const PolarKey& key) {
    auto it = data_.find(key);
    if (it == data_.end()) it = data_.emplace(key, std::vector<cplx>(grid_->size(), cplx(0.0))).first;
    return it->second;
}

const std::vector<cplx>* PolarField::find(const PolarKey& key) const {
    auto it = data_.find(key);
    return it == data_.end() ? nullptr : &it->second;
}

PolarField& PolarField::operator+=(const PolarField& o) {
    if (o.grid_ != grid_) throw std::invalid_argument("PolarField: fields live on different grids");
    for (const auto& [k, v] : o.data_) axpy(at(k), 1.0, v);
    return *this;
}

PolarField& PolarField::operator-=(const PolarField& o) {
    if (o.grid_ != grid_) throw std::invalid_argument("PolarField: fields live on different grids");
    for (const auto& [k, v] : o.data_) axpy(at(k), -1.0, v);
    return *this;
}

PolarField& PolarField::operator*=(cplx a) {
    for (auto& [k, v] : data_)
        for (auto& x : v) x *= a;
    return *this;
}

PolarField operator+(PolarField a, const PolarField& b) { return a += b; }
PolarField operator-(PolarField a, const PolarField& b) { return a -= b; }
PolarField operator*(cplx a, PolarField f) { return f *= a; }

void PolarField::prune() {
    std::erase_if(data_, [](const auto& kv) {
        return std::all_of(kv.second.begin(), kv.second.end(), [](cplx x) { return x == cplx(0.0); });
    });
}

double PolarField::truncate(int k_cap, int l_cap) {
    PolarField dropped(grid_);
    for (auto it = data_.begin(); it != data_.end();) {
        if (std::abs(polar_mode_k(it->first)) > k_cap || std::abs(it->first.l) > l_cap) {
            dropped.data_.insert(*it);
            it = data_.erase(it);
        } else {
            ++it;
        }
    }
    return std::sqrt(dropped.norm2());
}

double PolarField::norm2(double r_lo, double r_hi) const {
    if (data_.empty() || !(r_hi > r_lo)) return 0.0;
    const auto& r = grid_->r();
    const std::size_t n = r.size();
    r_lo = std::max(r_lo, r.front());
    r_hi = std::min(r_hi, r.back());
    if (!(r_hi > r_lo)) return 0.0;
    std::vector<double> dens(n, 0.0);
    for (const auto& [k, v] : data_)
        for (std::size_t j = 0; j < n; ++j) dens[j] += std::norm(v[j]);
    // Nodes strictly inside, plus the density interpolated linearly at the two ends.
    std::vector<double> x, y;
    auto interp = [&](double q) {
        const auto it = std::upper_bound(r.begin(), r.end(), q);
        std::size_t j = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - r.begin(), 1, static_cast<std::ptrdiff_t>(n - 1)));
        const double t = (q - r[j - 1]) / (r[j] - r[j - 1]);
        return (1.0 - t) * dens[j - 1] + t * dens[j];
    };
    x.push_back(r_lo);
    y.push_back(interp(r_lo) * r_lo);
    for (std::size_t j = 0; j < n; ++j)
        if (r[j] > r_lo && r[j] < r_hi) {
            x.push_back(r[j]);
            y.push_back(dens[j] * r[j]);
        }
    x.push_back(r_hi);
    y.push_back(interp(r_hi) * r_hi);
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) acc += 0.5 * (x[j + 1] - x[j]) * (y[j] + y[j + 1]);
    return 4.0 * std::numbers::pi * std::numbers::pi * acc;
}

double PolarField::norm2() const {
    if (data_.empty()) return 0.0;
    const auto& r = grid_->r();
    const auto w = simpson_weights(r);
    double acc = 0.0;
    for (const auto& [k, v] : data_)
        for (std::size_t j = 0; j < r.size(); ++j) acc += w[j] * r[j] * std::norm(v[j]);
    return 4.0 * std::numbers::pi * std::numbers::pi * acc;
}

double PolarField::support_outer() const {
    const auto& r = grid_->r();
    double out = 0.0;
    for (const auto& [k, v] : data_)
        for (std::size_t j = v.size(); j-- > 0;)
            if (v[j] != cplx(0.0)) {
                out = std::max(out, r[j]);
                break;
            }
    return out;
}

PolarField multiply(const PolarField& f, const std::vector<double>& g, int m, const Series& sigma, int l_cap) {
    PolarField out(f.grid_ptr());
    // Work only on the nodes where g is nonzero; cutoff profiles vanish on most of the grid.
    std::size_t lo = 0, hi = g.size();
    while (lo < hi && g[lo] == 0.0) ++lo;
    while (hi > lo && g[hi - 1] == 0.0) --hi;
    if (lo == hi) return out;
    const int sb = sigma.band();
    std::vector<cplx> gv(g.size());
    for (const auto& [key, v] : f.components()) {
        for (std::size_t j = lo; j < hi; ++j) gv[j] = g[j] * v[j];
        for (int q = -sb; q <= sb; ++q) {
            const cplx c = sigma[q];
            if (c == cplx(0.0) || (l_cap >= 0 && std::abs(key.l + q) > l_cap)) continue;
            auto& o = out.at({key.comp, key.twice_nu + 2 * m, key.l + q});
            for (std::size_t j = lo; j < hi; ++j) o[j] += c * gv[j];
        }
    }
    return out;
}

PolarField multiply(const PolarField& f, const std::vector<double>& g) {
    return multiply(f, g, 0, Series::constant(1.0));
}

PolarField clifford(const Eigen::Matrix2cd& E, const PolarField& f) {
    PolarField out(f.grid_ptr());
    for (const auto& [key, v] : f.components())
        for (int a = 0; a < 2; ++a) {
            const cplx e = E(a, key.comp);
            if (e == cplx(0.0)) continue;
            axpy(out.at({a, key.twice_nu, key.l}), e, v);
        }
    return out;
}

PolarField d_t(const PolarField& f) {
    PolarField out(f.grid_ptr());
    for (const auto& [key, v] : f.components()) {
        if (key.l == 0) continue;
        axpy(out.at(key), I * static_cast<double>(key.l), v);
    }
    return out;
}

namespace {

PolarField planar_derivative(const PolarField& f, int direction) {
    PolarField out(f.grid_ptr());
    const auto& r = f.grid().r();
    const auto& st = f.grid().stencils;
    for (const auto& [key, v] : f.components()) {
        const double nu = 0.5 * key.twice_nu;
        const auto dv = differentiate(st, v);
        auto& o = out.at({key.comp, key.twice_nu + 2 * direction, key.l});
        // d/dz: (f' + nu f / r)/2 at nu - 1; d/dzbar: (f' - nu f / r)/2 at nu + 1.
        const double sg = direction < 0 ? 1.0 : -1.0;
        for (std::size_t j = 0; j < v.size(); ++j) o[j] += 0.5 * (dv[j] + sg * nu * v[j] / r[j]);
    }
    return out;
}

}  // namespace

PolarField d_z(const PolarField& f) { return planar_derivative(f, -1); }
PolarField d_zbar(const PolarField& f) { return planar_derivative(f, +1); }

PolarField dirac(const PolarField& f) {
    const auto E = dirac_symbols();
    PolarField out = clifford(E[0], d_t(f));
    out += clifford(E[1], d_z(f));
    out += clifford(E[2], d_zbar(f));
    return out;
}

PolarField sigma_grad(const std::vector<double>& g_prime, const PolarField& f) {
    const auto E = dirac_symbols();
    std::vector<double> half(g_prime.size());
    for (std::size_t j = 0; j < half.size(); ++j) half[j] = 0.5 * g_prime[j];
    const Series one = Series::constant(1.0);
    PolarField out = clifford(E[1], multiply(f, half, -1, one));
    out += clifford(E[2], multiply(f, half, +1, one));
    return out;
}

std::array<cplx, 2> evaluate(const PolarField& f, std::size_t node, double theta, double t) {
    std::array<cplx, 2> out{cplx(0.0), cplx(0.0)};
    for (const auto& [key, v] : f.components())
        out[static_cast<std::size_t>(key.comp)] += v[node] * std::polar(1.0, 0.5 * key.twice_nu * theta + key.l * t);
    return out;
}

RadialSamples mode_of(const PolarField& f, int k, int l) {
    RadialSamples u;
    const std::size_t n = f.grid().size();
    const auto* p = f.find(polar_key(0, k, l));
    const auto* m = f.find(polar_key(1, k, l));
    u.plus = p ? *p : std::vector<cplx>(n, cplx(0.0));
    u.minus = m ? *m : std::vector<cplx>(n, cplx(0.0));
    return u;
}

void set_mode(PolarField& f, int k, int l, const RadialSamples& u) {
    f.at(polar_key(0, k, l)) = u.plus;
    f.at(polar_key(1, k, l)) = u.minus;
}

std::vector<std::pair<int, int>> field_modes(const PolarField& f) {
    std::vector<std::pair<int, int>> out;
    for (const auto& [key, v] : f.components()) out.emplace_back(polar_mode_k(key), key.l);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

PolarField typed_field(std::shared_ptr<const PolarGrid> grid, double a, double b, const Series& q_plus,
                       const Series& q_minus, const Cutoff& chi, int chi_power) {
    PolarField out(grid);
    const auto& r = grid->r();
    std::vector<double> prof(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) prof[j] = std::pow(chi.value(r[j]), chi_power) * std::pow(r[j], a + b);
    const int tn = static_cast<int>(std::lround(2.0 * (a - b)));
    for (int comp = 0; comp < 2; ++comp) {
        const Series& q = comp == 0 ? q_plus : q_minus;
        const int nu2 = comp == 0 ? tn : -tn;
        for (int l = -q.band(); l <= q.band(); ++l) {
            if (q[l] == cplx(0.0)) continue;
            auto& v = out.at({comp, nu2, l});
            for (std::size_t j = 0; j < r.size(); ++j) v[j] += q[l] * prof[j];
        }
    }
    return out;
}

}  // namespace z2s
