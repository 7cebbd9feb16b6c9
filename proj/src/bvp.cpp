#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "z2s/deformation.hpp"
#include "z2s/radial.hpp"

namespace z2s {

double axis_leading_factor(double l) { return l == 0.0 ? 1.0 : std::sqrt(2.0 / std::numbers::pi); }

RadialSolver::RadialSolver(CylinderGeometry geom)
    : geom_(std::move(geom)),
      stencils_(derivative_stencils(geom_.radial_grid)),
      cumulative_(cumulative_rule(geom_.radial_grid)),
      simpson_(simpson_weights(geom_.radial_grid)) {
    if (geom_.radial_grid.size() < 8) throw std::invalid_argument("radial_bvp_solve: grid too small");
}

const RadialSolver::Families& RadialSolver::families(int k, double l) {
    const auto key = std::make_pair(k, l);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto& r = geom_.radial_grid;
    Families f;
    f.plus.resize(r.size());
    f.minus.resize(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
        f.plus[j] = family_value(Family::Plus, k, l, r[j]);
        f.minus[j] = family_value(Family::Minus, k, l, r[j]);
    }
    return cache_.emplace(key, std::move(f)).first->second;
}

BvpSolution radial_bvp_solve(const CylinderGeometry& geom, int k, double l, const RadialSamples& source, bool kr_flag) {
    RadialSolver solver(geom);
    return solver.solve(k, l, source, kr_flag);
}

BvpSolution RadialSolver::solve(int k, double l, const RadialSamples& source, bool kr_flag, double kr_radius) {
    const auto& r = geom_.radial_grid;
    const std::size_t n = r.size();
    if (source.plus.size() != n || source.minus.size() != n)
        throw std::invalid_argument("radial_bvp_solve: source does not match the grid");

    BvpSolution out;
    out.u.plus.assign(n, cplx(0.0));
    out.u.minus.assign(n, cplx(0.0));
    std::size_t j0 = n;
    for (std::size_t j = 0; j < n; ++j)
        if (source.plus[j] != cplx(0.0) || source.minus[j] != cplx(0.0)) {
            j0 = j;
            break;
        }
    if (j0 == n) return out;
    out.r_support = r[j0 == 0 ? 0 : j0 - 1];

    const auto& fam = families(k, l);
    const auto& P = fam.plus;
    const auto& Mv = fam.minus;
    std::vector<cplx> g0(n), g1(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double W = P[j][0] * Mv[j][1] - Mv[j][0] * P[j][1];
        const cplx b0 = -source.minus[j], b1 = source.plus[j];
        g0[j] = (Mv[j][1] * b0 - Mv[j][0] * b1) / W;
        g1[j] = (-P[j][1] * b0 + P[j][0] * b1) / W;
    }
    auto I0 = cumulative_integral(cumulative_, g0);
    auto I1 = cumulative_integral(cumulative_, g1);
    // The coefficient of the family that is singular at the axis is integrated inward from R.
    // Integrated outward it is dominated by the innermost nodes (weight r^{-|k|-1/2}) and the
    // admissible homogeneous term would have to cancel it. The shift is itself admissible.
    auto from_outside = [](std::vector<cplx>& I) {
        const cplx total = I.back();
        for (auto& x : I) x -= total;
    };
    if (k >= 1) from_outside(I0);
    if (k <= -1) from_outside(I1);

    // Admissible homogeneous directions in (plus, minus) coefficient space.
    std::vector<std::array<cplx, 2>> dirs;
    if (k >= 1) {
        dirs.push_back({1.0, 0.0});
    } else if (k <= -1) {
        dirs.push_back({0.0, 1.0});
    } else if (kr_flag && std::abs(l) > 1.0 / (2.0 * (kr_radius > 0.0 ? kr_radius : out.r_support))) {
        const double sg = l > 0 ? 1.0 : -1.0;
        dirs.push_back({1.0, -sg});
        out.kr_constrained = true;
    } else if (l != 0.0) {
        // Same span as plus and minus, but split into the decaying and growing branches: in the
        // plus/minus basis both grow like e^{|l| r} and the Gram matrix is nearly singular.
        const double sg = l > 0 ? 1.0 : -1.0;
        dirs.push_back({1.0, sg});
        dirs.push_back({1.0, -sg});
    } else {
        dirs.push_back({1.0, 0.0});
        dirs.push_back({0.0, 1.0});
    }

    const int nd = static_cast<int>(dirs.size());
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(nd, nd);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nd);
    std::vector<std::array<cplx, 2>> up(n);
    std::vector<std::array<cplx, 2>> ga(static_cast<std::size_t>(nd));
    for (std::size_t j = 0; j < n; ++j) {
        up[j] = {P[j][0] * I0[j] + Mv[j][0] * I1[j], P[j][1] * I0[j] + Mv[j][1] * I1[j]};
        for (int a = 0; a < nd; ++a)
            ga[a] = {P[j][0] * dirs[a][0] + Mv[j][0] * dirs[a][1], P[j][1] * dirs[a][0] + Mv[j][1] * dirs[a][1]};
        const double wr = simpson_[j] * r[j];
        for (int a = 0; a < nd; ++a) {
            for (int b = 0; b < nd; ++b)
                G(a, b) += wr * (std::conj(ga[a][0]) * ga[b][0] + std::conj(ga[a][1]) * ga[b][1]);
            rhs(a) -= wr * (std::conj(ga[a][0]) * up[j][0] + std::conj(ga[a][1]) * up[j][1]);
        }
    }
    Eigen::VectorXd d(nd);
    for (int a = 0; a < nd; ++a) d(a) = G(a, a).real() > 0.0 ? 1.0 / std::sqrt(G(a, a).real()) : 1.0;
    const Eigen::MatrixXcd Gs = d.asDiagonal() * G * d.asDiagonal();
    const Eigen::VectorXcd t = d.asDiagonal() * Gs.ldlt().solve(d.asDiagonal() * rhs).eval();
    cplx ca = 0.0, cb = 0.0;
    for (int a = 0; a < nd; ++a) {
        ca += t(a) * dirs[a][0];
        cb += t(a) * dirs[a][1];
    }
    out.alpha = ca;
    out.beta = cb;
    for (std::size_t j = 0; j < n; ++j) {
        out.u.plus[j] = up[j][0] + P[j][0] * ca + Mv[j][0] * cb;
        out.u.minus[j] = up[j][1] + P[j][1] * ca + Mv[j][1] * cb;
    }

    const auto Du = dirac_apply_mode(k, l, out.u, r, stencils_);
    double res = 0.0, fmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        res = std::max({res, std::abs(Du.plus[j] - source.plus[j]), std::abs(Du.minus[j] - source.minus[j])});
        fmax = std::max({fmax, std::abs(source.plus[j]), std::abs(source.minus[j])});
    }
    out.residual = res / std::max({dirac_term_scale(k, l, out.u, r, stencils_), fmax, 1e-300});
    return out;
}

}  // namespace z2s
