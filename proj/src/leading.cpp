#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "z2s/deformation.hpp"

namespace z2s {

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

DeformationSolution solve_leading_correction(const SymbolPair& sym, const Series& h_plus, const Series& h_minus,
                                             const CokernelComplement& H0, const LeadingCorrectionOptions& opt) {
    if (!(sym.tau > 0.0)) throw std::invalid_argument("solve_leading_correction: tau = 0, the symbol pair degenerates");
    const int M = sym.M();
    const int hb = std::max(h_plus.band(), h_minus.band());
    const int L = opt.band > 0 ? opt.band : std::max(2 * M + 1, hb + 2 * M + 8);
    if (L < 2 * M + 1) throw std::invalid_argument("solve_leading_correction: band must be at least 2M+1");
    if (hb > L) throw std::invalid_argument("solve_leading_correction: band below the band of h");

    DeformationSolution out;
    out.band = L;
    out.scale = h_plus.norm() + h_minus.norm();

    const auto Top = build_T_matrix(sym, L);
    const int tb = Top.target_band;
    const Series rhs = apply_J(sym, h_plus, h_minus).resized(tb);
    const int n_c = static_cast<int>(real_dim(L));
    const int n_h = static_cast<int>(H0.basis.size());
    Eigen::MatrixXd A(static_cast<Eigen::Index>(real_dim(tb)), n_c + n_h);
    A.leftCols(n_c) = Top.matrix;
    for (int j = 0; j < n_h; ++j) {
        if (H0.basis[j].band() > tb) throw std::invalid_argument("solve_leading_correction: H0 basis exceeds the target band");
        const auto g = realify(0.5 * H0.basis[j].resized(tb));
        A.col(n_c + j) = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    }
    const auto b = realify(rhs);
    const Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_c + n_h);
    if (bv.norm() > 0.0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-11);
        x = svd.solve(bv);
    }
    Series c = derealify(x.data(), L);
    if (opt.kernel_offset) {
        const Series off = opt.kernel_offset->resized(std::max(L, opt.kernel_offset->band()));
        for (const auto& kb : kernel_basis(sym, L)) c += (real_inner(off, kb) / real_inner(kb, kb)) * kb;
    }
    Series k_plus(0), k_minus(0);
    for (int j = 0; j < n_h; ++j) {
        out.h0_coefficients.push_back(x(n_c + j));
        k_plus = k_plus + x(n_c + j) * H0.preimages[j].first;
        k_minus = k_minus + x(n_c + j) * H0.preimages[j].second;
    }

    // eta = [conj(d+) X + d- conj(Y)] / (|d+|^2 + |d-|^2), X = k+ - 2h+ - c, Y = k- - 2h- - c^aps.
    const Series X = k_plus - 2.0 * h_plus - c;
    const Series Y = k_minus - 2.0 * h_minus - aps(c);
    const int xb = std::max(X.band(), Y.band());
    const int eb = xb + 2 * M + opt.guard;
    const int n = next_pow2(4 * (eb + M) + 64);
    const auto dp = sym.d_plus.sample(n), dm = sym.d_minus.sample(n);
    const auto Xs = X.sample(n), Ys = Y.sample(n);
    std::vector<cplx> es(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double den = std::norm(dp[j]) + std::norm(dm[j]);
        es[j] = (std::conj(dp[j]) * Xs[j] + dm[j] * std::conj(Ys[j])) / den;
    }
    out.eta = Series::from_samples(es, eb).trimmed(1e-15);
    out.c = c;
    out.k_plus = k_plus;
    out.k_minus = k_minus;
    out.residual_plus = (convolve(sym.d_plus, out.eta) + c + 2.0 * h_plus - k_plus).norm();
    out.residual_minus = (convolve(sym.d_minus, out.eta.conj()) + aps(c) + 2.0 * h_minus - k_minus).norm();
    return out;
}

}  // namespace z2s
