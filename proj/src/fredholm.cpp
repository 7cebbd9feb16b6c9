#include "z2s/fredholm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "z2s/cylinder.hpp"

namespace z2s {

SymbolPair make_symbol(const Series& d_plus, const Series& d_minus) {
    const int M = std::max(d_plus.band(), d_minus.band());
    SymbolPair s{d_plus.resized(M), d_minus.resized(M), 0.0};
    s.tau = compute_tau(s.d_plus, s.d_minus, 1024);
    if (!(s.tau > 0.0)) throw std::invalid_argument("symbol pair has |d+|^2 + |d-|^2 = 0 somewhere (tau = 0)");
    return s;
}

SymbolPair random_symbol(Stream& rng, int M, double tau_min) {
    if (M < 0) throw std::invalid_argument("random_symbol: negative band");
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Series dp(M), dm(M);
        for (int l = -M; l <= M; ++l) {
            const double w = 1.0 / ((1.0 + std::abs(l)) * (1.0 + std::abs(l)));
            dp.ref(l) = w * cplx(rng.normal(), rng.normal());
            dm.ref(l) = w * cplx(rng.normal(), rng.normal());
        }
        const double tau = compute_tau(dp, dm, 1024);
        if (tau >= tau_min) return SymbolPair{dp, dm, tau};
    }
    throw std::runtime_error("random_symbol: could not reach the requested tau");
}

nlohmann::json symbol_to_json(const SymbolPair& s) {
    return {{"d_plus", series_to_json(s.d_plus)}, {"d_minus", series_to_json(s.d_minus)}};
}

SymbolPair symbol_from_json(const nlohmann::json& j) {
    if (!j.contains("d_plus") || !j.contains("d_minus")) throw std::invalid_argument("symbol needs d_plus and d_minus");
    return make_symbol(series_from_json(j.at("d_plus")), series_from_json(j.at("d_minus")));
}

Series apply_T(const SymbolPair& sym, const Series& c) {
    return convolve(sym.d_minus.conj(), c) - convolve(sym.d_plus, aps(c).conj());
}

Series apply_T_star(const SymbolPair& sym, const Series& k) {
    return convolve(sym.d_minus, k) - aps(convolve(sym.d_plus, k.conj()));
}

Series RealLinearOperator::apply(const Series& c) const {
    const auto x = realify(c.resized(source_band));
    const Eigen::VectorXd y = matrix * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return derealify(y.data(), target_band);
}

namespace {

template <class F>
RealLinearOperator realize(int L, int target, F&& op) {
    RealLinearOperator out;
    out.source_band = L;
    out.target_band = target;
    out.matrix.resize(static_cast<Eigen::Index>(real_dim(target)), static_cast<Eigen::Index>(real_dim(L)));
    Eigen::Index col = 0;
    for (int l = -L; l <= L; ++l)
        for (cplx unit : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
            Series e(L);
            e.ref(l) = unit;
            const auto y = realify(op(e).resized(target));
            for (std::size_t r = 0; r < y.size(); ++r) out.matrix(static_cast<Eigen::Index>(r), col) = y[r];
            ++col;
        }
    return out;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& a) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues();
}

int count_above(const Eigen::VectorXd& s, double rel_tol) {
    if (s.size() == 0) return 0;
    const double cut = rel_tol * s(0);
    int n = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut) ++n;
    return n;
}

// Rows of a realified band-T vector that carry the modes |l| <= L.
Eigen::MatrixXd rows_of_band(const Eigen::MatrixXd& m, int target_band, int L) {
    const Eigen::Index first = 2 * static_cast<Eigen::Index>(target_band - L);
    return m.middleRows(first, static_cast<Eigen::Index>(real_dim(L)));
}

}  // namespace

RealLinearOperator build_T_matrix(const SymbolPair& sym, int L) {
    if (L < 2 * sym.M() + 1) throw std::invalid_argument("build_T_matrix: band L must be at least 2M+1");
    return realize(L, L + sym.M(), [&](const Series& c) { return apply_T(sym, c); });
}

RealLinearOperator build_T_star_matrix(const SymbolPair& sym, int L) {
    if (L < 2 * sym.M() + 1) throw std::invalid_argument("build_T_star_matrix: band L must be at least 2M+1");
    return realize(L, L + sym.M(), [&](const Series& k) { return apply_T_star(sym, k); });
}

SpectralDiagnostics spectral_diagnostics(const RealLinearOperator& op, bool restrict_to_square, double rank_tol) {
    Eigen::MatrixXd a = op.matrix;
    if (restrict_to_square && op.target_band > op.source_band) a = rows_of_band(op.matrix, op.target_band, op.source_band);
    if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("spectral_diagnostics: zero matrix (tau = 0 upstream?)");
    const Eigen::VectorXd s = singular_values(a);
    SpectralDiagnostics d;
    d.singular_values.assign(s.data(), s.data() + s.size());
    d.rank_tol = rank_tol;
    d.rank = count_above(s, rank_tol);
    d.dim_ker = static_cast<int>(a.cols()) - d.rank;
    d.dim_coker = static_cast<int>(a.rows()) - d.rank;
    d.index = d.dim_ker - d.dim_coker;
    d.sigma_min_positive = d.rank > 0 ? s(d.rank - 1) : 0.0;
    return d;
}

IndexDiagnostics index_diagnostics(const SymbolPair& sym, int L) {
    IndexDiagnostics out;
    out.M = sym.M();
    out.L = L;
    out.tau = sym.tau;
    bool cliff_free = true;
    auto nullities = [&](int band, int& ker, int& coker, double* sigma_min) {
        const auto t = build_T_matrix(sym, band);
        const auto ts = build_T_star_matrix(sym, band);
        if (t.matrix.cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("index_diagnostics: zero operator");
        const Eigen::VectorXd st = singular_values(t.matrix);
        const Eigen::VectorXd ss = singular_values(ts.matrix);
        const int cols = static_cast<int>(t.matrix.cols());
        ker = cols - count_above(st, 1e-9);
        coker = cols - count_above(ss, 1e-9);
        if (ker != cols - count_above(st, 1e-7) || coker != cols - count_above(ss, 1e-7)) cliff_free = false;
        if (sigma_min) {
            const int r = count_above(st, 1e-9);
            *sigma_min = r > 0 ? st(r - 1) : 0.0;
        }
    };
    nullities(L, out.dim_ker, out.dim_coker, &out.sigma_min_positive);
    nullities(2 * L, out.dim_ker_2L, out.dim_coker_2L, &out.sigma_min_positive_2L);
    out.index = out.dim_ker - out.dim_coker;
    out.stable = out.dim_ker == out.dim_ker_2L && out.dim_coker == out.dim_coker_2L;
    out.cliff_free = cliff_free;
    return out;
}

namespace {

std::vector<Series> null_vectors(const RealLinearOperator& op, double tol) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(op.matrix, Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::MatrixXd V = svd.matrixV();
    std::vector<Series> out;
    const int rank = count_above(s, tol);
    for (Eigen::Index j = rank; j < V.cols(); ++j) {
        const Eigen::VectorXd v = V.col(j);
        out.push_back(derealify(v.data(), op.source_band));
    }
    return out;
}

}  // namespace

std::vector<Series> kernel_basis(const SymbolPair& sym, int L, double tol) {
    return null_vectors(build_T_matrix(sym, L), tol);
}

OResult apply_O(const SymbolPair& sym, const Series& c, int guard) {
    const int out_band = c.band() + sym.M() + guard;
    int n = 1024;
    while (n < 4 * (out_band + 1)) n *= 2;
    const auto cs = c.sample(n);
    const auto cas = aps(c).sample(n);
    const auto dp = sym.d_plus.sample(n);
    const auto dm = sym.d_minus.sample(n);
    std::vector<cplx> v(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double rho = std::norm(dp[j]) + std::norm(dm[j]);
        if (!(rho > 0.0)) throw std::invalid_argument("apply_O: tau = 0");
        v[j] = -(std::conj(dp[j]) * cs[j] + dm[j] * std::conj(cas[j])) / rho;
    }
    OResult out;
    const Series full = Series::from_samples(v, n / 2 - 1);
    out.value = project_band(full, out_band).resized(out_band);
    const double total = full.coeff_norm();
    out.projection_defect = total > 0.0 ? (full - project_band(full, out_band)).coeff_norm() / total : 0.0;
    return out;
}

Series apply_J(const SymbolPair& sym, const Series& h_plus, const Series& h_minus) {
    return cplx(-2.0) * (convolve(sym.d_minus.conj(), h_plus) - convolve(sym.d_plus, h_minus.conj()));
}

std::pair<Series, Series> j_preimage(const SymbolPair& sym, const Series& g, int guard) {
    const int out_band = g.band() + sym.M() + guard;
    int n = 1024;
    while (n < 4 * (out_band + 1)) n *= 2;
    const auto gs = g.sample(n);
    const auto dp = sym.d_plus.sample(n);
    const auto dm = sym.d_minus.sample(n);
    std::vector<cplx> hp(gs.size()), hm(gs.size());
    for (std::size_t j = 0; j < gs.size(); ++j) {
        const double rho = std::norm(dp[j]) + std::norm(dm[j]);
        hp[j] = -gs[j] * dm[j] / (2.0 * rho);
        hm[j] = std::conj(gs[j]) * dp[j] / (2.0 * rho);
    }
    return {Series::from_samples(hp, out_band), Series::from_samples(hm, out_band)};
}

CokernelComplement cokernel_complement(const SymbolPair& sym, int L) {
    const auto diag = index_diagnostics(sym, L);
    if (!diag.stable) throw std::runtime_error("cokernel_complement: diagnostics unstable across truncations, increase band");
    CokernelComplement out;
    out.basis = null_vectors(build_T_star_matrix(sym, L), 1e-9);
    for (const auto& g : out.basis) out.preimages.push_back(j_preimage(sym, g));

    // P_L T on a wider input band, augmented with the basis, must span band L.
    const auto wide = build_T_matrix(sym, L + 2 * sym.M());
    const Eigen::MatrixXd rows = rows_of_band(wide.matrix, wide.target_band, L);
    Eigen::MatrixXd aug(rows.rows(), rows.cols() + static_cast<Eigen::Index>(out.basis.size()));
    aug.leftCols(rows.cols()) = rows;
    for (std::size_t b = 0; b < out.basis.size(); ++b) {
        const auto v = realify(out.basis[b].resized(L));
        for (std::size_t r = 0; r < v.size(); ++r) aug(static_cast<Eigen::Index>(r), rows.cols() + static_cast<Eigen::Index>(b)) = v[r];
    }
    out.augmented_rank = count_above(singular_values(aug), 1e-9);
    out.full_dim = static_cast<int>(real_dim(L));
    return out;
}

OInjectivity o_injectivity(const SymbolPair& sym, int L) {
    OInjectivity out;
    const auto ker = kernel_basis(sym, L);
    out.dim_ker = static_cast<int>(ker.size());
    if (ker.empty()) return out;
    std::vector<std::vector<double>> cols;
    int band = 0;
    std::vector<Series> images;
    for (const auto& k : ker) {
        images.push_back(apply_O(sym, k).value);
        band = std::max(band, images.back().band());
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(real_dim(band)), static_cast<Eigen::Index>(images.size()));
    for (std::size_t j = 0; j < images.size(); ++j) {
        const auto v = realify(images[j].resized(band));
        for (std::size_t r = 0; r < v.size(); ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v[r];
    }
    const Eigen::VectorXd s = singular_values(m);
    out.rank_O = count_above(s, 1e-9);
    out.sigma_min = s(s.size() - 1);
    return out;
}

HomotopyScan homotopy_scan(const SymbolPair& a, const SymbolPair& b, int L, int samples) {
    if (samples < 2) throw std::invalid_argument("homotopy_scan: need at least two samples");
    HomotopyScan out;
    out.tau_min = std::numeric_limits<double>::infinity();
    const int M = std::max(a.M(), b.M());
    for (int i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / (samples - 1);
        const Series dp = cplx(1.0 - t) * a.d_plus.resized(M) + cplx(t) * b.d_plus.resized(M);
        const Series dm = cplx(1.0 - t) * a.d_minus.resized(M) + cplx(t) * b.d_minus.resized(M);
        const auto s = make_symbol(dp, dm);
        out.tau_min = std::min(out.tau_min, s.tau);
        out.points.push_back(index_diagnostics(s, L));
    }
    return out;
}

}  // namespace z2s
