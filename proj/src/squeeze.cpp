#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "z2s/cylinder.hpp"
#include "z2s/fredholm.hpp"

namespace z2s {

namespace {

// Right-hand side of a derived relation as shift -> (coefficient of <<A,V>>, coefficient of <<A^,V>>).
using Combo = std::map<int, std::array<cplx, 2>>;

Combo shifted(const Combo& c, int by) {
    Combo out;
    for (const auto& [s, v] : c) out[s + by] = v;
    return out;
}

Combo combine(cplx a, const Combo& x, cplx b, const Combo& y) {
    Combo out;
    for (const auto& [s, v] : x) {
        out[s][0] += a * v[0];
        out[s][1] += a * v[1];
    }
    for (const auto& [s, v] : y) {
        out[s][0] += b * v[0];
        out[s][1] += b * v[1];
    }
    return out;
}

std::vector<std::array<cplx, 2>> dense(const Combo& c) {
    int top = 0;
    for (const auto& [s, v] : c) top = std::max(top, s);
    std::vector<std::array<cplx, 2>> out(static_cast<std::size_t>(top + 1), {cplx(0.0), cplx(0.0)});
    for (const auto& [s, v] : c) out[static_cast<std::size_t>(s)] = v;
    return out;
}

cplx det_rows(const ComplexPair& a, const ComplexPair& b) { return a.first * b.second - a.second * b.first; }

cplx pair_dot(const ComplexPair& x, const ComplexPair& v) { return x.first * v.first + x.second * v.second; }

}  // namespace

cplx tuple_pairing(const PairTuple& X, const PairSequence& V, int m) {
    cplx acc(0.0);
    for (std::size_t i = 0; i < X.size(); ++i) acc += pair_dot(X[i], V.at(m + static_cast<int>(i) + 1));
    return acc;
}

SqueezeResult squeeze(const PairTuple& A, double parallel_tol) {
    if (A.empty()) throw std::invalid_argument("squeeze: empty tuple");
    const double norm = tuple_norm(A);
    if (!(norm > 0.0)) throw std::invalid_argument("squeeze: zero tuple");
    const double zero_tol = 1e-14 * norm;
    const int p = static_cast<int>(A.size());

    int z = 0;
    while (pair_norm(A[static_cast<std::size_t>(z)]) <= zero_tol) ++z;
    PairTuple block(A.begin() + z, A.end());
    Combo rhs_b{{0, {cplx(1.0), cplx(0.0)}}};
    // A^ carries the spouse block first and the z zeros last; B* puts the zeros first.
    Combo rhs_bs{{z, {cplx(0.0), cplx(1.0)}}};
    int steps = 0;

    while (true) {
        if (block.empty()) throw std::runtime_error("squeeze: elimination exhausted the tuple");
        const ComplexPair last = block.back();
        const ComplexPair first_hat = spouse(block.front());
        if (pair_norm(last) <= zero_tol) {
            // Trailing zero: B moves one slot right, B* is unchanged.
            block.pop_back();
            ++z;
            rhs_b = shifted(rhs_b, 1);
            ++steps;
            continue;
        }
        const double nl = std::norm(last.first) + std::norm(last.second);
        const cplx alpha = (first_hat.first * std::conj(last.first) + first_hat.second * std::conj(last.second)) / nl;
        const double resid = pair_norm(first_hat - alpha * last);
        if (resid > parallel_tol * pair_norm(first_hat)) break;

        // B' = B* - alpha B has a zero last slot; drop it and shift right.
        const std::size_t q = block.size();
        PairTuple next(q - 1);
        for (std::size_t i = 0; i + 1 < q; ++i) next[i] = spouse(block[q - 1 - i]) - alpha * block[i];
        if (next.empty() || pair_norm(next.front()) <= zero_tol)
            throw std::runtime_error("squeeze: elimination exhausted the tuple");
        const Combo new_b = shifted(combine(cplx(1.0), rhs_bs, -alpha, rhs_b), 1);
        const Combo new_bs = combine(cplx(-1.0), rhs_b, -std::conj(alpha), rhs_bs);
        rhs_b = new_b;
        rhs_bs = new_bs;
        block = std::move(next);
        ++z;
        ++steps;
    }

    SqueezeResult out;
    out.q = static_cast<int>(block.size());
    out.steps = steps;
    out.B.assign(static_cast<std::size_t>(p), ComplexPair{});
    out.B_star.assign(static_cast<std::size_t>(p), ComplexPair{});
    const std::size_t q = block.size();
    for (std::size_t i = 0; i < q; ++i) {
        out.B[static_cast<std::size_t>(p) - q + i] = block[i];
        out.B_star[static_cast<std::size_t>(p) - q + i] = spouse(block[q - 1 - i]);
    }
    out.det = det_rows(block.back(), spouse(block.front()));
    out.scale = pair_norm(block.back()) * pair_norm(block.front());
    out.rhs_B = dense(rhs_b);
    out.rhs_B_star = dense(rhs_bs);
    return out;
}

PairTuple symbol_tuple(const SymbolPair& sym) {
    const int M = sym.M();
    PairTuple A;
    for (int l = M; l >= -M; --l) A.push_back({std::conj(sym.d_minus[-l]), sym.d_plus[l]});
    return A;
}

FrontierSolution high_mode_injectivity(const SymbolPair& sym, int L, const Series& f) {
    const int M = sym.M();
    for (int l = -M; l <= M; ++l)
        if (f[l] != cplx(0.0)) throw std::invalid_argument("high_mode_injectivity: data must vanish on [-M, M]");
    if (L < 2 * M + 1) throw std::invalid_argument("high_mode_injectivity: band too small");

    FrontierSolution out;
    out.squeezed = squeeze(symbol_tuple(sym));
    const auto& sq = out.squeezed;
    if (std::abs(sq.det) < 1e-12 * sq.scale) throw std::runtime_error("high_mode_injectivity: degenerate symbol");

    const int p = 2 * M + 1;
    auto F1 = [&](int m) { return f[m + M + 1]; };
    auto F2 = [&](int m) { return -std::conj(f[-(m + M + 1)]); };
    auto rhs = [&](const std::vector<std::array<cplx, 2>>& combo, int m) {
        cplx acc(0.0);
        for (std::size_t s = 0; s < combo.size(); ++s) {
            const int ms = m + static_cast<int>(s);
            acc += combo[s][0] * F1(ms) + combo[s][1] * F2(ms);
        }
        return acc;
    };

    PairSequence V{1, std::vector<ComplexPair>(static_cast<std::size_t>(L))};
    const ComplexPair r1 = sq.B.back(), r2 = sq.B_star.back();
    const cplx det = det_rows(r1, r2);
    for (int j = p; j <= L; ++j) {
        const int m = j - p;
        // Known part: every slot but the last pairs with indices below j.
        cplx k1 = rhs(sq.rhs_B, m), k2 = rhs(sq.rhs_B_star, m);
        for (int i = 1; i < p; ++i) {
            const ComplexPair v = V.at(m + i);
            k1 -= pair_dot(sq.B[static_cast<std::size_t>(i - 1)], v);
            k2 -= pair_dot(sq.B_star[static_cast<std::size_t>(i - 1)], v);
        }
        const cplx x = (k1 * r2.second - r1.second * k2) / det;
        const cplx y = (r1.first * k2 - k1 * r2.first) / det;
        V.entries[static_cast<std::size_t>(j - 1)] = {x, y};
    }

    Series c(L);
    for (int j = p; j <= L; ++j) {
        const ComplexPair v = V.at(j);
        c.ref(j) = v.first;
        c.ref(-j) = std::conj(v.second);
    }
    const double fn = f.coeff_norm();
    auto rel_residual = [&](const Series& x) {
        const double rn = (apply_T(sym, x) - f).coeff_norm();
        return fn > 0.0 ? rn / fn : rn;
    };
    out.c = c;
    out.recursion_residual = rel_residual(c);
    out.residual = out.recursion_residual;
    if (out.recursion_residual <= 1e-10) return out;

    // Columns of the modes 2M < |l| <= L against all rows of the band L+M target.
    const auto t = build_T_matrix(sym, L);
    const Eigen::Index w = 2 * static_cast<Eigen::Index>(L - 2 * M);
    Eigen::MatrixXd sub(t.matrix.rows(), 2 * w);
    sub.leftCols(w) = t.matrix.leftCols(w);
    sub.rightCols(w) = t.matrix.rightCols(w);
    const auto rhs_vec = realify(f.resized(L + M));
    const Eigen::VectorXd x = sub.colPivHouseholderQr().solve(Eigen::Map<const Eigen::VectorXd>(rhs_vec.data(), static_cast<Eigen::Index>(rhs_vec.size())));
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(real_dim(L)));
    full.head(w) = x.head(w);
    full.tail(w) = x.tail(w);
    out.c = derealify(full.data(), L);
    out.used_recursion = false;
    out.residual = rel_residual(out.c);
    return out;
}

namespace {

double smoothstep01(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

int tail_band(const std::vector<cplx>& samples) {
    const int n = static_cast<int>(samples.size());
    const Series full = Series::from_samples(samples, n / 2 - 1);
    const double total = full.coeff_norm();
    if (!(total > 0.0)) return 0;
    for (int N = 0; N < n / 2; ++N)
        if ((full - project_band(full, N)).coeff_norm() < total / 8.0) return N;
    return n / 2 - 1;
}

}  // namespace

CutoffBands commutator_threshold(const SymbolPair& sym) {
    const int n = 1024;
    const double eps = 1.0 / 8.0;
    const auto dp = sym.d_plus.sample(n);
    const auto dm = sym.d_minus.sample(n);
    std::vector<cplx> q(static_cast<std::size_t>(n)), chi(static_cast<std::size_t>(n));
    const double floor2 = (eps * sym.tau) * (eps * sym.tau);
    for (std::size_t j = 0; j < q.size(); ++j) {
        q[j] = dp[j] * dm[j] / (std::norm(dm[j]) + floor2);
        const double g = std::abs(std::abs(dp[j]) - std::abs(dm[j])) / (eps * sym.tau);
        chi[j] = smoothstep01(2.0 * (1.0 - g));
    }
    CutoffBands out;
    out.N1 = tail_band(q);
    out.N2 = tail_band(chi);
    out.L_cut = std::max(2 * out.N1 + 2 * out.N2, 2 * sym.M());
    return out;
}

LowerBound high_mode_lower_bound(const SymbolPair& sym, int L_cut, int trials, std::uint64_t seed) {
    if (sym.tau < 1e-6) throw std::invalid_argument("high_mode_lower_bound: tau below 1e-6");
    if (L_cut < 0) throw std::invalid_argument("high_mode_lower_bound: negative cut");
    LowerBound out;
    out.L = std::max(2 * L_cut + 16, 2 * sym.M() + 1);
    auto restricted_min = [&](int L) {
        const auto t = build_T_matrix(sym, L);
        // Columns of modes |l| > L_cut: the first and last 2 (L - L_cut) columns.
        const Eigen::Index w = 2 * static_cast<Eigen::Index>(L - L_cut);
        Eigen::MatrixXd sub(t.matrix.rows(), 2 * w);
        sub.leftCols(w) = t.matrix.leftCols(w);
        sub.rightCols(w) = t.matrix.rightCols(w);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(sub);
        const Eigen::VectorXd s = svd.singularValues();
        return s(s.size() - 1);
    };
    out.sigma_L = restricted_min(out.L);
    out.sigma_2L = restricted_min(2 * out.L);
    out.bound = std::min(out.sigma_L, out.sigma_2L);
    out.stable = out.bound > 0.0 && std::abs(out.sigma_L - out.sigma_2L) <= 0.25 * std::max(out.sigma_L, out.sigma_2L);

    Stream rng(seed, 0);
    out.witness_ratio = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < trials; ++trial) {
        Series c(out.L);
        for (int l = L_cut + 1; l <= out.L; ++l) {
            c.ref(l) = cplx(rng.normal(), rng.normal());
            c.ref(-l) = cplx(rng.normal(), rng.normal());
        }
        const double ratio = apply_T(sym, c).coeff_norm() / c.coeff_norm();
        out.witness_ratio = std::min(out.witness_ratio, ratio / out.bound);
    }
    if (trials <= 0) out.witness_ratio = 0.0;
    return out;
}

std::vector<PairSequence> annihilated_sequences(const PairTuple& A, int N) {
    const int p = static_cast<int>(A.size());
    const PairTuple Ah = spouse(A);
    const int rows = 2 * std::max(0, N - p);
    Eigen::MatrixXcd sys = Eigen::MatrixXcd::Zero(std::max(rows, 1), 2 * N);
    int r = 0;
    for (int m = 1; m + p <= N; ++m) {
        for (int i = 1; i <= p; ++i) {
            const int col = 2 * (m + i - 1);
            sys(r, col) = A[static_cast<std::size_t>(i - 1)].first;
            sys(r, col + 1) = A[static_cast<std::size_t>(i - 1)].second;
            sys(r + 1, col) = Ah[static_cast<std::size_t>(i - 1)].first;
            sys(r + 1, col + 1) = Ah[static_cast<std::size_t>(i - 1)].second;
        }
        r += 2;
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys, Eigen::ComputeFullV);
    const auto s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-12 * s(0)) ++rank;
    std::vector<PairSequence> out;
    for (Eigen::Index j = rank; j < 2 * N; ++j) {
        PairSequence V{1, {}};
        for (int i = 0; i < N; ++i) V.entries.push_back({svd.matrixV()(2 * i, j), svd.matrixV()(2 * i + 1, j)});
        out.push_back(V);
    }
    return out;
}

}  // namespace z2s
