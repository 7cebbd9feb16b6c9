#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "z2s/fourier.hpp"
#include "z2s/rng.hpp"

namespace z2s {

struct SymbolPair {
    Series d_plus;
    Series d_minus;
    double tau = 0.0;

    int M() const { return d_plus.band(); }
};

// Pads both series to a common band and measures tau on 1024 samples; throws if tau = 0.
SymbolPair make_symbol(const Series& d_plus, const Series& d_minus);
// Coefficients N(0, 1)/(1+|l|)^2 on band M, redrawn until tau >= tau_min.
SymbolPair random_symbol(Stream& rng, int M, double tau_min);

nlohmann::json symbol_to_json(const SymbolPair& s);
SymbolPair symbol_from_json(const nlohmann::json& j);

// T(c) = conj(d-) c - d+ conj(aps c)
Series apply_T(const SymbolPair& sym, const Series& c);
// T*(k) = d- k - aps(d+ conj k), the adjoint for real_inner.
Series apply_T_star(const SymbolPair& sym, const Series& k);

// Real matrix of a real-linear map from band source_band to band target_band, acting on
// realified coefficient vectors (l = -L..L, each as (re, im)).
struct RealLinearOperator {
    int source_band = 0;
    int target_band = 0;
    Eigen::MatrixXd matrix;

    Series apply(const Series& c) const;
};

// Requires L >= 2M+1. Target band L+M.
RealLinearOperator build_T_matrix(const SymbolPair& sym, int L);
RealLinearOperator build_T_star_matrix(const SymbolPair& sym, int L);

struct SpectralDiagnostics {
    std::vector<double> singular_values;  // descending
    double rank_tol = 1e-9;
    int rank = 0;
    int dim_ker = 0;
    int dim_coker = 0;
    int index = 0;
    double sigma_min_positive = 0.0;
};

// Rank counts sigma > rank_tol * sigma_max. dim_ker = columns - rank, dim_coker = rows - rank.
// With restrict_to_square the rows are first cut down to the source band.
SpectralDiagnostics spectral_diagnostics(const RealLinearOperator& op, bool restrict_to_square, double rank_tol = 1e-9);

// Index of T at band L: dim_ker is the nullity of T on band L, dim_coker the nullity of T*
// on band L, both at relative tolerance 1e-9. The same counts are redone at 1e-7 (cliff check)
// and at band 2L (stability check).
struct IndexDiagnostics {
    int M = 0;
    int L = 0;
    double tau = 0.0;
    int dim_ker = 0;
    int dim_coker = 0;
    int index = 0;
    double sigma_min_positive = 0.0;
    int dim_ker_2L = 0;
    int dim_coker_2L = 0;
    double sigma_min_positive_2L = 0.0;
    bool stable = false;
    bool cliff_free = false;
};

IndexDiagnostics index_diagnostics(const SymbolPair& sym, int L);

// Right singular vectors of T at band L whose singular values are below tol * sigma_max.
std::vector<Series> kernel_basis(const SymbolPair& sym, int L, double tol = 1e-9);

struct SqueezeResult {
    PairTuple B;       // (0, ..., 0, b_1, ..., b_q)
    PairTuple B_star;  // (0, ..., 0, spouse b_q, ..., spouse b_1)
    int q = 0;
    int steps = 0;
    cplx det{0.0};     // det of the rows b_q and spouse(b_1)
    double scale = 0.0;
    // Right-hand sides as combinations of the input relations: for every m,
    // <<B, V>>_m = sum_s rhs_B[s][0] <<A, V>>_{m+s} + rhs_B[s][1] <<A^, V>>_{m+s}, likewise for B*.
    std::vector<std::array<cplx, 2>> rhs_B;
    std::vector<std::array<cplx, 2>> rhs_B_star;
};

// Tuples are ordered so that the last entry meets the highest index of V:
// <<A, V>>_m = sum_i <a_i, conj v_{m+i}>, i = 1..p.
SqueezeResult squeeze(const PairTuple& A, double parallel_tol = 1e-10);

// sum_i <x_i, conj v_{m+i}> = sum_i x_i.first v_{m+i}.first + x_i.second v_{m+i}.second
cplx tuple_pairing(const PairTuple& X, const PairSequence& V, int m);

// (d_M, d_{M-1}, ..., d_{-M}) with d_l = (conj d-_{-l}, d+_l); with v_j = (p_j, conj p_{-j})
// the modes n > M of T(c) read <<A, V>>_{n-M-1} and the modes -n read -conj <<A^, V>>_{n-M-1}.
PairTuple symbol_tuple(const SymbolPair& sym);

// Sequences V on indices 1..N with <<A,V>>_m = <<A^,V>>_m = 0 for every m >= 1 whose window lies
// inside 1..N: a basis of the null space of that finite linear system.
std::vector<PairSequence> annihilated_sequences(const PairTuple& A, int N);

struct FrontierSolution {
    Series c;
    double residual = 0.0;  // |T(c) - f| / |f|
    SqueezeResult squeezed;
    bool used_recursion = true;
    double recursion_residual = 0.0;
};

// Solves T(c) = f for c supported on 2M < |l| <= L by the frontier recursion on the squeezed
// tuple. f must vanish on [-M, M].
//
// The recursion only reads the lowest equations, so rounding errors excite its growing
// homogeneous solutions; for symbols with a small frontier entry the growth per step is large.
// When the recursion residual exceeds 1e-10 the same unknowns are recovered by a least-squares
// solve over every equation, and used_recursion is cleared.
FrontierSolution high_mode_injectivity(const SymbolPair& sym, int L, const Series& f);

struct CutoffBands {
    int N1 = 0;  // band of the regularized quotient d+/conj(d-)
    int N2 = 0;  // band of the cutoff around {|d+| = |d-|}
    int L_cut = 0;
};

// Smallest bands whose tail L2 mass is below 1/8 of the function norm; L_cut = max(2N1+2N2, 2M).
CutoffBands commutator_threshold(const SymbolPair& sym);

struct LowerBound {
    double bound = 0.0;  // min of the two truncations
    double sigma_L = 0.0;
    double sigma_2L = 0.0;
    int L = 0;
    bool stable = false;       // within 25% across doubling
    double witness_ratio = 0.0;  // min |Tc|/|c| over random high-mode trials, divided by bound
};

LowerBound high_mode_lower_bound(const SymbolPair& sym, int L_cut, int trials, std::uint64_t seed = 0);

struct OResult {
    Series value;
    double projection_defect = 0.0;  // L2 mass dropped by the re-projection, relative
};

// O(c) = -(conj(d+) c + d- conj(aps c)) / (|d+|^2 + |d-|^2) by sampling.
OResult apply_O(const SymbolPair& sym, const Series& c, int guard = 16);
// J(h+, h-) = -2 (conj(d-) h+ - d+ conj(h-))
Series apply_J(const SymbolPair& sym, const Series& h_plus, const Series& h_minus);
// Pointwise minimal-norm preimage of g under J, re-projected to band(g) + M + guard.
std::pair<Series, Series> j_preimage(const SymbolPair& sym, const Series& g, int guard = 16);

struct CokernelComplement {
    std::vector<Series> basis;
    std::vector<std::pair<Series, Series>> preimages;
    int augmented_rank = 0;
    int full_dim = 0;
};

// Throws when index_diagnostics at L is unstable.
CokernelComplement cokernel_complement(const SymbolPair& sym, int L);

// Rank of O on the numerical kernel of T equals the kernel dimension.
struct OInjectivity {
    int dim_ker = 0;
    int rank_O = 0;
    double sigma_min = 0.0;
};
OInjectivity o_injectivity(const SymbolPair& sym, int L);

// Index along (1-t) a + t b at `samples` equally spaced t.
struct HomotopyScan {
    std::vector<IndexDiagnostics> points;
    double tau_min = 0.0;
};
HomotopyScan homotopy_scan(const SymbolPair& a, const SymbolPair& b, int L, int samples = 11);

}  // namespace z2s
