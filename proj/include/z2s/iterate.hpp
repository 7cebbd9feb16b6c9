#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "z2s/deformation.hpp"
#include "z2s/fredholm.hpp"
#include "z2s/polar.hpp"

namespace z2s {

// (k, l) mode with constant amplitudes times a radial bump: the outer shell [R/2, R] for class A,
// the first annulus [frak_r/T, frak_r] for class B.
struct ShellMode {
    int k = 0;
    int l = 0;
    cplx amp_plus{0.0};
    cplx amp_minus{0.0};
};

struct InitialDefect {
    std::vector<ShellMode> class_A;
    std::vector<ShellMode> class_B;
    // Typed terms cut off by the level-0 cutoff, so supported in N_{frak_r}.
    std::vector<TypedLeadingTerm> class_C;
    bool is_zero() const;
};

struct IterationConfig {
    double R = 1.0;
    double frak_r = 0.25;
    double T = 16.0;
    double P = 2.0;
    double s = 1e-3;
    std::optional<double> kappa0;  // calibrated from records 0 and 1 when absent
    std::optional<double> kappa1;
    int steps = 8;
    int k_cap = 4;
    int l_cap = 16;
    double dx = 0.025;  // spacing of the radial map coordinate
    int theta_samples = 16;
    int t_samples = 64;
    int eprime_terms = 12;
    int neumann_max = 20;
    double neumann_tol = 1e-12;
    bool strict = false;  // T > 512 and P in (T^{1/8} + 1, T^{1/5}) instead of T >= 8, 1 < P < T
};

// Strict: T > 512 and P in (T^{1/8} + 1, T^{1/5}). Relaxed desk-scale regime: T >= 8 and 1 < P < T.
void validate_regime(double T, double P, bool strict);

// Throws std::invalid_argument naming the violated constraint.
void validate_iteration(const IterationConfig& cfg, const SymbolPair& sym);

struct LedgerRecord {
    int i = 0;
    double norm_A = 0.0, bound_A = 0.0;
    double norm_B = 0.0, bound_B = 0.0;
    double norm_C = 0.0, bound_C = 0.0;
    double eta_c1_proxy = 0.0;  // sum (1+|l|)|eta_l| of the eta this defect produced, 0 for record 0
    double ratio_fit = 0.0;     // NaN until three eta values exist
    // Diagnostics of the step that produced this record.
    int neumann_iterations = 0;
    double contraction = 0.0;
    double neumann_gap = 0.0;  // relative size of the last accepted Neumann update
    double bvp_residual = 0.0;
    double leading_residual = 0.0;
    double dropped = 0.0;
    double eprime_max_ratio = 0.0;
};

struct DefectLedger {
    std::vector<LedgerRecord> records;
    double kappa0 = 0.0;
    double kappa1 = 0.0;
    bool kappa_calibrated = false;
    int failure_index = -1;  // first record over one of its budgets
    double ratio_fit = 0.0;
    bool decay_ok = false;   // ratio_fit <= P/T
    std::string regime;      // "strict" or "relaxed"
    std::vector<Series> etas;  // eta_1 .. eta_n
    bool all_within_budget() const { return failure_index < 0; }
    nlohmann::json to_json() const;
};

// Columns i, norm_A, bound_A, norm_B, bound_B, norm_C, bound_C, eta_c1_proxy, ratio_fit.
std::string ledger_csv(const DefectLedger& ledger);

// Leading-term iteration. Step i uses the cutoff with transition [frak_r/T^{i+2}, frak_r/T^{i+1}]:
// solve D h = s f_A + s f_B + (1 - chi) f_C by per-mode radial solves, with the first-order
// operators of the earlier levels folded in by a Neumann loop; read off h+- at the axis and solve
// for (eta, c, k); then assemble the next defect from the outer-shell action on h + c (class A),
// the cutoff commutators and the quadratic remainder on the dominant term (class B) and the
// carried C part with the t-derivative terms of the e-prime series (class C).
DefectLedger iterate(const InitialDefect& defect, const SymbolPair& sym, const IterationConfig& cfg);

// The part of D_{s chi eta} - D that is first order in s, applied to u; output modes with
// |l| > l_cap are skipped when l_cap >= 0.
PolarField first_order_variation(const PolarField& u, const Cutoff& chi, const Series& eta, double s, int l_cap = -1);

// Partial sums of ||eta_i|| and the geometric tail bound next/(1 - q), q the largest later ratio.
struct CauchyTail {
    std::vector<double> partial_sums;
    std::vector<double> tail_actual;
    std::vector<double> tail_bound;
    bool holds = true;
};
CauchyTail cauchy_tail(const DefectLedger& ledger);

nlohmann::json iteration_config_to_json(const IterationConfig& c);
IterationConfig iteration_config_from_json(const nlohmann::json& j);
nlohmann::json initial_defect_to_json(const InitialDefect& d);
InitialDefect initial_defect_from_json(const nlohmann::json& j);

}  // namespace z2s
