#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "z2s/cylinder.hpp"
#include "z2s/fourier.hpp"
#include "z2s/fredholm.hpp"

namespace z2s {

// Wirtinger derivatives are the standard ones, d/dz = (d/dx - i d/dy)/2. In that normalization
// the cylinder Dirac operator of dirac_apply_mode reads D = E1 d/dt + E2 d/dz + E3 d/dzbar with
// the matrices below (twice the unit-normalized Clifford generators e2, e3).
Eigen::Matrix2cd clifford_e1();
Eigen::Matrix2cd clifford_e2();
Eigen::Matrix2cd clifford_e3();
std::array<Eigen::Matrix2cd, 3> dirac_symbols();  // (E1, E2, E3) = (e1, 2 e2, 2 e3)

// chi(r) = 1 - S((r - inner)/(outer - inner)), S the quintic smoothstep 6x^5 - 15x^4 + 10x^3.
// C^2, equal to 1 on [0, inner] and 0 on [outer, oo).
struct Cutoff {
    double inner = 0.0;
    double outer = 1.0;

    double value(double r) const;
    double d1(double r) const;
    double d2(double r) const;
    double width() const { return outer - inner; }
    double max_d1() const { return 15.0 / (8.0 * width()); }
    double max_d2() const;  // 10 / (sqrt(3) width^2)
};

// Radial cutoff of level j: transition on [frak_r / T^{j+1}, frak_r / T^j].
Cutoff level_cutoff(double frak_r, double T, int level);

struct PerturbationFrame {
    double R = 1.0;
    double frak_r = 0.25;
    double T = 16.0;
    double P = 2.0;
    double s = 0.0;
    double kappa0 = 1.0;
    double kappa1 = 1.0;
    Series eta;

    double gamma_T() const { return T / (T - 1.0); }
    Cutoff chi() const { return level_cutoff(frak_r, T, 0); }
    // Largest admissible s: keeps |s (chi_z eta + chi_zbar eta^*)| <= 1/2 under the kappa1 bounds.
    double s_max() const;
};

struct FrameCheck {
    bool ok = true;
    std::vector<std::string> violations;
    double eta_norm = 0.0;
    double eta_t_norm = 0.0;
    double eta_tt_norm = 0.0;
    double kappa1_required = 0.0;
};

FrameCheck check_frame(const PerturbationFrame& f);
// Throws std::invalid_argument naming the first violated constraint.
void validate_frame(const PerturbationFrame& f);

// Smallest kappa1 for which the frame estimates hold for (eta, chi): the pointwise bounds on
// chi_z eta and eta_t against gamma_T frak_r^{1/2}, the L2 bound on chi_z eta_t against gamma_T and
// the L2 bounds on chi_zz eta, chi_zzbar eta against gamma_T^2.
double kappa1_required(const Series& eta, const Cutoff& chi, double frak_r, double T, double R);

nlohmann::json frame_to_json(const PerturbationFrame& f);
PerturbationFrame frame_from_json(const nlohmann::json& j);

// Pointwise geometric data of the perturbation s chi eta at (r, theta, t).
struct FramePoint {
    double chi = 0.0, chi_r = 0.0, chi_rr = 0.0;
    cplx chi_z{0.0}, chi_zbar{0.0};
    cplx eta{0.0}, eta_t{0.0};
    double a = 0.0;  // chi_z eta + chi_zbar conj(eta), real
};
FramePoint frame_point(const Cutoff& chi, const Series& eta, const Series& eta_t, double r, double theta, double t);

// The 3x3 matrix with prefactor 1/(1 + s a), rows and columns ordered (t, z, zbar). It is the
// inverse Jacobian of (z, t) -> (z + s chi eta, t): the pull-back of the new coordinate vector
// field i is sum_j M(j, i) d_j, so columns carry the pulled-back d_tau, d_u, d_ubar.
Eigen::Matrix3cd pullback_matrix_M(const PerturbationFrame& f, double r, double theta, double t);
Eigen::Matrix3cd pullback_matrix_M(const Cutoff& chi, const Series& eta, double s, double R, double r, double theta,
                                   double t);
// rho = 1/(1 + s a) - 1
double varrho(const PerturbationFrame& f, double r, double theta, double t);

// First-order coefficients of the pulled-back operator: C_j = sum_i M(j, i) E_i for j = t, z, zbar.
std::array<Eigen::Matrix2cd, 3> pulled_back_coefficients(const Eigen::Matrix3cd& M);

// Split C_j(s) = (1 + rho) E_j + s a E1 delta_{jt} + Theta_j + R_j with Theta linear in s.
struct CoefficientSplit {
    std::array<Eigen::Matrix2cd, 3> theta;
    std::array<Eigen::Matrix2cd, 3> remainder;
    double rho = 0.0;
};
CoefficientSplit split_coefficients(const Cutoff& chi, const Series& eta, double s, double R, double r, double theta,
                                    double t);

// R_j / s^2 in closed form: with M = N / (1 + s a) and N = I + s N1 + s^2 N2, the remainder is
// R_j = s^2 sum_i (N2 - a N1)(j, i) E_i / (1 + s a). Free of the cancellation in C_j - (linear part),
// so it stays accurate when eta is tiny.
std::array<Eigen::Matrix2cd, 3> remainder_over_s2(const FramePoint& p, double s);

struct DecompositionReport {
    double R_measured = 0.0;
    double R_budget = 0.0;
    std::array<double, 3> slice_radius{};
    std::array<double, 3> A_measured{};
    double A_budget = 0.0;
    double theta_sup = 0.0;
    double F_sup = 0.0;            // s Gamma'(0), the part of the connection term linear in s
    double F_displayed_sup = 0.0;  // D(s a Id) + D([[0, i s chi eta_t], [-i s chi conj eta_t, 0]])
    double F_mismatch_sup = 0.0;
    double rho_sup = 0.0;
    double rho_budget = 0.0;  // 2 gamma_T kappa1 s
    bool all_ok = false;
    nlohmann::json to_json() const;
};

// Samples the transition annulus and the core. Gamma is the connection term
// 1/2 sum_i e_i sum_{k,l} Omega_kl(v_i) e_k e_l with Omega(v) = (d_v M) M^{-1}; A_s = Gamma(s) - s Gamma'(0).
DecompositionReport decomposition_norm_budget(const PerturbationFrame& f);

// (q+ z^a zbar^b, q- z^b zbar^a) times chi^chi_power, with a + b = 1/2.
struct TypedLeadingTerm {
    double a = 0.5;
    double b = 0.0;
    Series coeff_plus;
    Series coeff_minus;
    int chi_power = 1;

    bool is_zero() const { return coeff_plus.is_zero() && coeff_minus.is_zero(); }
};

// J on one typed term: a (b, a) term with (-i eta_t q+, i conj(eta_t) q-) and, scaled by b/(a+1),
// a (b-1, a+1) term with (-i conj(eta_t) q+, i eta_t q-). The chi power is passed through.
std::vector<TypedLeadingTerm> j_map_apply(const TypedLeadingTerm& term, const Series& eta_dot);

// Sums terms of equal (a, b, chi_power).
std::vector<TypedLeadingTerm> merge_by_type(const std::vector<TypedLeadingTerm>& terms);

// L21 norm on N_R of chi^p (q+ z^a zbar^b, q- z^b zbar^a), exact in t and theta, Simpson in r.
double typed_l21_norm(const TypedLeadingTerm& term, const Cutoff& chi, double R);

struct EprimeResult {
    std::vector<std::vector<TypedLeadingTerm>> differences;  // Delta_k, carrying chi^{k+1}
    std::vector<double> difference_norms;
    std::vector<double> ratios;  // ||Delta_k|| / ||Delta_{k-1}||
    double max_ratio = 0.0;
    double norm_12 = 0.0;  // sum of the difference norms, bounds the L21 norm of the sum
    double threshold = 0.0;
    bool converged = false;
    bool forbidden_type = false;  // some intermediate component had a = -1
    std::vector<TypedLeadingTerm> sum() const;
};

// Delta_0 = seed, Delta_k = s J(Delta_{k-1}) with the frame's eta_t, cutoff power k+1.
// Seeds must have type (1/2, 0) or (0, 1/2) and s must lie below 1/(2 gamma_T^2 kappa1 frak_r^{1/2}).
// With strict set a forbidden type or non-convergence throws; otherwise they are only flagged.
EprimeResult eprime_series(const TypedLeadingTerm& seed, const PerturbationFrame& f, int max_terms,
                           bool strict = true);
// Same recursion without the frame preconditions, for a given cutoff and eta_t. It stops early once
// a difference falls below stop_rel times the seed norm; eprime_series always runs max_terms.
EprimeResult eprime_series_raw(const TypedLeadingTerm& seed, const Series& eta_dot, const Cutoff& chi, double s,
                               double R, int max_terms, double stop_rel = 1e-14);

struct DeformationSolution {
    Series eta;
    Series c;
    Series k_plus;
    Series k_minus;
    std::vector<double> h0_coefficients;  // real coordinates of k along the H0 preimages
    double residual_plus = 0.0;
    double residual_minus = 0.0;
    double scale = 0.0;  // |h+| + |h-|
    int band = 0;
};

struct LeadingCorrectionOptions {
    int band = 0;  // 0 picks max(2M+1, band(h) + 2M + 8)
    std::optional<Series> kernel_offset;
    int guard = 16;
};

// Solves d+ eta + c + 2h+ = k+, d- conj(eta) + c^aps + 2h- = k- with (k+, k-) in H0: first
// T(c) + J(k)/2 = J(h) by minimal-norm least squares over (c, H0 coordinates), then eta by
// pointwise division. The kernel part of c is zero unless kernel_offset is given, in which case
// its projection onto the numerical kernel of T is added.
DeformationSolution solve_leading_correction(const SymbolPair& sym, const Series& h_plus, const Series& h_minus,
                                             const CokernelComplement& H0, const LeadingCorrectionOptions& opt = {});

struct BvpSolution {
    RadialSamples u;
    cplx alpha{0.0};  // plus-family coefficient at the axis
    cplx beta{0.0};   // minus-family coefficient at the axis
    double residual = 0.0;  // relative sup norm of dirac_apply_mode(u) - f
    double r_support = 0.0;
    bool kr_constrained = false;
};

// Leading r^{-1/2} coefficient of the k = 0 families: sqrt(2/pi) for l != 0, 1 at l = 0.
double axis_leading_factor(double l);

// Solves dirac_apply_mode(k, l, u) = f by variation of parameters on the two Bessel families.
// The free homogeneous part is restricted to the families that are L2 at the axis (plus for
// k >= 1, minus for k <= -1, both for k = 0); with kr_flag and |l| > 1/(2 r_support) the k = 0
// combination is further restricted to u+ + sign(l) u- = 0. What freedom remains is fixed by the
// minimal L2(r dr) norm, which also settles the resonant k = 0 case.
BvpSolution radial_bvp_solve(const CylinderGeometry& geom, int k, double l, const RadialSamples& source,
                             bool kr_flag);

// radial_bvp_solve on a fixed grid, caching quadrature weights, stencils and the family samples
// of every mode it has seen. Not thread-safe.
class RadialSolver {
public:
    explicit RadialSolver(CylinderGeometry geom);
    const CylinderGeometry& geometry() const { return geom_; }
    const DerivativeStencils& stencils() const { return stencils_; }
    // kr_radius > 0 fixes the radius r of K_r instead of reading it off the support of the source,
    // which keeps the solve linear in the source.
    BvpSolution solve(int k, double l, const RadialSamples& source, bool kr_flag, double kr_radius = 0.0);

    struct Families {
        std::vector<std::array<double, 2>> plus, minus;
    };
    // Plus and minus family samples of mode (k, l) on the grid.
    const Families& families(int k, double l);

private:
    CylinderGeometry geom_;
    DerivativeStencils stencils_;
    CumulativeRule cumulative_;
    std::vector<double> simpson_;
    std::map<std::pair<int, double>, Families> cache_;
};

}  // namespace z2s
