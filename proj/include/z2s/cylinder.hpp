#pragma once

#include <array>
#include <complex>
#include <map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "z2s/fourier.hpp"
#include "z2s/radial.hpp"

namespace z2s {

// Modified Bessel function of the first kind by its power series. Rejects x > 700.
double bessel_I(double p, double x);
// |l|^{-p} I_p(|l| r), which behaves like r^p / (2^p Gamma(p+1)) as r -> 0.
double frak_I(double p, double l, double r);

struct CylinderGeometry {
    double R = 1.0;
    int k_max = 0;
    int l_max = 0;
    std::vector<double> radial_grid;

    void validate() const;
};

// Mapped grid with r_1 = R/2048 and lambda = 0.13 R, which balances the axis powers
// against the Bessel growth near r = R for the fourth-order residual.
CylinderGeometry make_geometry(double R, int k_max, int l_max, int n_points);

enum class ProfileClass { L2_KERNEL, L21_KERNEL };
enum class SpinOffset { INTEGER_L, HALF_INTEGER_L };

// The two homogeneous radial solutions of mode (k, l).
//   plus:  (J_{k-1/2}, -l J_{k+1/2}),  or (r^{k-1/2}, 0) at l = 0
//   minus: (-l J_{-k+1/2}, J_{-k-1/2}), or (0, r^{-k-1/2}) at l = 0
// where J_p is frak_I(p, l, .). Both behave like r^{+-k-1/2} at the axis.
enum class Family { Plus, Minus };
std::array<double, 2> family_value(Family f, int k, double l, double r);
// r-derivative from the radial system itself.
std::array<double, 2> family_derivative(Family f, int k, double l, double r);
double family_exponent(Family f, int k);

struct ModeTerm {
    cplx u_plus{0.0};
    cplx u_minus{0.0};
    ProfileClass cls = ProfileClass::L2_KERNEL;
};

struct SpinorModeExpansion {
    CylinderGeometry geometry;
    std::map<std::pair<int, int>, ModeTerm> terms;
    SpinOffset spin_offset = SpinOffset::INTEGER_L;

    // Frequency of stored index l (shifted by 1/2 for HALF_INTEGER_L).
    double l_value(int l) const { return spin_offset == SpinOffset::HALF_INTEGER_L ? l + 0.5 : static_cast<double>(l); }
    bool is_zero() const;
};

struct RadialSamples {
    std::vector<cplx> plus;
    std::vector<cplx> minus;
};

// (l U+ + U-' + (k+1/2) U-/r,  -l U- - U+' + (k-1/2) U+/r)
RadialSamples dirac_apply_mode(int k, double l, const RadialSamples& u, const std::vector<double>& r);
RadialSamples dirac_apply_mode(int k, double l, const RadialSamples& u, const std::vector<double>& r,
                               const DerivativeStencils& st);
// Largest magnitude among the individual terms of the residual; used to make it relative.
double dirac_term_scale(int k, double l, const RadialSamples& u, const std::vector<double>& r);
double dirac_term_scale(int k, double l, const RadialSamples& u, const std::vector<double>& r,
                        const DerivativeStencils& st);

// Installs the harmonic profile of (k, l); throws on sign-constraint violations.
void build_harmonic_mode(SpinorModeExpansion& e, int k, int l, cplx u_plus, cplx u_minus, ProfileClass cls);
void check_term_admissible(int k, const ModeTerm& t, int k_max, int l, int l_max);

RadialSamples mode_samples(const SpinorModeExpansion& e, int k, int l, const std::vector<double>& r);

struct LeadingData {
    Series d_plus;
    Series d_minus;
    double tau = 0.0;
    bool valid() const { return tau > 0.0; }
};

double compute_tau(const Series& d_plus, const Series& d_minus, int samples = 1024);

// L21 class: d+ from (k=1, l, u_plus), d- from (k=-1, l, u_minus).
// L2 class: K_R-leading coefficients (u+_l, u-_l) through the hat basis change.
LeadingData extract_leading(const SpinorModeExpansion& e);

// Hat coefficients of a k = 0 L2 term: (u+ - sign(l) u-, u+ + sign(l) u-).
std::pair<cplx, cplx> hat_coefficients(cplx u_plus, cplx u_minus, double l);

// 4 pi^2 int_0^r (|U+|^2 + |U-|^2) rho d rho (order 0), adding the gradient terms for order 1.
double mode_norm2(const SpinorModeExpansion& e, int k, int l, double r, int derivative_order);
double cyl_norm(const SpinorModeExpansion& e, double r, int derivative_order);
// Angular part of the gradient only, integrated over N_r.
double angular_gradient_norm2(const SpinorModeExpansion& e, double r);

double decay_ratio(const SpinorModeExpansion& e, double r, double R);
double growth_bound_margin(const SpinorModeExpansion& e, int k);
double poincare_check(const SpinorModeExpansion& e, double r);

nlohmann::json expansion_to_json(const SpinorModeExpansion& e);
SpinorModeExpansion expansion_from_json(const nlohmann::json& j, int n_points = 512);

}  // namespace z2s
