#pragma once

#include <array>
#include <compare>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "z2s/cylinder.hpp"
#include "z2s/deformation.hpp"
#include "z2s/fourier.hpp"
#include "z2s/radial.hpp"

namespace z2s {

// A two-component field on N_R written as sum f(r) e^{i nu theta} e^{ilt} per component, with nu
// a half-integer stored as twice_nu. Component 0 of mode k has nu = k - 1/2 and component 1 has
// nu = k + 1/2, so a field splits into the (k, l) modes of dirac_apply_mode.
struct PolarKey {
    int comp = 0;
    int twice_nu = -1;
    int l = 0;
    auto operator<=>(const PolarKey&) const = default;
};

int polar_mode_k(const PolarKey& key);
PolarKey polar_key(int comp, int k, int l);

struct PolarGrid {
    CylinderGeometry geometry;
    DerivativeStencils stencils;
    const std::vector<double>& r() const { return geometry.radial_grid; }
    std::size_t size() const { return geometry.radial_grid.size(); }
};

std::shared_ptr<const PolarGrid> make_polar_grid(double R, int n, double r_first, double lambda);

class PolarField {
public:
    explicit PolarField(std::shared_ptr<const PolarGrid> grid) : grid_(std::move(grid)) {}

    const PolarGrid& grid() const { return *grid_; }
    const std::shared_ptr<const PolarGrid>& grid_ptr() const { return grid_; }
    const std::map<PolarKey, std::vector<cplx>>& components() const { return data_; }

    std::vector<cplx>& at(const PolarKey& key);
    const std::vector<cplx>* find(const PolarKey& key) const;
    bool empty() const { return data_.empty(); }

    PolarField& operator+=(const PolarField& o);
    PolarField& operator-=(const PolarField& o);
    PolarField& operator*=(cplx a);

    // Drops keys whose entries are all zero.
    void prune();
    // Keeps |k| <= k_cap and |l| <= l_cap; returns the L2 norm of what was dropped.
    double truncate(int k_cap, int l_cap);

    // 4 pi^2 int_{r_lo}^{r_hi} sum |f|^2 r dr, the squared L2 norm over N_{r_hi} - N_{r_lo}.
    double norm2(double r_lo, double r_hi) const;
    double norm2() const;
    // Largest radius at which some entry is nonzero, 0 for the zero field.
    double support_outer() const;

private:
    std::shared_ptr<const PolarGrid> grid_;
    std::map<PolarKey, std::vector<cplx>> data_;
};

PolarField operator+(PolarField a, const PolarField& b);
PolarField operator-(PolarField a, const PolarField& b);
PolarField operator*(cplx a, PolarField f);

// f times g(r) e^{i m theta} sigma(t); g sampled on the grid. With l_cap >= 0 the output modes
// with |l| > l_cap are skipped.
PolarField multiply(const PolarField& f, const std::vector<double>& g, int m, const Series& sigma, int l_cap = -1);
PolarField multiply(const PolarField& f, const std::vector<double>& g);
// Pointwise action of a constant 2x2 matrix on the components.
PolarField clifford(const Eigen::Matrix2cd& E, const PolarField& f);

PolarField d_t(const PolarField& f);
// d/dz = (1/2) e^{-i theta} (d/dr - (i/r) d/dtheta), d/dzbar its conjugate.
PolarField d_z(const PolarField& f);
PolarField d_zbar(const PolarField& f);
// E1 d/dt + E2 d/dz + E3 d/dzbar, the operator of dirac_apply_mode.
PolarField dirac(const PolarField& f);
// Symbol of the gradient of a radial function: sigma(grad g) f = E2 (g_z f) + E3 (g_zbar f).
PolarField sigma_grad(const std::vector<double>& g_prime, const PolarField& f);

// Both components at grid node j and angles (theta, t).
std::array<cplx, 2> evaluate(const PolarField& f, std::size_t node, double theta, double t);

// The (k, l) mode as the pair (component 0 at nu = k - 1/2, component 1 at nu = k + 1/2).
RadialSamples mode_of(const PolarField& f, int k, int l);
void set_mode(PolarField& f, int k, int l, const RadialSamples& u);
std::vector<std::pair<int, int>> field_modes(const PolarField& f);

// chi^p (q+ z^a zbar^b, q- z^b zbar^a) sampled on the grid.
PolarField typed_field(std::shared_ptr<const PolarGrid> grid, double a, double b, const Series& q_plus,
                       const Series& q_minus, const Cutoff& chi, int chi_power);

}  // namespace z2s
