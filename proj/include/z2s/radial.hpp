#pragma once

#include <array>
#include <complex>
#include <vector>

namespace z2s {

// Radial nodes r_j with x(r) = ln r + r/lambda uniform in j. Geometric near the axis,
// close to uniform near r = R.
std::vector<double> mapped_radial_grid(double R, int n, double r_first, double lambda);

// Fourth-order first-derivative stencils (5 points, centred on the interior, one-sided at
// the ends) taken in the grid index and converted with dr/dj. On a smoothly mapped grid
// this is fourth order in the map coordinate. Row j holds (first node index, 5 weights).
struct DerivativeStencils {
    std::vector<int> start;
    std::vector<std::array<double, 5>> w;
};
DerivativeStencils derivative_stencils(const std::vector<double>& r);

std::vector<std::complex<double>> differentiate(const DerivativeStencils& st,
                                                const std::vector<std::complex<double>>& f);

// Composite Simpson weights on a non-uniform grid; an odd trailing interval is closed
// with the quadratic through the last three nodes.
std::vector<double> simpson_weights(const std::vector<double>& x);

// Weights w_i with sum w_i f(x_i) = integral over [a, b] of the interpolating
// polynomial through the nodes x_i.
std::vector<double> interpolatory_weights(const std::vector<double>& x, double a, double b);

// Running integral F_j = int_{x_0}^{x_j} f using 6-node interpolatory rules per interval.
std::vector<std::complex<double>> cumulative_integral(const std::vector<double>& x,
                                                      const std::vector<std::complex<double>>& f);

// The weights behind cumulative_integral, for reuse on a fixed grid.
struct CumulativeRule {
    std::vector<int> start;
    std::vector<std::array<double, 6>> w;  // interval j -> j+1, padded with zeros on short grids
};
CumulativeRule cumulative_rule(const std::vector<double>& x);
std::vector<std::complex<double>> cumulative_integral(const CumulativeRule& rule,
                                                      const std::vector<std::complex<double>>& f);

}  // namespace z2s
