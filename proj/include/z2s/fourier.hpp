#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <json.hpp>

namespace z2s {

using cplx = std::complex<double>;

// Band-limited Fourier series sum_{|l|<=L} c_l e^{ilt} on the circle.
// Storage is dense, index l lives at position l+L.
class Series {
public:
    Series() : band_(0), c_(1, cplx(0.0)) {}
    explicit Series(int band);
    Series(int band, std::vector<cplx> coeffs);

    static Series mode(int l, cplx amplitude = 1.0);
    static Series constant(cplx value) { return mode(0, value); }

    int band() const { return band_; }
    const std::vector<cplx>& coeffs() const { return c_; }

    // Zero outside [-L, L].
    cplx operator[](int l) const {
        return (l < -band_ || l > band_) ? cplx(0.0) : c_[static_cast<std::size_t>(l + band_)];
    }
    cplx& ref(int l);

    double norm() const;        // sqrt(2 pi sum |c_l|^2)
    double coeff_norm() const;  // sqrt(sum |c_l|^2)
    double sup_bound() const;   // sum |c_l|, an upper bound for sup |f|
    double c1_proxy() const;    // sum (1+|l|) |c_l|
    bool is_zero() const;

    Series resized(int band) const;
    Series conj() const;        // coefficients of the pointwise conjugate
    Series derivative() const;  // d/dt
    Series trimmed(double rel_tol = 0.0) const;

    // Values at t_j = 2 pi j / n.
    std::vector<cplx> sample(int n) const;
    // Direct DFT of equispaced samples, keeping modes |l| <= band.
    static Series from_samples(const std::vector<cplx>& samples, int band);
    cplx eval(double t) const;

    Series& operator+=(const Series& o);
    Series& operator-=(const Series& o);
    Series& operator*=(cplx a);

private:
    int band_;
    std::vector<cplx> c_;
};

Series operator+(Series a, const Series& b);
Series operator-(Series a, const Series& b);
Series operator-(Series a);
Series operator*(cplx a, Series s);
Series operator*(Series s, cplx a);

// sign(l) multiplier. sign(0) defaults to 0; the alternative +1 is kept for diagnostics.
Series aps(const Series& g, int sign_of_zero = 0);
Series convolve(const Series& f, const Series& g);
Series project_band(const Series& g, int k);
double real_inner(const Series& f, const Series& g);

// Realification: l = -L..L, each coefficient as (re, im).
std::vector<double> realify(const Series& s);
Series derealify(const double* data, int band);
inline std::size_t real_dim(int band) { return static_cast<std::size_t>(2 * (2 * band + 1)); }

struct ComplexPair {
    cplx first{0.0};
    cplx second{0.0};
};

using PairTuple = std::vector<ComplexPair>;

ComplexPair operator+(const ComplexPair& a, const ComplexPair& b);
ComplexPair operator-(const ComplexPair& a, const ComplexPair& b);
ComplexPair operator*(cplx a, const ComplexPair& p);
double pair_norm(const ComplexPair& p);
double tuple_norm(const PairTuple& t);

// Standard Hermitian pairing <u, w> = u1 conj(w1) + u2 conj(w2).
cplx hermitian(const ComplexPair& u, const ComplexPair& w);

// (x, y) -> (conj y, -conj x)
ComplexPair spouse(const ComplexPair& a);
// (a_1..a_p) -> (spouse a_p, ..., spouse a_1); throws on an empty tuple.
PairTuple spouse(const PairTuple& a);

// Finitely supported Z-indexed pair sequence: entries[i] sits at index offset + i.
struct PairSequence {
    int offset = 0;
    std::vector<ComplexPair> entries;
    ComplexPair at(int idx) const;
    int first_index() const { return offset; }
    int last_index() const { return offset + static_cast<int>(entries.size()) - 1; }
};

cplx double_bracket(const PairSequence& u, const PairSequence& w, int n);

nlohmann::json series_to_json(const Series& s);
Series series_from_json(const nlohmann::json& j);

}  // namespace z2s
