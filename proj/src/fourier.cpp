#include "z2s/fourier.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace z2s {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// e^{2 pi i q / n} for q = 0..n-1, cached per size on each thread.
const std::vector<cplx>& twiddles(int n) {
    thread_local std::map<int, std::vector<cplx>> cache;
    auto& w = cache[n];
    if (w.empty()) {
        w.resize(static_cast<std::size_t>(n));
        for (int q = 0; q < n; ++q) w[static_cast<std::size_t>(q)] = std::polar(1.0, kTwoPi * q / n);
    }
    return w;
}

int sgn(int l, int sign_of_zero) { return l > 0 ? 1 : (l < 0 ? -1 : sign_of_zero); }
}  // namespace

Series::Series(int band) : band_(band) {
    if (band < 0) throw std::invalid_argument("Series: negative band limit");
    c_.assign(static_cast<std::size_t>(2 * band + 1), cplx(0.0));
}

Series::Series(int band, std::vector<cplx> coeffs) : band_(band), c_(std::move(coeffs)) {
    if (band < 0) throw std::invalid_argument("Series: negative band limit");
    if (c_.size() != static_cast<std::size_t>(2 * band + 1))
        throw std::invalid_argument("Series: coefficient count must be 2L+1");
}

Series Series::mode(int l, cplx amplitude) {
    Series s(std::abs(l));
    s.ref(l) = amplitude;
    return s;
}

cplx& Series::ref(int l) {
    if (l < -band_ || l > band_) throw std::out_of_range("Series::ref: mode outside band");
    return c_[static_cast<std::size_t>(l + band_)];
}

double Series::coeff_norm() const {
    double s = 0.0;
    for (const auto& z : c_) s += std::norm(z);
    return std::sqrt(s);
}

double Series::norm() const { return std::sqrt(kTwoPi) * coeff_norm(); }

double Series::sup_bound() const {
    double s = 0.0;
    for (const auto& z : c_) s += std::abs(z);
    return s;
}

double Series::c1_proxy() const {
    double s = 0.0;
    for (int l = -band_; l <= band_; ++l) s += (1.0 + std::abs(l)) * std::abs((*this)[l]);
    return s;
}

bool Series::is_zero() const {
    for (const auto& z : c_)
        if (z != cplx(0.0)) return false;
    return true;
}

Series Series::resized(int band) const {
    Series out(band);
    const int m = std::min(band, band_);
    for (int l = -m; l <= m; ++l) out.ref(l) = (*this)[l];
    return out;
}

Series Series::conj() const {
    Series out(band_);
    for (int l = -band_; l <= band_; ++l) out.ref(l) = std::conj((*this)[-l]);
    return out;
}

Series Series::derivative() const {
    Series out(band_);
    for (int l = -band_; l <= band_; ++l) out.ref(l) = cplx(0.0, l) * (*this)[l];
    return out;
}

Series Series::trimmed(double rel_tol) const {
    const double thr = rel_tol * coeff_norm();
    int b = band_;
    while (b > 0 && std::abs((*this)[b]) <= thr && std::abs((*this)[-b]) <= thr) --b;
    return resized(b);
}

std::vector<cplx> Series::sample(int n) const {
    std::vector<cplx> out(static_cast<std::size_t>(n));
    const auto& w = twiddles(n);
    for (int j = 0; j < n; ++j) {
        cplx acc(0.0);
        for (int l = -band_; l <= band_; ++l) {
            const int q = ((l * j) % n + n) % n;
            acc += (*this)[l] * w[static_cast<std::size_t>(q)];
        }
        out[static_cast<std::size_t>(j)] = acc;
    }
    return out;
}

cplx Series::eval(double t) const {
    cplx acc(0.0);
    for (int l = -band_; l <= band_; ++l) acc += (*this)[l] * std::polar(1.0, l * t);
    return acc;
}

Series Series::from_samples(const std::vector<cplx>& samples, int band) {
    const int n = static_cast<int>(samples.size());
    if (2 * band + 1 > n) throw std::invalid_argument("from_samples: band exceeds Nyquist limit");
    Series out(band);
    const auto& w = twiddles(n);
    for (int l = -band; l <= band; ++l) {
        cplx acc(0.0);
        for (int j = 0; j < n; ++j) {
            const int q = ((-l * j) % n + n) % n;
            acc += samples[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(q)];
        }
        out.ref(l) = acc / static_cast<double>(n);
    }
    return out;
}

Series& Series::operator+=(const Series& o) {
    if (o.band_ > band_) *this = resized(o.band_);
    for (int l = -o.band_; l <= o.band_; ++l) ref(l) += o[l];
    return *this;
}

Series& Series::operator-=(const Series& o) {
    if (o.band_ > band_) *this = resized(o.band_);
    for (int l = -o.band_; l <= o.band_; ++l) ref(l) -= o[l];
    return *this;
}

Series& Series::operator*=(cplx a) {
    for (auto& z : c_) z *= a;
    return *this;
}

Series operator+(Series a, const Series& b) { return a += b; }
Series operator-(Series a, const Series& b) { return a -= b; }
Series operator-(Series a) { return a *= -1.0; }
Series operator*(cplx a, Series s) { return s *= a; }
Series operator*(Series s, cplx a) { return s *= a; }

Series aps(const Series& g, int sign_of_zero) {
    Series out(g.band());
    for (int l = -g.band(); l <= g.band(); ++l) out.ref(l) = static_cast<double>(sgn(l, sign_of_zero)) * g[l];
    return out;
}

Series convolve(const Series& f, const Series& g) {
    const int lf = f.band(), lg = g.band();
    Series out(lf + lg);
    for (int j = -lf; j <= lf; ++j) {
        const cplx a = f[j];
        if (a == cplx(0.0)) continue;
        for (int m = -lg; m <= lg; ++m) out.ref(j + m) += a * g[m];
    }
    return out;
}

Series project_band(const Series& g, int k) {
    if (k < 0) throw std::invalid_argument("project_band: negative band");
    Series out(g.band());
    const int m = std::min(k, g.band());
    for (int l = -m; l <= m; ++l) out.ref(l) = g[l];
    return out;
}

double real_inner(const Series& f, const Series& g) {
    const int b = std::max(f.band(), g.band());
    double acc = 0.0;
    for (int l = -b; l <= b; ++l) acc += std::real(f[l] * std::conj(g[l]));
    return kTwoPi * acc;
}

std::vector<double> realify(const Series& s) {
    std::vector<double> v(real_dim(s.band()));
    for (int l = -s.band(), i = 0; l <= s.band(); ++l, i += 2) {
        v[static_cast<std::size_t>(i)] = s[l].real();
        v[static_cast<std::size_t>(i + 1)] = s[l].imag();
    }
    return v;
}

Series derealify(const double* data, int band) {
    Series s(band);
    for (int l = -band, i = 0; l <= band; ++l, i += 2) s.ref(l) = cplx(data[i], data[i + 1]);
    return s;
}

ComplexPair operator+(const ComplexPair& a, const ComplexPair& b) { return {a.first + b.first, a.second + b.second}; }
ComplexPair operator-(const ComplexPair& a, const ComplexPair& b) { return {a.first - b.first, a.second - b.second}; }
ComplexPair operator*(cplx a, const ComplexPair& p) { return {a * p.first, a * p.second}; }

double pair_norm(const ComplexPair& p) { return std::sqrt(std::norm(p.first) + std::norm(p.second)); }

double tuple_norm(const PairTuple& t) {
    double s = 0.0;
    for (const auto& p : t) s += std::norm(p.first) + std::norm(p.second);
    return std::sqrt(s);
}

cplx hermitian(const ComplexPair& u, const ComplexPair& w) {
    return u.first * std::conj(w.first) + u.second * std::conj(w.second);
}

ComplexPair spouse(const ComplexPair& a) { return {std::conj(a.second), -std::conj(a.first)}; }

PairTuple spouse(const PairTuple& a) {
    if (a.empty()) throw std::invalid_argument("spouse: empty tuple");
    PairTuple out;
    out.reserve(a.size());
    for (auto it = a.rbegin(); it != a.rend(); ++it) out.push_back(spouse(*it));
    return out;
}

ComplexPair PairSequence::at(int idx) const {
    if (idx < first_index() || idx > last_index()) return {};
    return entries[static_cast<std::size_t>(idx - offset)];
}

cplx double_bracket(const PairSequence& u, const PairSequence& w, int n) {
    cplx acc(0.0);
    for (int i = u.first_index(); i <= u.last_index(); ++i) {
        const int j = n - i;
        if (j < w.first_index() || j > w.last_index()) continue;
        acc += hermitian(u.at(i), w.at(j));
    }
    return acc;
}

nlohmann::json series_to_json(const Series& s) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& z : s.coeffs()) coeffs.push_back({z.real(), z.imag()});
    nlohmann::json j;
    j["band_limit"] = s.band();
    j["coeffs"] = std::move(coeffs);
    return j;
}

Series series_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("band_limit") || !j.contains("coeffs"))
        throw std::invalid_argument("series JSON needs band_limit and coeffs");
    const int band = j.at("band_limit").get<int>();
    const auto& arr = j.at("coeffs");
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(2 * band + 1))
        throw std::invalid_argument("series JSON: coeffs must hold 2*band_limit+1 entries");
    std::vector<cplx> c;
    c.reserve(arr.size());
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 2) throw std::invalid_argument("series JSON: each coeff is [re, im]");
        c.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return Series(band, std::move(c));
}

}  // namespace z2s
