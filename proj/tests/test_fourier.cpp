#include <doctest.h>

#include <cmath>
#include <numbers>

#include "z2s/fourier.hpp"
#include "z2s/rng.hpp"

using namespace z2s;

namespace {
constexpr double kPi = std::numbers::pi;

Series random_series(Stream& rng, int band) {
    Series s(band);
    for (int l = -band; l <= band; ++l) s.ref(l) = cplx(rng.normal(), rng.normal());
    return s;
}

double max_diff(const Series& a, const Series& b) {
    const int band = std::max(a.band(), b.band());
    double m = 0.0;
    for (int l = -band; l <= band; ++l) m = std::max(m, std::abs(a[l] - b[l]));
    return m;
}
}  // namespace

TEST_CASE("aps multiplies each mode by its sign with sign(0) = 0") {
    CHECK(max_diff(aps(Series::mode(1)), Series::mode(1)) == 0.0);
    CHECK(aps(Series::constant(1.0)).is_zero());
    const Series two = Series::mode(1) + Series::mode(-1);
    CHECK(max_diff(aps(two), Series::mode(1) - Series::mode(-1)) == 0.0);
    CHECK(max_diff(aps(Series::constant(2.0), 1), Series::constant(2.0)) == 0.0);
}

TEST_CASE("aps applied twice removes the zero mode") {
    Stream rng(1, 0);
    const Series g = random_series(rng, 7);
    CHECK(max_diff(aps(aps(g)), g - project_band(g, 0)) == 0.0);
}

TEST_CASE("convolution of coefficient sequences") {
    CHECK(max_diff(convolve(Series::mode(1), Series::mode(1)), Series::mode(2)) == 0.0);
    Stream rng(2, 0);
    const Series g = random_series(rng, 5);
    CHECK(max_diff(convolve(Series::constant(1.0), g), g) == 0.0);
    const Series f = Series::mode(1) + Series::mode(-1);
    const Series out = convolve(f, Series::mode(1));
    CHECK(out.band() == 2);
    CHECK(max_diff(out, Series::mode(2) + Series::constant(1.0)) == 0.0);
}

TEST_CASE("convolution matches pointwise multiplication of samples") {
    Stream rng(3, 0);
    const Series f = random_series(rng, 4), g = random_series(rng, 6);
    const Series h = convolve(f, g);
    for (double t : {0.0, 0.3, 1.7, 4.0}) CHECK(std::abs(h.eval(t) - f.eval(t) * g.eval(t)) < 1e-12 * (1 + std::abs(h.eval(t))));
}

TEST_CASE("convolution is commutative and associative") {
    Stream rng(4, 0);
    const Series a = random_series(rng, 3), b = random_series(rng, 5), c = random_series(rng, 2);
    CHECK(max_diff(convolve(a, b), convolve(b, a)) < 1e-13);
    CHECK(max_diff(convolve(convolve(a, b), c), convolve(a, convolve(b, c))) < 1e-12);
}

TEST_CASE("project_band keeps the low modes and is idempotent") {
    const Series g = Series::mode(1) + Series::constant(2.0);
    CHECK(max_diff(project_band(g, 0), Series::constant(2.0)) == 0.0);
    Stream rng(5, 0);
    const Series h = random_series(rng, 6);
    CHECK(max_diff(project_band(h, 6), h) == 0.0);
    CHECK(max_diff(project_band(project_band(h, 3), 3), project_band(h, 3)) == 0.0);
    CHECK(project_band(h, 3).norm() <= h.norm());
    CHECK((h - project_band(h, 6)).is_zero());
}

TEST_CASE("real inner product") {
    CHECK(real_inner(Series::mode(1), Series::mode(1)) == doctest::Approx(2 * kPi));
    Stream rng(6, 0);
    const Series g = random_series(rng, 4);
    CHECK(std::abs(real_inner(cplx(0, 1) * g, g)) < 1e-12);
    CHECK(real_inner(Series::mode(1), Series::mode(-1)) == 0.0);
    CHECK(real_inner(g, g) == doctest::Approx(g.norm() * g.norm()));
    const Series f = random_series(rng, 4);
    CHECK(real_inner(f, g) == doctest::Approx(real_inner(g, f)));
}

TEST_CASE("aps commutes with multiplication by a band-limited function on high modes") {
    Stream rng(7, 0);
    const int n1 = 3;
    const Series zeta = random_series(rng, n1);
    Series c = random_series(rng, 20);
    c = c - project_band(c, 2 * n1);
    const Series lhs = convolve(zeta, aps(c)) - aps(convolve(zeta, c));
    CHECK(lhs.coeff_norm() < 1e-12);
}

TEST_CASE("double bracket") {
    PairSequence u{0, {{1.0, 0.0}}}, w{0, {{1.0, 0.0}}};
    CHECK(double_bracket(u, w, 0) == cplx(1.0));
    PairSequence far{10, {{1.0, 1.0}}};
    CHECK(double_bracket(u, far, 0) == cplx(0.0));
    PairSequence u2{0, {{1.0, 2.0}}}, w2{1, {{3.0, 4.0}}};
    CHECK(double_bracket(u2, w2, 1) == cplx(11.0));
}

TEST_CASE("spouse of pairs and tuples") {
    const ComplexPair a{1.0, cplx(0, 2)};
    const ComplexPair s = spouse(a);
    CHECK(s.first == cplx(0, -2));
    CHECK(s.second == cplx(-1.0));
    const ComplexPair b{3.0, cplx(4, 1)};
    const ComplexPair bb = spouse(spouse(b));
    CHECK(bb.first == -b.first);
    CHECK(bb.second == -b.second);
    const PairTuple t{{1.0, 0.0}, {0.0, 1.0}};
    const PairTuple st = spouse(t);
    REQUIRE(st.size() == 2);
    CHECK(st[0].first == cplx(1.0));
    CHECK(st[0].second == cplx(0.0));
    CHECK(st[1].first == cplx(0.0));
    CHECK(st[1].second == cplx(-1.0));
    CHECK_THROWS(spouse(PairTuple{}));
}

TEST_CASE("series JSON round trip is bit exact") {
    Stream rng(8, 0);
    const Series g = random_series(rng, 9) * cplx(1.0 / 3.0);
    const std::string text = series_to_json(g).dump();
    const Series back = series_from_json(nlohmann::json::parse(text));
    REQUIRE(back.band() == g.band());
    for (int l = -9; l <= 9; ++l) {
        CHECK(back[l].real() == g[l].real());
        CHECK(back[l].imag() == g[l].imag());
    }
    CHECK_THROWS(series_from_json(nlohmann::json::parse(R"({"band_limit":1,"coeffs":[[0,0]]})")));
}

TEST_CASE("sampling and DFT invert each other") {
    Stream rng(9, 0);
    const Series g = random_series(rng, 12);
    CHECK(max_diff(Series::from_samples(g.sample(64), 12), g) < 1e-13);
    CHECK(max_diff(g.conj(), Series::from_samples([&] {
                       auto v = g.sample(64);
                       for (auto& z : v) z = std::conj(z);
                       return v;
                   }(), 12)) < 1e-13);
}
