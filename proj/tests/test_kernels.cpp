#include <doctest.h>

#include <cmath>

#include <brwre/kernels.hpp>

using namespace brwre;

TEST_CASE("step kernels have unit mass and the stated entries") {
    for (int d : {1, 2, 3, 4}) {
        auto simple = StepKernel::simple(d);
        CHECK(simple.total_mass() == Rational(1));
        CHECK(simple.entries.size() == static_cast<size_t>(2 * d));
        for (const auto& [e, p] : simple.entries) CHECK(p == Rational(1, 2 * d));

        auto diff = StepKernel::difference(d);
        CHECK(diff.total_mass() == Rational(1));
        // 1 + 2d two-step moves + 2d(d-1) mixed moves
        CHECK(diff.entries.size() == static_cast<size_t>(1 + 2 * d + 2 * d * (d - 1)));
        CHECK(diff.entries[0].second == Rational(1, 2 * d));
    }
}

TEST_CASE("return probability is exactly 1 in recurrent dimensions") {
    auto p1 = return_probability(1, 100);
    CHECK(p1.value == 1.0);
    CHECK(p1.method == ReturnProbEstimate::Method::ExactRecurrent);
    auto p2 = return_probability(2, 100);
    CHECK(p2.value == 1.0);
    CHECK_THROWS_AS(return_probability(3, 1), BudgetError);
}

TEST_CASE("pi_3 from the truncated Green series") {
    auto est = return_probability(3, 10000);
    // Watson integral reference: pi_3 = 0.3405373296...
    CHECK(std::fabs(est.value - 0.3405373) < 1e-3);
    CHECK(std::fabs(est.value - 0.3405373) < 1e-4);
    CHECK(est.method == ReturnProbEstimate::Method::TruncatedGreen);
}

TEST_CASE("series route equals the mass-checked convolution route") {
    for (int d : {1, 2, 3}) {
        auto conv = origin_return_series_by_convolution(d, 40);
        auto fast = origin_return_series(d, 40);
        for (long t = 0; t <= 40; ++t)
            CHECK(std::fabs(conv[static_cast<size_t>(t)] - fast[static_cast<size_t>(t)]) <
                  1e-13);
    }
}

TEST_CASE("difference walk returns equal simple walk even-time returns") {
    // P(D_s = 0) = P(S_{2s} = 0): convolve the difference kernel directly and
    // compare with the even-time series.
    const int d = 3;
    auto diff = StepKernel::difference(d);
    const long T = 10;
    std::map<std::vector<int32_t>, double> cur;
    cur[{0, 0, 0}] = 1.0;
    auto fast = origin_return_series(d, 2 * T);
    for (long s = 1; s <= T; ++s) {
        std::map<std::vector<int32_t>, double> next;
        for (const auto& [x, v] : cur)
            for (const auto& [e, p] : diff.entries) {
                std::vector<int32_t> y = x;
                for (int i = 0; i < d; ++i) y[static_cast<size_t>(i)] += e[static_cast<size_t>(i)];
                next[y] += v * p.to_double();
            }
        cur = std::move(next);
        double at0 = cur.count({0, 0, 0}) ? cur[{0, 0, 0}] : 0.0;
        CHECK(std::fabs(at0 - fast[static_cast<size_t>(2 * s)]) < 1e-12);
    }
}

TEST_CASE("Monte Carlo return probability brackets the Green value") {
    auto green = return_probability(3, 10000);
    auto mc = return_probability_mc(3, 200000, 4000, 20250808, 2);
    CHECK(mc.method == ReturnProbEstimate::Method::MonteCarlo);
    CHECK(std::fabs(mc.value - green.value) < 0.004);
}

TEST_CASE("W_n closed forms") {
    std::vector<int> e1 = {1, 0, 0};
    auto w1 = wn_coefficients(e1, 3);
    REQUIRE(w1.coeffs.size() == 1);
    CHECK(w1.coeffs.at({{1, 0, 0}, 0}) == Rational(1));

    std::vector<int> n2 = {2, 0, 0};
    auto w2 = wn_coefficients(n2, 3);
    REQUIRE(w2.coeffs.size() == 2);
    CHECK(w2.coeffs.at({{2, 0, 0}, 0}) == Rational(1));
    CHECK(w2.coeffs.at({{0, 0, 0}, 1}) == Rational(-1, 3));

    std::vector<int> n11 = {1, 1, 0};
    auto w11 = wn_coefficients(n11, 3);
    REQUIRE(w11.coeffs.size() == 1);
    CHECK(w11.coeffs.at({{1, 1, 0}, 0}) == Rational(1));

    std::vector<int> big = {9, 0, 0};
    CHECK_THROWS_AS(wn_coefficients(big, 3), CapError);
}

TEST_CASE("degree and Kronecker structure of W_n coefficients") {
    // (a) A_n(i,j) = 0 when |i| + 2j > |n|; (c) A_n(i,0) at |i| = |n| is the
    // Kronecker delta. Checked structurally for all |n| <= 5 in d = 1..3.
    for (int d = 1; d <= 3; ++d) {
        std::vector<int> n(static_cast<size_t>(d), 0);
        for (;;) {
            int total = 0;
            for (int v : n) total += v;
            if (total <= 5 && total >= 1) {
                auto w = wn_coefficients(n, d);
                for (const auto& [key, coeff] : w.coeffs) {
                    int deg_i = 0;
                    for (int v : key.first) deg_i += v;
                    CHECK(deg_i + 2 * key.second <= total);
                    if (deg_i == total) {
                        CHECK(key.second == 0);
                        CHECK((key.first == n ? coeff == Rational(1) : coeff.is_zero()));
                    }
                }
            }
            int axis = d - 1;
            while (axis >= 0) {
                auto ai = static_cast<size_t>(axis);
                if (++n[ai] <= 5) break;
                n[ai] = 0;
                --axis;
            }
            if (axis < 0) break;
        }
    }
}

TEST_CASE("harmonicity holds exactly and detects a wrong constant") {
    auto simple3 = StepKernel::simple(3);
    std::vector<int> e1 = {1, 0, 0};
    CHECK(check_harmonicity(wn_coefficients(e1, 3), simple3, 0, 8, -4, 4));
    std::vector<int> n2 = {2, 0, 0};
    CHECK(check_harmonicity(wn_coefficients(n2, 3), simple3, 0, 8, -4, 4));

    PolynomialWn wrong = wn_coefficients(n2, 3);
    wrong.coeffs[{{0, 0, 0}, 1}] = Rational(-1, 2);  // x1^2 - t/2
    CHECK_FALSE(check_harmonicity(wrong, simple3, 0, 8, -4, 4));
}

TEST_CASE("gaussian moments") {
    std::vector<int> n2 = {2, 0, 0};
    CHECK(gaussian_moment(n2, 3) == Rational(1, 3));
    std::vector<int> n1 = {1, 0, 0};
    CHECK(gaussian_moment(n1, 3) == Rational(0));
    std::vector<int> n4 = {4, 0, 0};
    CHECK(gaussian_moment(n4, 3) == Rational(1, 3));  // 3 (1/3)^2
    std::vector<int> mixed = {2, 2, 0};
    CHECK(gaussian_moment(mixed, 3) == Rational(1, 9));
}

namespace {

// Isserlis pairing on the diagonal covariance (1/d) I: independent oracle for
// gaussian_moment up to |n| = 6. E[Z^n] = prod_i (n_i - 1)!! d^{-n_i/2}.
Rational isserlis_moment(const std::vector<int>& n, int d) {
    // recursively pair coordinate i's first factor with the remaining ones
    for (size_t i = 0; i < n.size(); ++i) {
        if (n[i] == 0) continue;
        if (n[i] % 2 == 1) return Rational(0);
        std::vector<int> rest = n;
        rest[i] -= 2;
        // (n_i - 1) ways to pair within the coordinate, covariance 1/d
        return Rational(n[i] - 1, d) * isserlis_moment(rest, d);
    }
    return Rational(1);
}

}  // namespace

TEST_CASE("gaussian moments agree with Isserlis pairing up to order 6") {
    for (int d : {1, 2, 3}) {
        std::vector<int> n(static_cast<size_t>(d), 0);
        for (;;) {
            int total = 0;
            for (int v : n) total += v;
            if (total <= 6)
                CHECK(gaussian_moment(n, d) == isserlis_moment(n, d));
            int axis = d - 1;
            while (axis >= 0) {
                auto ai = static_cast<size_t>(axis);
                if (++n[ai] <= 6) break;
                n[ai] = 0;
                --axis;
            }
            if (axis < 0) break;
        }
    }
}
