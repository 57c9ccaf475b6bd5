#pragma once
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brwre/errors.hpp"
#include "brwre/rational.hpp"

namespace brwre {

// Random-walk step law as displacement -> probability.
struct StepKernel {
    int d = 1;
    std::vector<std::pair<std::vector<int32_t>, Rational>> entries;

    // uniform nearest-neighbor walk: 1/(2d) per unit displacement
    static StepKernel simple(int d);
    // law of xi - xi~ for two independent simple steps:
    // 1/(2d) at 0, 1/(4d^2) at +-2e_i, 2/(4d^2) at each mixed e_i +- e_j
    static StepKernel difference(int d);

    Rational total_mass() const;
};

struct ReturnProbEstimate {
    int d = 0;
    double value = 0.0;
    double half_width = 0.0;
    enum class Method { ExactRecurrent, TruncatedGreen, MonteCarlo } method =
        Method::TruncatedGreen;
};

std::string method_name(ReturnProbEstimate::Method m);

// p_t = P(S_t = 0) for the d-dimensional simple walk, t = 0..t_max.
// Exact dimensional composition of 1-d return probabilities (cost O(T sqrt T)).
std::vector<double> origin_return_series(int d, long t_max);

// Same values by literal dense-lattice convolution with a mass-1 check at
// every iteration. Exact but O((2t)^d) memory; keep t_max small.
std::vector<double> origin_return_series_by_convolution(int d, long t_max);

// Truncated Green function G = sum_{t<=budget} p_t plus an analytic local-CLT
// tail, then pi_d = 1 - 1/G. Dimensions 1 and 2 short-circuit to 1 exactly.
ReturnProbEstimate return_probability(int d, long budget);

// Return frequency over `walks` walks of length `horizon`, early exit at the
// first return, plus a renewal correction for returns beyond the horizon.
ReturnProbEstimate return_probability_mc(int d, long walks, long horizon,
                                         uint64_t seed, int threads = 0);

// Tail sum_{t > budget, even} of the local CLT estimate of p_t.
double return_series_tail(int d, long budget);

// --- space-time harmonic polynomials -------------------------------------

// W_n(t,x) = sum A_n(i,j) x^i t^j with exact rational coefficients.
struct PolynomialWn {
    std::vector<int> n;
    int d = 1;
    std::map<std::pair<std::vector<int>, int>, Rational> coeffs;

    double evaluate(double t, std::span<const double> x) const;
    Rational evaluate_exact(const Rational& t, std::span<const Rational> x) const;
};

// Coefficients of W_n for the simple-walk cumulant
// rho(theta) = ln((1/d) sum_i cosh theta_i), by exact rational series
// expansion of exp(theta.x - t rho(theta)). CapError if |n| > cap.
PolynomialWn wn_coefficients(std::span<const int> n, int d, int cap = 8);

// True iff sum_e kernel(e) W(t+1, x+e) == W(t, x) exactly (rational identity,
// evaluated in scaled integer arithmetic) for all t in [t_lo, t_hi] and
// x in [x_lo, x_hi]^d.
bool check_harmonicity(const PolynomialWn& poly, const StepKernel& kernel,
                       int t_lo, int t_hi, int x_lo, int x_hi);

// Moment of the centered Gaussian with covariance (1/d) I:
// product over coordinates of 0 (odd order) or (2k-1)!! / d^k.
Rational gaussian_moment(std::span<const int> n, int d);

}  // namespace brwre
