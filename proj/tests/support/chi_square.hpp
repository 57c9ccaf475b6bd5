#pragma once
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace test_support {

// Regularized upper incomplete gamma Q(a, x), series + continued fraction.
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) return 1.0;
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // P(a,x) by series, Q = 1 - P
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Q(a,x) by Lentz continued fraction
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi2_pvalue(double stat, int dof) {
    if (dof <= 0) return 1.0;
    return gamma_q(static_cast<double>(dof) / 2.0, stat / 2.0);
}

// Two-sample chi-square over keyed outcome counts; buckets with pooled
// expectation under `min_expected` merge into one.
inline double two_sample_chi2_pvalue(const std::map<std::string, long>& a,
                                     const std::map<std::string, long>& b,
                                     double min_expected = 5.0) {
    double na = 0, nb = 0;
    std::map<std::string, std::pair<long, long>> merged;
    for (const auto& [k, v] : a) {
        merged[k].first += v;
        na += static_cast<double>(v);
    }
    for (const auto& [k, v] : b) {
        merged[k].second += v;
        nb += static_cast<double>(v);
    }
    const double n = na + nb;
    double stat = 0.0;
    int dof = -1;
    long rest_a = 0, rest_b = 0;
    for (const auto& [k, cnt] : merged) {
        double pooled = static_cast<double>(cnt.first + cnt.second);
        if (pooled * na / n < min_expected || pooled * nb / n < min_expected) {
            rest_a += cnt.first;
            rest_b += cnt.second;
            continue;
        }
        double ea = pooled * na / n, eb = pooled * nb / n;
        stat += (cnt.first - ea) * (cnt.first - ea) / ea;
        stat += (cnt.second - eb) * (cnt.second - eb) / eb;
        ++dof;
    }
    double pooled_rest = static_cast<double>(rest_a + rest_b);
    if (pooled_rest > 0.0) {
        double ea = pooled_rest * na / n, eb = pooled_rest * nb / n;
        if (ea >= min_expected && eb >= min_expected) {
            stat += (rest_a - ea) * (rest_a - ea) / ea;
            stat += (rest_b - eb) * (rest_b - eb) / eb;
            ++dof;
        }
    }
    return chi2_pvalue(stat, dof);
}

// One-sample chi-square of observed counts against exact probabilities.
inline double chi2_gof_pvalue(const std::vector<long>& observed,
                              const std::vector<double>& probs, long n,
                              double min_expected = 5.0) {
    double stat = 0.0;
    int dof = -1;
    double rest_obs = 0, rest_exp = 0;
    for (size_t i = 0; i < observed.size(); ++i) {
        double e = probs[i] * static_cast<double>(n);
        if (e < min_expected) {
            rest_obs += static_cast<double>(observed[i]);
            rest_exp += e;
            continue;
        }
        double diff = static_cast<double>(observed[i]) - e;
        stat += diff * diff / e;
        ++dof;
    }
    if (rest_exp >= min_expected) {
        double diff = rest_obs - rest_exp;
        stat += diff * diff / rest_exp;
        ++dof;
    }
    return chi2_pvalue(stat, dof);
}

}  // namespace test_support
