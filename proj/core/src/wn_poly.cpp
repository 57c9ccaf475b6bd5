#include <cstdlib>
#include <map>
#include <mutex>
#include <numeric>

#include "brwre/kernels.hpp"

namespace brwre {

namespace {

// Coefficient ring: polynomials in (x_1..x_d, t) with rational coefficients.
using XKey = std::pair<std::vector<int>, int>;  // (x exponents, t exponent)
using Poly = std::map<XKey, Rational>;
// Power series in theta, truncated at total degree <= cap.
using Series = std::map<std::vector<int>, Poly>;

int degree(const std::vector<int>& k) {
    return std::accumulate(k.begin(), k.end(), 0);
}

void poly_axpy(Poly& dst, const Poly& src, const Rational& s) {
    for (const auto& [k, v] : src) {
        Rational& slot = dst[k];
        slot += v * s;
        if (slot.is_zero()) dst.erase(k);
    }
}

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out;
    for (const auto& [ka, va] : a)
        for (const auto& [kb, vb] : b) {
            XKey k = ka;
            for (size_t i = 0; i < k.first.size(); ++i) k.first[i] += kb.first[i];
            k.second += kb.second;
            Rational& slot = out[k];
            slot += va * vb;
            if (slot.is_zero()) out.erase(k);
        }
    return out;
}

Series series_mul(const Series& a, const Series& b, int cap) {
    Series out;
    for (const auto& [ka, pa] : a) {
        int da = degree(ka);
        for (const auto& [kb, pb] : b) {
            if (da + degree(kb) > cap) continue;
            std::vector<int> k = ka;
            for (size_t i = 0; i < k.size(); ++i) k[i] += kb[i];
            Poly prod = poly_mul(pa, pb);
            Poly& slot = out[k];
            poly_axpy(slot, prod, Rational(1));
            if (slot.empty()) out.erase(k);
        }
    }
    return out;
}

Series series_scale(Series s, const Rational& f) {
    for (auto& [k, p] : s)
        for (auto& [xk, v] : p) v *= f;
    return s;
}

void series_add(Series& dst, const Series& src) {
    for (const auto& [k, p] : src) {
        Poly& slot = dst[k];
        poly_axpy(slot, p, Rational(1));
        if (slot.empty()) dst.erase(k);
    }
}

long long factorial(int n) {
    long long f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// exp(theta.x - t rho(theta)) as a truncated series, rho the simple-walk
// cumulant ln((1/d) sum_i cosh theta_i).
Series build_exp_series(int d, int cap) {
    const std::vector<int> zero_key(static_cast<size_t>(d), 0);

    // u = g - 1 where g = 1 + (1/d) sum_i sum_{m>=1} theta_i^{2m}/(2m)!
    Series u;
    for (int i = 0; i < d; ++i)
        for (int m = 1; 2 * m <= cap; ++m) {
            auto k = zero_key;
            k[static_cast<size_t>(i)] = 2 * m;
            Poly p;
            p[{std::vector<int>(static_cast<size_t>(d), 0), 0}] =
                Rational(1, static_cast<long long>(d) * factorial(2 * m));
            u[k] = std::move(p);
        }

    // rho = ln(1+u) = sum_j (-1)^{j+1} u^j / j   (u has valuation 2)
    Series rho;
    Series upow = u;
    for (int j = 1; 2 * j <= cap; ++j) {
        series_add(rho, series_scale(upow, Rational(j % 2 == 1 ? 1 : -1, j)));
        if (2 * (j + 1) <= cap) upow = series_mul(upow, u, cap);
    }

    // A = theta.x - t rho
    Series a;
    for (int i = 0; i < d; ++i) {
        auto k = zero_key;
        k[static_cast<size_t>(i)] = 1;
        std::vector<int> xe(static_cast<size_t>(d), 0);
        xe[static_cast<size_t>(i)] = 1;
        Poly p;
        p[{xe, 0}] = Rational(1);
        a[k] = std::move(p);
    }
    for (const auto& [k, p] : rho) {
        Poly tp;
        for (const auto& [xk, v] : p) tp[{xk.first, xk.second + 1}] = -v;
        Poly& slot = a[k];
        poly_axpy(slot, tp, Rational(1));
        if (slot.empty()) a.erase(k);
    }

    // exp(A) by Horner: 1 + A(1 + A/2(1 + A/3(...)))
    Series one;
    {
        Poly p;
        p[{std::vector<int>(static_cast<size_t>(d), 0), 0}] = Rational(1);
        one[zero_key] = std::move(p);
    }
    Series e = one;
    for (int j = cap; j >= 1; --j) {
        e = series_mul(a, e, cap);
        e = series_scale(std::move(e), Rational(1, j));
        series_add(e, one);
    }
    return e;
}

const Series& exp_series_cached(int d, int cap) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, Series> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(d, cap);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_exp_series(d, cap)).first;
    return it->second;
}

}  // namespace

PolynomialWn wn_coefficients(std::span<const int> n, int d, int cap) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (static_cast<int>(n.size()) != d)
        throw DomainError("multi-index length must equal dimension");
    int total = 0;
    for (int ni : n) {
        if (ni < 0) throw DomainError("multi-index entries must be >= 0");
        total += ni;
    }
    if (total > cap) throw CapError("|n| exceeds the configured cap");

    const Series& e = exp_series_cached(d, std::max(total, 1));
    PolynomialWn w;
    w.n.assign(n.begin(), n.end());
    w.d = d;
    auto it = e.find(w.n);
    if (it != e.end()) {
        Rational nfact(1);
        for (int ni : n) nfact *= Rational(factorial(ni));
        for (const auto& [xk, v] : it->second) {
            Rational coeff = v * nfact;
            if (!coeff.is_zero()) w.coeffs[xk] = coeff;
        }
    }
    return w;
}

double PolynomialWn::evaluate(double t, std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& [k, v] : coeffs) {
        double term = v.to_double();
        for (size_t i = 0; i < k.first.size(); ++i)
            for (int e = 0; e < k.first[i]; ++e) term *= x[i];
        for (int e = 0; e < k.second; ++e) term *= t;
        acc += term;
    }
    return acc;
}

Rational PolynomialWn::evaluate_exact(const Rational& t,
                                      std::span<const Rational> x) const {
    Rational acc;
    for (const auto& [k, v] : coeffs) {
        Rational term = v;
        for (size_t i = 0; i < k.first.size(); ++i) term *= x[i].pow(k.first[i]);
        term *= t.pow(k.second);
        acc += term;
    }
    return acc;
}

bool check_harmonicity(const PolynomialWn& poly, const StepKernel& kernel,
                       int t_lo, int t_hi, int x_lo, int x_hi) {
    if (poly.d != kernel.d) throw DomainError("polynomial/kernel dimension mismatch");
    const int d = poly.d;

    // Scale coefficients and kernel probabilities to integers so the identity
    // check is exact integer arithmetic on the grid.
    auto lcm128 = [](long long a, long long b) {
        __int128 g = std::gcd(a, b);
        return static_cast<long long>((static_cast<__int128>(a) / g) * b);
    };
    long long scale = 1;
    for (const auto& [k, v] : poly.coeffs) scale = lcm128(scale, v.den());
    long long kscale = 1;
    for (const auto& [e, p] : kernel.entries) kscale = lcm128(kscale, p.den());

    struct Term {
        std::vector<int> xe;
        int te;
        long long c;
    };
    std::vector<Term> terms;
    int max_xe = 0, max_te = 0;
    for (const auto& [k, v] : poly.coeffs) {
        terms.push_back({k.first, k.second,
                         v.num() * (scale / v.den())});
        for (int e : k.first) max_xe = std::max(max_xe, e);
        max_te = std::max(max_te, k.second);
    }
    std::vector<std::pair<std::vector<int32_t>, long long>> kern;
    int reach = 0;
    for (const auto& [e, p] : kernel.entries) {
        kern.emplace_back(e, p.num() * (kscale / p.den()));
        for (int32_t c : e) reach = std::max(reach, std::abs(static_cast<int>(c)));
    }

    // power tables
    const int v_lo = x_lo - reach, v_hi = x_hi + reach;
    auto powi = [](long long b, int e) {
        long long r = 1;
        for (int i = 0; i < e; ++i) r *= b;
        return r;
    };
    std::vector<std::vector<long long>> xpow(static_cast<size_t>(v_hi - v_lo + 1));
    for (int v = v_lo; v <= v_hi; ++v) {
        auto& row = xpow[static_cast<size_t>(v - v_lo)];
        for (int e = 0; e <= max_xe; ++e) row.push_back(powi(v, e));
    }
    std::vector<std::vector<long long>> tpow(static_cast<size_t>(t_hi - t_lo + 2));
    for (int t = t_lo; t <= t_hi + 1; ++t) {
        auto& row = tpow[static_cast<size_t>(t - t_lo)];
        for (int e = 0; e <= max_te; ++e) row.push_back(powi(t, e));
    }

    auto eval = [&](int t, const std::vector<int32_t>& x) -> __int128 {
        __int128 acc = 0;
        for (const auto& term : terms) {
            __int128 v = term.c;
            for (int i = 0; i < d; ++i)
                v *= xpow[static_cast<size_t>(x[static_cast<size_t>(i)] - v_lo)]
                         [static_cast<size_t>(term.xe[static_cast<size_t>(i)])];
            v *= tpow[static_cast<size_t>(t - t_lo)][static_cast<size_t>(term.te)];
            acc += v;
        }
        return acc;
    };

    std::vector<int32_t> x(static_cast<size_t>(d), static_cast<int32_t>(x_lo));
    for (;;) {
        for (int t = t_lo; t <= t_hi; ++t) {
            __int128 lhs = 0;
            std::vector<int32_t> y(static_cast<size_t>(d));
            for (const auto& [e, pw] : kern) {
                for (int i = 0; i < d; ++i)
                    y[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] + e[static_cast<size_t>(i)];
                lhs += pw * eval(t + 1, y);
            }
            __int128 rhs = static_cast<__int128>(kscale) * eval(t, x);
            if (lhs != rhs) return false;
        }
        int axis = d - 1;
        while (axis >= 0) {
            auto ai = static_cast<size_t>(axis);
            if (++x[ai] <= x_hi) break;
            x[ai] = static_cast<int32_t>(x_lo);
            --axis;
        }
        if (axis < 0) break;
    }
    return true;
}

}  // namespace brwre
