#include "brwre/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "brwre/rng.hpp"

namespace brwre {

StepKernel StepKernel::simple(int d) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    StepKernel k;
    k.d = d;
    for (int i = 0; i < d; ++i)
        for (int s : {+1, -1}) {
            std::vector<int32_t> e(static_cast<size_t>(d), 0);
            e[static_cast<size_t>(i)] = static_cast<int32_t>(s);
            k.entries.emplace_back(std::move(e), Rational(1, 2LL * d));
        }
    return k;
}

StepKernel StepKernel::difference(int d) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    StepKernel k;
    k.d = d;
    std::vector<int32_t> zero(static_cast<size_t>(d), 0);
    k.entries.emplace_back(zero, Rational(1, 2LL * d));
    for (int i = 0; i < d; ++i)
        for (int s : {+2, -2}) {
            auto e = zero;
            e[static_cast<size_t>(i)] = static_cast<int32_t>(s);
            k.entries.emplace_back(e, Rational(1, 4LL * d * d));
        }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            for (int si : {+1, -1})
                for (int sj : {+1, -1}) {
                    auto e = zero;
                    e[static_cast<size_t>(i)] = static_cast<int32_t>(si);
                    e[static_cast<size_t>(j)] = static_cast<int32_t>(sj);
                    k.entries.emplace_back(e, Rational(2, 4LL * d * d));
                }
    return k;
}

Rational StepKernel::total_mass() const {
    Rational s;
    for (const auto& [e, p] : entries) s += p;
    return s;
}

std::string method_name(ReturnProbEstimate::Method m) {
    switch (m) {
        case ReturnProbEstimate::Method::ExactRecurrent: return "exact-recurrent";
        case ReturnProbEstimate::Method::TruncatedGreen: return "truncated-green";
        case ReturnProbEstimate::Method::MonteCarlo: return "monte-carlo";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// origin return series
// ---------------------------------------------------------------------------

namespace {

// 1-d fair walk: P(at 0 after t steps); r_{t} = r_{t-2} (t-1)/t, odd t -> 0.
std::vector<double> one_dim_series(long t_max) {
    std::vector<double> r(static_cast<size_t>(t_max) + 1, 0.0);
    r[0] = 1.0;
    for (long t = 2; t <= t_max; t += 2)
        r[static_cast<size_t>(t)] =
            r[static_cast<size_t>(t - 2)] * static_cast<double>(t - 1) / static_cast<double>(t);
    return r;
}

}  // namespace

std::vector<double> origin_return_series(int d, long t_max) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (t_max < 0) throw DomainError("t_max must be >= 0");
    std::vector<double> prev = one_dim_series(t_max);
    // Compose one coordinate at a time: in dimension k, the first k-1
    // coordinates receive j ~ Binomial(t, (k-1)/k) of the t steps.
    for (int k = 2; k <= d; ++k) {
        std::vector<double> cur(static_cast<size_t>(t_max) + 1, 0.0);
        cur[0] = 1.0;
        const double p = static_cast<double>(k - 1) / static_cast<double>(k);
        const double ratio2 = static_cast<double>((k - 1) * (k - 1));  // (p/q)^2
        std::vector<double> r1 = one_dim_series(t_max);
        for (long t = 2; t <= t_max; t += 2) {
            const double td = static_cast<double>(t);
            double sigma = std::sqrt(td * p * (1.0 - p));
            long half_window = static_cast<long>(10.0 * sigma) + 16;
            long mode = static_cast<long>(td * p);
            long j0 = std::clamp(mode - half_window, 0L, t);
            long j1 = std::clamp(mode + half_window, 0L, t);
            j0 += (j0 & 1);  // even j only: both sub-walks need even step counts
            // log pmf of Binomial(t, p) at j0
            double lf = std::lgamma(td + 1.0) - std::lgamma(static_cast<double>(j0) + 1.0) -
                        std::lgamma(static_cast<double>(t - j0) + 1.0) +
                        static_cast<double>(j0) * std::log(p) +
                        static_cast<double>(t - j0) * std::log1p(-p);
            double f = std::exp(lf);
            double acc = 0.0;
            for (long j = j0; j <= j1; j += 2) {
                acc += f * prev[static_cast<size_t>(j)] * r1[static_cast<size_t>(t - j)];
                // advance pmf by two: C(t,j+2)/C(t,j) * (p/q)^2
                double num = static_cast<double>(t - j) * static_cast<double>(t - j - 1);
                double den = static_cast<double>(j + 1) * static_cast<double>(j + 2);
                f *= (num / den) * ratio2;
            }
            cur[static_cast<size_t>(t)] = acc;
        }
        prev = std::move(cur);
    }
    return prev;
}

std::vector<double> origin_return_series_by_convolution(int d, long t_max) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (t_max < 0) throw DomainError("t_max must be >= 0");
    const long R = t_max;  // support radius after t steps
    const long side = 2 * R + 1;
    size_t vol = 1;
    for (int i = 0; i < d; ++i) {
        vol *= static_cast<size_t>(side);
        if (vol > (1ULL << 28))
            throw CapError("convolution box too large; lower t_max or d");
    }
    std::vector<double> cur(vol, 0.0), next(vol, 0.0);
    std::vector<size_t> stride(static_cast<size_t>(d), 1);
    for (int i = d - 2; i >= 0; --i)
        stride[static_cast<size_t>(i)] = stride[static_cast<size_t>(i + 1)] * static_cast<size_t>(side);
    size_t origin = 0;
    for (int i = 0; i < d; ++i) origin += static_cast<size_t>(R) * stride[static_cast<size_t>(i)];
    cur[origin] = 1.0;

    std::vector<double> out;
    out.push_back(1.0);
    const double w = 1.0 / static_cast<double>(2 * d);
    for (long t = 1; t <= t_max; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        double mass = 0.0;
        // walk the occupied band |x|_inf <= t-1
        std::vector<long> x(static_cast<size_t>(d), -(t - 1));
        for (;;) {
            size_t idx = 0;
            for (int i = 0; i < d; ++i)
                idx += static_cast<size_t>(x[static_cast<size_t>(i)] + R) * stride[static_cast<size_t>(i)];
            double v = cur[idx];
            if (v != 0.0) {
                for (int i = 0; i < d; ++i) {
                    next[idx + stride[static_cast<size_t>(i)]] += v * w;
                    next[idx - stride[static_cast<size_t>(i)]] += v * w;
                }
                mass += v;
            }
            int axis = d - 1;
            while (axis >= 0) {
                auto ai = static_cast<size_t>(axis);
                if (++x[ai] <= t - 1) break;
                x[ai] = -(t - 1);
                --axis;
            }
            if (axis < 0) break;
        }
        if (std::fabs(mass - 1.0) > 1e-9)
            throw NumericError("convolution lost probability mass at step " + std::to_string(t));
        std::swap(cur, next);
        out.push_back(cur[origin]);
    }
    return out;
}

double return_series_tail(int d, long budget) {
    // p_t ~ 2 (d / (2 pi t))^{d/2} for even t; summing over even t > budget
    // with m = t/2 gives 2 (d/(4 pi))^{d/2} sum_{m > budget/2} m^{-d/2}.
    const double s = static_cast<double>(d) / 2.0;
    const double pref = 2.0 * std::pow(static_cast<double>(d) / (4.0 * M_PI), s);
    const double M = std::floor(static_cast<double>(budget) / 2.0);
    // Euler-Maclaurin for sum_{m > M} m^{-s}
    double zeta_tail = std::pow(M, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(M, -s) +
                       (s / 12.0) * std::pow(M, -s - 1.0);
    return pref * zeta_tail;
}

ReturnProbEstimate return_probability(int d, long budget) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (budget < 2) throw BudgetError("budget must be >= 2");
    if (d <= 2)
        return {d, 1.0, 0.0, ReturnProbEstimate::Method::ExactRecurrent};

    auto series = origin_return_series(d, budget);
    // self-check against the mass-checked literal convolution on a prefix
    {
        long check_t = std::min<long>(budget, d <= 3 ? 24 : 8);
        auto conv = origin_return_series_by_convolution(d, check_t);
        for (long t = 0; t <= check_t; ++t)
            if (std::fabs(conv[static_cast<size_t>(t)] - series[static_cast<size_t>(t)]) > 1e-12)
                throw NumericError("return-series routes disagree at t=" + std::to_string(t));
    }
    double g = 0.0, comp = 0.0;
    for (long t = 0; t <= budget; t += 2) {
        double y = series[static_cast<size_t>(t)] - comp;
        double s = g + y;
        comp = (s - g) - y;
        g = s;
    }
    double tail = return_series_tail(d, budget);
    g += tail;
    double value = 1.0 - 1.0 / g;
    // error model: local CLT relative error O(1/t) on the tail plus the next
    // Euler-Maclaurin term; propagate through pi = 1 - 1/G
    double g_err = tail * (2.0 * d / static_cast<double>(budget)) +
                   std::pow(static_cast<double>(budget) / 2.0, -static_cast<double>(d) / 2.0 - 1.0);
    double half_width = g_err / (g * g) + 1e-12;
    return {d, value, half_width, ReturnProbEstimate::Method::TruncatedGreen};
}

ReturnProbEstimate return_probability_mc(int d, long walks, long horizon,
                                         uint64_t seed, int threads) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (walks < 1 || horizon < 2) throw BudgetError("need walks >= 1 and horizon >= 2");
    if (d <= 2)
        return {d, 1.0, 0.0, ReturnProbEstimate::Method::ExactRecurrent};

    int nthreads = threads > 0 ? threads
                               : static_cast<int>(std::thread::hardware_concurrency());
    if (nthreads < 1) nthreads = 1;
    std::atomic<long> next_block{0};
    const long block = 4096;
    std::vector<long> hits(static_cast<size_t>(nthreads), 0);
    auto worker = [&](int tid) {
        long local = 0;
        std::vector<int32_t> pos(static_cast<size_t>(d));
        for (;;) {
            long b = next_block.fetch_add(1);
            long lo = b * block, hi = std::min(walks, lo + block);
            if (lo >= walks) break;
            for (long w = lo; w < hi; ++w) {
                Xoshiro256pp rng(prf_hash(seed, {0x6dc0u, static_cast<uint64_t>(w)}));
                std::fill(pos.begin(), pos.end(), 0);
                for (long t = 1; t <= horizon; ++t) {
                    uint64_t dir = rng.below(static_cast<uint64_t>(2 * d));
                    size_t axis = static_cast<size_t>(dir >> 1);
                    pos[axis] += (dir & 1) ? 1 : -1;
                    if ((t & 1) == 0) {
                        bool zero = true;
                        for (int i = 0; i < d; ++i)
                            if (pos[static_cast<size_t>(i)] != 0) { zero = false; break; }
                        if (zero) {
                            ++local;
                            break;
                        }
                    }
                }
            }
        }
        hits[static_cast<size_t>(tid)] = local;
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& th : pool) th.join();
    long total = 0;
    for (long h : hits) total += h;

    double frac = static_cast<double>(total) / static_cast<double>(walks);
    // Returns later than the horizon: P(first return > L) ~ (1-pi)^2 sum_{t>L} p_t.
    double tail = return_series_tail(d, horizon);
    double corr = (1.0 - frac) * (1.0 - frac) * tail;
    double value = frac + corr;
    double se = std::sqrt(std::max(value * (1.0 - value), 1e-12) /
                          static_cast<double>(walks));
    return {d, value, 3.0 * se + 0.5 * corr, ReturnProbEstimate::Method::MonteCarlo};
}

Rational gaussian_moment(std::span<const int> n, int d) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    Rational prod(1);
    for (int ni : n) {
        if (ni < 0) throw DomainError("moment order must be >= 0");
        if (ni % 2 == 1) return Rational(0);
        int k = ni / 2;
        Rational coord(1);
        for (int j = 1; j <= k; ++j)
            coord *= Rational(2LL * j - 1, d);  // (2k-1)!! / d^k
        prod *= coord;
    }
    return prod;
}

}  // namespace brwre
