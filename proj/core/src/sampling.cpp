#include "brwre/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace brwre {

namespace {

// 128-strip ziggurat for the standard normal (Doornik's ZIGNOR layout).
struct ZigguratTables {
    static constexpr int kStrips = 128;
    static constexpr double kR = 3.442619855899;
    double x[kStrips + 1];
    double ratio[kStrips];  // x[i+1] / x[i]
    double f[kStrips + 1];  // exp(-x[i]^2 / 2)

    ZigguratTables() {
        constexpr double kV = 9.91256303526217e-3;
        double fr = std::exp(-0.5 * kR * kR);
        x[0] = kV / fr;
        x[1] = kR;
        x[kStrips] = 0.0;
        for (int i = 2; i < kStrips; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] +
                                             std::exp(-0.5 * x[i - 1] * x[i - 1])));
        }
        for (int i = 0; i <= kStrips; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
        for (int i = 0; i < kStrips; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

const ZigguratTables& zig() {
    static const ZigguratTables tables;
    return tables;
}

double u01_positive(Xoshiro256pp& rng) {
    return u01_from_bits(rng()) + 0x1.0p-54;  // (0,1) so logs stay finite
}

}  // namespace

double draw_normal(Xoshiro256pp& rng) {
    const ZigguratTables& t = zig();
    for (;;) {
        const uint64_t bits = rng();
        const int i = static_cast<int>(bits & 127);
        // signed uniform in (-1,1) from the remaining bits
        const int64_t mant = static_cast<int64_t>(bits >> 7) - (1LL << 56);
        const double u = static_cast<double>(mant) * 0x1.0p-56;
        if (std::fabs(u) < t.ratio[i]) return u * t.x[i];
        if (i == 0) {
            // tail beyond R
            double xx, yy;
            do {
                xx = std::log(u01_positive(rng)) / ZigguratTables::kR;
                yy = std::log(u01_positive(rng));
            } while (-2.0 * yy < xx * xx);
            return u < 0.0 ? xx - ZigguratTables::kR : ZigguratTables::kR - xx;
        }
        const double val = u * t.x[i];
        const double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - val * val));
        const double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - val * val));
        if (f1 + rng.u01() * (f0 - f1) < 1.0) return val;
    }
}

namespace {

uint64_t binomial_inversion(Xoshiro256pp& rng, uint64_t n, double p) {
    // CDF walk; only used when n*p is small, so q^n stays representable.
    double q = 1.0 - p;
    double f = std::exp(static_cast<double>(n) * std::log1p(-p));
    double u = rng.u01();
    uint64_t k = 0;
    double cdf = f;
    while (u > cdf && k < n) {
        f *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) * (p / q);
        ++k;
        cdf += f;
        if (f <= 0.0) break;  // numeric tail exhausted
    }
    return k;
}

double stirling_correction(uint64_t k) {
    // fc(k) = ln(k!) - [k ln k - k + 0.5 ln(2 pi k)]
    static const double table[10] = {
        0.08106146679532726, 0.04134069595540929, 0.02767792568499834,
        0.02079067210376509, 0.01664469118982119, 0.01387612882307075,
        0.01189670994589177, 0.01041126526197209, 0.009255462182712733,
        0.008330563433362871};
    if (k < 10) return table[k];
    double kk = static_cast<double>(k) + 1.0;
    double r = 1.0 / kk;
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0) * r * r) * r * r) * r;
}

// BTRS transformed-rejection binomial sampler (Hormann 1993), exact.
// Requires n*min(p,1-p) >= 10.
uint64_t binomial_btrs(Xoshiro256pp& rng, uint64_t n, double p) {
    const double nd = static_cast<double>(n);
    const double q = 1.0 - p;
    const double npq = nd * p * q;
    const double spq = std::sqrt(npq);
    const double b = 1.15 + 2.53 * spq;
    const double a = -0.0873 + 0.0248 * b + 0.01 * p;
    const double c = nd * p + 0.5;
    const double v_r = 0.92 - 4.2 / b;
    const double alpha = (2.83 + 5.1 / b) * spq;
    const double r = p / q;
    const uint64_t m = static_cast<uint64_t>(std::floor((nd + 1.0) * p));
    const double md = static_cast<double>(m);

    for (;;) {
        double u = rng.u01() - 0.5;
        double v = rng.u01();
        double us = 0.5 - std::fabs(u);
        double kd = std::floor((2.0 * a / us + b) * u + c);
        if (kd < 0.0 || kd > nd) continue;
        uint64_t k = static_cast<uint64_t>(kd);
        if (us >= 0.07 && v <= v_r) return k;
        v = std::log(v * alpha / (a / (us * us) + b));
        double upper = (md + 0.5) * std::log((md + 1.0) / (r * (nd - md + 1.0))) +
                       (nd + 1.0) * std::log((nd - md + 1.0) / (nd - kd + 1.0)) +
                       (kd + 0.5) * std::log(r * (nd - kd + 1.0) / (kd + 1.0)) +
                       stirling_correction(m) + stirling_correction(n - m) -
                       stirling_correction(k) - stirling_correction(n - k);
        if (v <= upper) return k;
    }
}

}  // namespace

uint64_t draw_binomial(Xoshiro256pp& rng, uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    bool flip = p > 0.5;
    double pe = flip ? 1.0 - p : p;
    double mean = static_cast<double>(n) * pe;
    uint64_t k = (mean < 30.0) ? binomial_inversion(rng, n, pe)
                               : binomial_btrs(rng, n, pe);
    return flip ? n - k : k;
}

uint64_t draw_binomial_gaussian(Xoshiro256pp& rng, uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    double nd = static_cast<double>(n);
    double mu = nd * p;
    double sigma = std::sqrt(nd * p * (1.0 - p));
    double x = std::round(mu + sigma * draw_normal(rng));
    if (x < 0.0) return 0;
    if (x >= nd) return n;
    return static_cast<uint64_t>(x);
}

void draw_multinomial(Xoshiro256pp& rng, uint64_t n, std::span<const double> probs,
                      std::span<uint64_t> out, uint64_t gaussian_min,
                      bool* used_gaussian) {
    uint64_t rem = n;
    double mass = 0.0;
    for (double p : probs) mass += p;
    const size_t k = probs.size();
    for (size_t i = 0; i < k; ++i) {
        if (rem == 0) {
            out[i] = 0;
            continue;
        }
        if (i + 1 == k) {
            out[i] = rem;
            break;
        }
        double cond = (mass > 0.0) ? probs[i] / mass : 0.0;
        cond = std::clamp(cond, 0.0, 1.0);
        uint64_t c;
        if (rem >= gaussian_min) {
            c = draw_binomial_gaussian(rng, rem, cond);
            if (used_gaussian) *used_gaussian = true;
        } else {
            c = draw_binomial(rng, rem, cond);
        }
        out[i] = c;
        rem -= c;
        mass -= probs[i];
    }
}

}  // namespace brwre
