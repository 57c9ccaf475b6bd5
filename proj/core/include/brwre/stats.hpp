#pragma once
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "brwre/kernels.hpp"

namespace brwre {

// Flattened W_n with double coefficients for weighted lattice sums.
struct WnEval {
    std::vector<int> n;
    int d = 1;
    struct Term {
        std::vector<int> xe;
        int te = 0;
        double c = 0.0;
    };
    std::vector<Term> terms;

    static WnEval from(const PolynomialWn& p) {
        WnEval w;
        w.n = p.n;
        w.d = p.d;
        for (const auto& [k, v] : p.coeffs)
            w.terms.push_back({k.first, k.second, v.to_double()});
        return w;
    }

    double eval(double t, const int32_t* x) const {
        double acc = 0.0;
        for (const auto& term : terms) {
            double v = term.c;
            for (int i = 0; i < d; ++i) {
                double xi = static_cast<double>(x[i]);
                for (int e = 0; e < term.xe[static_cast<size_t>(i)]; ++e) v *= xi;
            }
            for (int e = 0; e < term.te; ++e) v *= t;
            acc += v;
        }
        return acc;
    }
};

// Derived observables of one state at one time.
struct StatRecord {
    long t = 0;
    uint64_t n_total = 0;
    double nbar = 0.0;      // N_t / m^t
    double rho_star = 0.0;  // max site density
    double r_overlap = 0.0; // R_t = sum_x rho_t(x)^2
    std::vector<double> moments;  // sum_x (x/sqrt(t))^n Nbar_{t,x}, per basis index
    std::vector<double> y_stats;  // Y_n(t) = sum_x W_n(t,x) Nbar_{t,x}
    bool alive = false;
};

// Prepared once per run: normalization and the requested functionals.
struct StatBasis {
    int d = 1;
    double log_m = 0.0;
    std::vector<std::vector<int>> moment_indices;
    std::vector<WnEval> y_polys;
};

// One pass over occupied sites. ForEach must invoke fn(const int32_t* x, uint64_t c)
// for every occupied site.
template <typename ForEach>
StatRecord compute_record_view(long t, const ForEach& for_each, const StatBasis& basis) {
    StatRecord rec;
    rec.t = t;
    rec.moments.assign(basis.moment_indices.size(), 0.0);
    rec.y_stats.assign(basis.y_polys.size(), 0.0);

    uint64_t n_total = 0;
    double sum_sq = 0.0;
    uint64_t max_count = 0;
    const double sqrt_t = t > 0 ? std::sqrt(static_cast<double>(t)) : 1.0;
    const size_t nm = basis.moment_indices.size();
    const size_t ny = basis.y_polys.size();

    for_each([&](const int32_t* x, uint64_t c) {
        n_total += c;
        const double cd = static_cast<double>(c);
        sum_sq += cd * cd;
        if (c > max_count) max_count = c;
        for (size_t i = 0; i < nm; ++i) {
            double v = cd;
            const auto& n = basis.moment_indices[i];
            for (int ax = 0; ax < basis.d; ++ax) {
                double z = static_cast<double>(x[ax]) / sqrt_t;
                for (int e = 0; e < n[static_cast<size_t>(ax)]; ++e) v *= z;
            }
            rec.moments[i] += v;
        }
        for (size_t i = 0; i < ny; ++i)
            rec.y_stats[i] += cd * basis.y_polys[i].eval(static_cast<double>(t), x);
    });

    rec.n_total = n_total;
    rec.alive = n_total > 0;
    const double inv_mt = std::exp(-static_cast<double>(t) * basis.log_m);
    rec.nbar = static_cast<double>(n_total) * inv_mt;
    if (rec.alive) {
        const double nd = static_cast<double>(n_total);
        rec.rho_star = static_cast<double>(max_count) / nd;
        rec.r_overlap = sum_sq / (nd * nd);
    }
    for (auto& v : rec.moments) v *= inv_mt;
    for (auto& v : rec.y_stats) v *= inv_mt;
    return rec;
}

struct DensityStats {
    std::map<std::vector<int32_t>, double> rho;
    double rho_star = 0.0;
    double r_overlap = 0.0;
    bool alive = false;
};

struct OccupancyState;  // sim.hpp

DensityStats density_stats(const OccupancyState& s);
double clt_moment(const OccupancyState& s, const std::vector<int>& n, double m);
double y_statistic(const OccupancyState& s, const PolynomialWn& poly, double m);

}  // namespace brwre
