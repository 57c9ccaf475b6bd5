#include "brwre/stats.hpp"

#include "brwre/sim.hpp"

namespace brwre {

DensityStats density_stats(const OccupancyState& s) {
    DensityStats out;
    uint64_t n = s.total();
    if (n == 0) return out;  // extinct: all densities identically zero
    out.alive = true;
    const double nd = static_cast<double>(n);
    uint64_t max_count = 0;
    double sum_sq = 0.0;
    for (const auto& [x, c] : s.counts) {
        out.rho[x] = static_cast<double>(c) / nd;
        max_count = std::max(max_count, c);
        sum_sq += static_cast<double>(c) * static_cast<double>(c);
    }
    out.rho_star = static_cast<double>(max_count) / nd;
    out.r_overlap = sum_sq / (nd * nd);
    return out;
}

double clt_moment(const OccupancyState& s, const std::vector<int>& n, double m) {
    if (static_cast<int>(n.size()) != s.d)
        throw DomainError("multi-index length must equal dimension");
    StatBasis basis;
    basis.d = s.d;
    basis.log_m = std::log(m);
    basis.moment_indices = {n};
    StatRecord rec = compute_record_view(
        s.t,
        [&](auto&& fn) {
            for (const auto& [x, c] : s.counts) fn(x.data(), c);
        },
        basis);
    return rec.moments[0];
}

double y_statistic(const OccupancyState& s, const PolynomialWn& poly, double m) {
    if (poly.d != s.d) throw DomainError("polynomial dimension mismatch");
    StatBasis basis;
    basis.d = s.d;
    basis.log_m = std::log(m);
    basis.y_polys.push_back(WnEval::from(poly));
    StatRecord rec = compute_record_view(
        s.t,
        [&](auto&& fn) {
            for (const auto& [x, c] : s.counts) fn(x.data(), c);
        },
        basis);
    return rec.y_stats[0];
}

}  // namespace brwre
