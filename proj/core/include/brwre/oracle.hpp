#pragma once
#include <cstdint>
#include <map>
#include <vector>

#include "brwre/env.hpp"
#include "brwre/rational.hpp"
#include "brwre/sim.hpp"

namespace brwre {

// Quenched mean transfer: Ebar_{t+1}(y) = sum_{|y-x|=1} Ebar_t(x) m_{t,x} / (2d m)
// on the normalized field Ebar_t(x) = E^q[Nbar_{t,x}]. zbar_t is the quenched
// partition function E^q[Nbar_t].
struct QuenchedMeanField {
    int d = 1;
    long horizon = 0;
    std::vector<std::map<Site, double>> per_time;  // index t
    std::vector<double> zbar;
};

QuenchedMeanField quenched_mean(const EnvironmentField& field, int d, long horizon);

// Annealed two-walk series from the difference-walk dynamic program.
//   u[t]             post-split weight E[alpha^{#departures from 0 in [0,t-1]}]
//   second_moment[t] E[(Nbar_t)^2] = m^-t + c sum_k m^-(k-1) u[t-k]
//   overlap[t]       E[sum_x Nbar_{t,x}^2], same sum against mass at the origin
struct TwoWalkSeries {
    long horizon = 0;
    std::vector<double> u;
    std::vector<double> second_moment;
    std::vector<double> overlap;
    double alpha = 0, c = 0, m = 0;
    double truncated_mass = 0;  // probability mass dropped at the radius cap
    long radius_used = 0;
};

TwoWalkSeries two_walk_series(const EnvironmentModel& model, int d, long horizon,
                              long radius_cap = 160, double truncation_tol = 1e-12);

// Pathwise check of the Feynman-Kac representation
// N_{T,y}^{label} = m^T E_S^0[zeta_T ; S_T = (y, label)]
// against a genealogy run, replaying the same PRF-keyed fields along every
// positive-kernel chain path. Returns max absolute error over labelled
// endpoints and over spatial aggregates.
struct ZetaCheckResult {
    double max_error = 0.0;
    double max_error_aggregated = 0.0;
    uint64_t paths = 0;
};

ZetaCheckResult verify_zeta_identity(const EnvironmentField& field, uint64_t particle_seed,
                                     int d, long horizon, uint64_t path_cap = 10000000);

// Exact annealed moments of the total population for T <= 2 by full
// enumeration over atoms, offspring draws and the shared site pmf.
struct BruteForceMoments {
    Rational mean;
    Rational second;
};

BruteForceMoments brute_force_moments(const EnvironmentModel& model, int d, long horizon,
                                      uint64_t enumeration_cap = 1000000);

}  // namespace brwre
