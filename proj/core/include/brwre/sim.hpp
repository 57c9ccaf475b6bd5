#pragma once
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "brwre/env.hpp"
#include "brwre/errors.hpp"
#include "brwre/rng.hpp"
#include "brwre/stats.hpp"

namespace brwre {

using Site = std::vector<int32_t>;

// Aggregate representation of N_{t,x}: sparse site -> particle count.
struct OccupancyState {
    int d = 1;
    long t = 0;
    std::map<Site, uint64_t> counts;

    uint64_t total() const;
    // occupied sites must satisfy |x|_1 <= t, |x|_1 == t (mod 2), count > 0
    void validate() const;
};

// Explicit particle list with genealogical labels (child-index sequences).
struct GenealogyParticle {
    std::vector<uint32_t> label;  // child indices from the root; root is empty
    uint64_t label_hash = 0;
    Site pos;
};

struct GenealogyState {
    int d = 1;
    long t = 0;
    std::vector<GenealogyParticle> particles;
};

OccupancyState init_occupancy(int d);
GenealogyState init_genealogy(int d);
OccupancyState aggregate(const GenealogyState& g);

// --- replayable per-particle randomness -----------------------------------
// Genealogy-mode draws are a pure function of (seed, t, x, label), so the
// zeta-identity enumerator can query the same field the simulator saw.

inline uint64_t root_label_hash() { return splitmix64(0x5b11d73c290fb2ceULL); }

inline uint64_t child_label_hash(uint64_t parent_hash, uint32_t child_index) {
    return splitmix64(parent_hash + 0x9e3779b97f4a7c15ULL * (child_index + 1));
}

inline uint64_t particle_field_key(uint64_t seed, uint64_t salt, long t,
                                   std::span<const int32_t> x, uint64_t label_hash) {
    uint64_t h = splitmix64(seed ^ salt);
    h = splitmix64(h ^ (static_cast<uint64_t>(t) + 0x9e3779b97f4a7c15ULL));
    for (int32_t c : x)
        h = splitmix64(h ^ (static_cast<uint64_t>(static_cast<int64_t>(c)) +
                            0x9e3779b97f4a7c15ULL));
    return splitmix64(h ^ label_hash);
}

inline constexpr uint64_t kSaltDirection = 0x8f1bbcdcbfa53e0aULL;
inline constexpr uint64_t kSaltChildren = 0x2b7e151628aed2a6ULL;

inline int genealogy_direction(uint64_t seed, long t, std::span<const int32_t> x,
                               uint64_t label_hash, int d) {
    uint64_t h = particle_field_key(seed, kSaltDirection, t, x, label_hash);
    return static_cast<int>((static_cast<unsigned __int128>(h) *
                             static_cast<unsigned __int128>(2 * d)) >> 64);
}

inline int quantile_from_cdf(std::span<const double> cdf, double u) {
    for (size_t k = 0; k + 1 < cdf.size(); ++k)
        if (u < cdf[k]) return static_cast<int>(k);
    return static_cast<int>(cdf.size()) - 1;
}

inline int genealogy_child_count(uint64_t seed, long t, std::span<const int32_t> x,
                                 uint64_t label_hash, std::span<const double> cdf) {
    uint64_t h = particle_field_key(seed, kSaltChildren, t, x, label_hash);
    return quantile_from_cdf(cdf, u01_from_bits(h));
}

// --- one step of the recursion ---------------------------------------------

// Realized randomness of one step, separated from the pure state mechanics so
// tests can force draws and enumerate outcome distributions.
struct StepDraws {
    struct ParticleDraw {
        int direction = 0;       // index into 2d unit displacements
        uint32_t children = 0;
        int atom = -1;
    };
    std::vector<ParticleDraw> particle;  // genealogy mode, particle order

    struct SiteDraw {
        Site x;
        int atom = -1;
        std::vector<uint64_t> dir_counts;                 // size 2d
        std::vector<std::vector<uint64_t>> value_counts;  // [dir][child count]
    };
    std::vector<SiteDraw> sites;  // aggregate mode, site order
};

// displacement of direction index i: axis i/2, sign +1 for even i
inline void apply_direction(Site& x, int dir) {
    x[static_cast<size_t>(dir >> 1)] += (dir & 1) ? -1 : 1;
}

enum class SimMode { Aggregate, Genealogy };

struct Thresholds {
    uint64_t per_particle_max = 32;           // sites at most this count sample per particle
    uint64_t gaussian_multinomial_min = 1000000;  // counts >= this approximate
    uint64_t genealogy_cap = 100000;
    long dp_radius_cap = 160;
    double dp_truncation_tol = 1e-12;
    size_t slab_cell_cap = 300000000;
};

struct RunConfig {
    int d = 3;
    long horizon = 0;
    EnvironmentModel env;
    std::string env_name;
    uint64_t env_seed = 1;
    uint64_t particle_seed = 2;
    SimMode mode = SimMode::Aggregate;
    std::vector<std::vector<int>> moment_indices;
    std::vector<std::vector<int>> y_indices;
    std::vector<long> record_times;  // empty = record every step
    Thresholds thresholds;

    void validate() const;
    std::vector<long> resolved_record_times() const;
};

StepDraws genealogy_draw_step(const GenealogyState& s, const EnvironmentField& field,
                              uint64_t particle_seed);
GenealogyState genealogy_apply_step(const GenealogyState& s, const StepDraws& draws,
                                    uint64_t cap);
GenealogyState genealogy_step(const GenealogyState& s, const EnvironmentField& field,
                              uint64_t particle_seed, uint64_t cap,
                              StepDraws* record = nullptr);

// Aggregate-mode step on the sparse state. Sampling runs through the same
// tiered multinomial machinery as the trajectory engine.
OccupancyState occupancy_step(const OccupancyState& s, const EnvironmentField& field,
                              Xoshiro256pp& rng, const Thresholds& thr,
                              bool* used_gaussian = nullptr,
                              StepDraws* record = nullptr);

// Pure mechanics: fold recorded/forced draws into the next state.
OccupancyState apply_aggregate_step(const OccupancyState& s, const StepDraws& draws);

enum class RunStatus { Alive, Extinct };

struct TrajectoryResult {
    std::vector<StatRecord> records;
    RunStatus status = RunStatus::Alive;
    long final_t = 0;
    bool approx_sampling = false;
};

TrajectoryResult run_trajectory(const RunConfig& cfg);

struct SeriesStats {
    std::vector<double> mean, se, median;
    std::vector<double> mean_surv, se_surv, median_surv, median_abs_surv;
};

struct EnsembleSummary {
    std::vector<long> times;
    long replicas = 0;
    long failed = 0;
    std::vector<long> survivors;           // per time
    std::vector<std::string> stat_names;   // nbar, nbar2, rho_star, R, mom_*, rhomom_*, y_*
    std::vector<SeriesStats> stats;
    bool approx_sampling = false;
    bool keep_replica_values = false;
    // [stat][time * replicas + replica], only if keep_replica_values
    std::vector<std::vector<double>> replica_values;
};

// Independent (environment, particle) seed pair per replica; reduction is by
// replica index, so results do not depend on the thread count.
EnsembleSummary run_ensemble(const RunConfig& cfg, long replicas, int threads = 0,
                             bool keep_replica_values = false);

std::string stat_suffix(const std::vector<int>& n);  // "2_0_0"

}  // namespace brwre
