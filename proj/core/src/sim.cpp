#include "brwre/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <thread>

#include "brwre/sampling.hpp"

namespace brwre {

namespace {

inline constexpr uint64_t kSaltEnsembleEnv = 0x452821e638d01377ULL;
inline constexpr uint64_t kSaltEnsembleParticle = 0xbe5466cf34e90c6cULL;

uint64_t checked_add(uint64_t a, uint64_t b) {
    uint64_t r;
    if (__builtin_add_overflow(a, b, &r))
        throw OverflowError("particle count exceeds 64-bit range");
    return r;
}

uint64_t checked_mul(uint64_t a, uint64_t b) {
    uint64_t r;
    if (__builtin_mul_overflow(a, b, &r))
        throw OverflowError("particle count exceeds 64-bit range");
    return r;
}

}  // namespace

uint64_t OccupancyState::total() const {
    uint64_t n = 0;
    for (const auto& [x, c] : counts) n = checked_add(n, c);
    return n;
}

void OccupancyState::validate() const {
    for (const auto& [x, c] : counts) {
        if (c == 0) throw NumericError("occupancy state stores a zero count");
        if (static_cast<int>(x.size()) != d)
            throw NumericError("occupancy site has wrong dimension");
        long l1 = 0;
        for (int32_t v : x) l1 += std::abs(static_cast<long>(v));
        if (l1 > t || ((l1 ^ t) & 1))
            throw NumericError("occupied site violates parity/range invariant");
    }
}

OccupancyState init_occupancy(int d) {
    if (d < 1) throw ConfigError("dimension must be >= 1");
    OccupancyState s;
    s.d = d;
    s.t = 0;
    s.counts[Site(static_cast<size_t>(d), 0)] = 1;
    return s;
}

GenealogyState init_genealogy(int d) {
    if (d < 1) throw ConfigError("dimension must be >= 1");
    GenealogyState s;
    s.d = d;
    s.t = 0;
    GenealogyParticle root;
    root.label_hash = root_label_hash();
    root.pos.assign(static_cast<size_t>(d), 0);
    s.particles.push_back(std::move(root));
    return s;
}

OccupancyState aggregate(const GenealogyState& g) {
    OccupancyState s;
    s.d = g.d;
    s.t = g.t;
    for (const auto& p : g.particles) {
        uint64_t& slot = s.counts[p.pos];
        slot = checked_add(slot, 1);
    }
    return s;
}

// ---------------------------------------------------------------------------
// genealogy mode
// ---------------------------------------------------------------------------

StepDraws genealogy_draw_step(const GenealogyState& s, const EnvironmentField& field,
                              uint64_t particle_seed) {
    StepDraws draws;
    draws.particle.reserve(s.particles.size());
    for (const auto& p : s.particles) {
        int atom = field.atom_at(s.t, p.pos);
        const auto& cdf = field.model.atom_cdf[static_cast<size_t>(atom)];
        StepDraws::ParticleDraw d;
        d.direction = genealogy_direction(particle_seed, s.t, p.pos, p.label_hash, s.d);
        d.children = static_cast<uint32_t>(
            genealogy_child_count(particle_seed, s.t, p.pos, p.label_hash, cdf));
        d.atom = atom;
        draws.particle.push_back(d);
    }
    return draws;
}

GenealogyState genealogy_apply_step(const GenealogyState& s, const StepDraws& draws,
                                    uint64_t cap) {
    if (draws.particle.size() != s.particles.size())
        throw ConfigError("step draws do not match the particle list");
    uint64_t births = 0;
    for (const auto& d : draws.particle) births += d.children;
    if (births > cap)
        throw CapError("genealogy population cap exceeded at t=" + std::to_string(s.t + 1));

    GenealogyState next;
    next.d = s.d;
    next.t = s.t + 1;
    next.particles.reserve(births);
    for (size_t i = 0; i < s.particles.size(); ++i) {
        const auto& parent = s.particles[i];
        const auto& d = draws.particle[i];
        Site dest = parent.pos;
        apply_direction(dest, d.direction);
        for (uint32_t k = 1; k <= d.children; ++k) {
            GenealogyParticle child;
            child.label = parent.label;
            child.label.push_back(k);
            child.label_hash = child_label_hash(parent.label_hash, k);
            child.pos = dest;
            next.particles.push_back(std::move(child));
        }
    }
    return next;
}

GenealogyState genealogy_step(const GenealogyState& s, const EnvironmentField& field,
                              uint64_t particle_seed, uint64_t cap, StepDraws* record) {
    StepDraws draws = genealogy_draw_step(s, field, particle_seed);
    GenealogyState next = genealogy_apply_step(s, draws, cap);
    if (record) *record = std::move(draws);
    return next;
}

// ---------------------------------------------------------------------------
// aggregate mode: tiered per-site branching sampler
// ---------------------------------------------------------------------------

namespace {

struct SiteScratch {
    std::vector<double> uniform_dir;                  // 2d entries of 1/(2d)
    std::vector<uint64_t> dir_counts;                 // 2d
    std::vector<uint64_t> children;                   // 2d
    std::vector<std::vector<uint64_t>> value_counts;  // [2d][k_max+1]

    void init(int d, int k_max) {
        uniform_dir.assign(static_cast<size_t>(2 * d),
                           1.0 / static_cast<double>(2 * d));
        dir_counts.assign(static_cast<size_t>(2 * d), 0);
        children.assign(static_cast<size_t>(2 * d), 0);
        value_counts.assign(static_cast<size_t>(2 * d),
                            std::vector<uint64_t>(static_cast<size_t>(k_max) + 1, 0));
    }
};

// One site's step: direction multinomial over the 2d neighbors, then the
// shared-pmf offspring multinomial per direction group. Children of one
// parent all land on the parent's destination.
void sample_site_branching(const EnvironmentModel& model, int d, uint64_t n, int atom,
                           Xoshiro256pp& rng, const Thresholds& thr,
                           bool& used_gaussian, bool want_values, SiteScratch& sc) {
    const size_t dirs = static_cast<size_t>(2 * d);
    const int single = model.atom_single_value[static_cast<size_t>(atom)];
    const auto& cdf = model.atom_cdf[static_cast<size_t>(atom)];
    const auto& probs = model.atom_probs[static_cast<size_t>(atom)];
    std::fill(sc.children.begin(), sc.children.end(), 0);
    const bool track_values = want_values || single < 0;
    if (track_values)
        for (auto& row : sc.value_counts) std::fill(row.begin(), row.end(), 0);

    if (n <= thr.per_particle_max) {
        std::fill(sc.dir_counts.begin(), sc.dir_counts.end(), 0);
        for (uint64_t i = 0; i < n; ++i) {
            size_t dir = static_cast<size_t>(rng.below(dirs));
            int k = single >= 0 ? single : quantile_from_cdf(cdf, rng.u01());
            sc.dir_counts[dir] += 1;
            sc.children[dir] = checked_add(sc.children[dir], static_cast<uint64_t>(k));
            if (track_values) sc.value_counts[dir][static_cast<size_t>(k)] += 1;
        }
        return;
    }

    draw_multinomial(rng, n, sc.uniform_dir, sc.dir_counts,
                     thr.gaussian_multinomial_min, &used_gaussian);
    for (size_t dir = 0; dir < dirs; ++dir) {
        uint64_t ne = sc.dir_counts[dir];
        if (ne == 0) continue;
        if (single >= 0) {
            sc.children[dir] = checked_mul(ne, static_cast<uint64_t>(single));
            if (track_values) sc.value_counts[dir][static_cast<size_t>(single)] = ne;
        } else {
            draw_multinomial(rng, ne, probs, sc.value_counts[dir],
                             thr.gaussian_multinomial_min, &used_gaussian);
            uint64_t kids = 0;
            for (size_t k = 1; k < sc.value_counts[dir].size(); ++k)
                kids = checked_add(
                    kids, checked_mul(sc.value_counts[dir][k], static_cast<uint64_t>(k)));
            sc.children[dir] = kids;
        }
    }
}

// Dense ping-pong array over the occupied bounding box, plus a first-touch
// list of occupied cells so steps cost O(occupied), not O(box volume).
struct Slab {
    int d = 1;
    long t = 0;
    std::vector<int32_t> lo, hi;          // allocated bounds, inclusive
    std::vector<int32_t> occ_lo, occ_hi;  // occupied bounds
    std::vector<size_t> stride;
    std::vector<uint64_t> cells;
    std::vector<size_t> occupied_idx;
    std::vector<int32_t> occupied_coord;  // d entries per occupied cell
    uint64_t total = 0;

    // The cell arena is grow-only and kept all-zero between uses
    // (clear_dirty() zeroes exactly the touched cells), so reshaping the
    // logical box costs O(growth), not O(volume) per step.
    void allocate(const std::vector<int32_t>& new_lo, const std::vector<int32_t>& new_hi,
                  size_t cell_cap) {
        lo = new_lo;
        hi = new_hi;
        stride.assign(lo.size(), 1);
        // row-major with axis 0 slowest
        size_t acc = 1;
        for (int i = d - 1; i >= 0; --i) {
            auto si = static_cast<size_t>(i);
            stride[si] = acc;
            size_t span = static_cast<size_t>(hi[si] - lo[si] + 1);
            if (acc > cell_cap / span)
                throw ConfigError("occupied box too large for the dense state array");
            acc *= span;
        }
        if (cells.size() < acc) cells.resize(acc, 0);
        occupied_idx.clear();
        occupied_coord.clear();
        total = 0;
        occ_lo.assign(static_cast<size_t>(d), std::numeric_limits<int32_t>::max());
        occ_hi.assign(static_cast<size_t>(d), std::numeric_limits<int32_t>::min());
    }

    void clear_dirty() {
        for (size_t idx : occupied_idx) cells[idx] = 0;
        occupied_idx.clear();
        occupied_coord.clear();
        total = 0;
    }

    size_t index(const int32_t* x) const {
        size_t idx = 0;
        for (int i = 0; i < d; ++i)
            idx += static_cast<size_t>(x[i] - lo[static_cast<size_t>(i)]) *
                   stride[static_cast<size_t>(i)];
        return idx;
    }

    void deposit(const int32_t* x, size_t idx, uint64_t c) {
        uint64_t& slot = cells[idx];
        if (slot == 0) {
            for (int i = 0; i < d; ++i) {
                auto si = static_cast<size_t>(i);
                occ_lo[si] = std::min(occ_lo[si], x[i]);
                occ_hi[si] = std::max(occ_hi[si], x[i]);
            }
            occupied_idx.push_back(idx);
            occupied_coord.insert(occupied_coord.end(), x, x + d);
        }
        slot = checked_add(slot, c);
    }

    void add_total(uint64_t c) { total = checked_add(total, c); }

    // deposit order; deterministic for fixed seeds
    template <typename Fn>
    void for_each_occupied(Fn&& fn) const {
        for (size_t i = 0; i < occupied_idx.size(); ++i)
            fn(&occupied_coord[i * static_cast<size_t>(d)], cells[occupied_idx[i]]);
    }

    static Slab from_state(const OccupancyState& s, size_t cell_cap) {
        Slab slab;
        slab.d = s.d;
        slab.t = s.t;
        std::vector<int32_t> lo(static_cast<size_t>(s.d), 0), hi(static_cast<size_t>(s.d), 0);
        if (!s.counts.empty()) {
            lo.assign(static_cast<size_t>(s.d), std::numeric_limits<int32_t>::max());
            hi.assign(static_cast<size_t>(s.d), std::numeric_limits<int32_t>::min());
            for (const auto& [x, c] : s.counts)
                for (int i = 0; i < s.d; ++i) {
                    auto si = static_cast<size_t>(i);
                    lo[si] = std::min(lo[si], x[si]);
                    hi[si] = std::max(hi[si], x[si]);
                }
        }
        slab.allocate(lo, hi, cell_cap);
        for (const auto& [x, c] : s.counts) {
            slab.deposit(x.data(), slab.index(x.data()), c);
            slab.add_total(c);
        }
        return slab;
    }

    OccupancyState to_state() const {
        OccupancyState s;
        s.d = d;
        s.t = t;
        for_each_occupied([&](const int32_t* x, uint64_t c) {
            s.counts[Site(x, x + d)] = c;
        });
        return s;
    }
};

void step_slab(const Slab& cur, Slab& next, const EnvironmentField& field,
               Xoshiro256pp& rng, const Thresholds& thr, bool& used_gaussian,
               SiteScratch& sc, StepDraws* record) {
    const int d = cur.d;
    next.d = d;
    next.t = cur.t + 1;
    std::vector<int32_t> lo(static_cast<size_t>(d)), hi(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        lo[static_cast<size_t>(i)] = cur.occ_lo[static_cast<size_t>(i)] - 1;
        hi[static_cast<size_t>(i)] = cur.occ_hi[static_cast<size_t>(i)] + 1;
    }
    next.allocate(lo, hi, thr.slab_cell_cap);

    const bool want_values = record != nullptr;
    std::vector<int32_t> dest(static_cast<size_t>(d));
    cur.for_each_occupied([&](const int32_t* x, uint64_t n) {
        int atom = field.atom_at(cur.t, std::span<const int32_t>(x, static_cast<size_t>(d)));
        sample_site_branching(field.model, d, n, atom, rng, thr, used_gaussian,
                              want_values, sc);
        size_t base = next.index(x);
        unsigned __int128 site_births = 0;
        for (int dir = 0; dir < 2 * d; ++dir) {
            uint64_t c = sc.children[static_cast<size_t>(dir)];
            if (c == 0) continue;
            std::memcpy(dest.data(), x, sizeof(int32_t) * static_cast<size_t>(d));
            apply_direction(dest, dir);
            size_t axis = static_cast<size_t>(dir >> 1);
            size_t idx = (dir & 1) ? base - next.stride[axis] : base + next.stride[axis];
            next.deposit(dest.data(), idx, c);
            site_births += c;
        }
        if (site_births > UINT64_MAX)
            throw OverflowError("particle count exceeds 64-bit range");
        next.add_total(static_cast<uint64_t>(site_births));
        if (record) {
            StepDraws::SiteDraw sd;
            sd.x.assign(x, x + d);
            sd.atom = atom;
            sd.dir_counts = sc.dir_counts;
            sd.value_counts = sc.value_counts;
            record->sites.push_back(std::move(sd));
        }
    });
}

}  // namespace

OccupancyState occupancy_step(const OccupancyState& s, const EnvironmentField& field,
                              Xoshiro256pp& rng, const Thresholds& thr,
                              bool* used_gaussian, StepDraws* record) {
    bool gauss = false;
    SiteScratch sc;
    sc.init(s.d, field.model.k_max);
    OccupancyState next;
    next.d = s.d;
    next.t = s.t + 1;
    const bool want_values = record != nullptr;
    for (const auto& [x, n] : s.counts) {
        int atom = field.atom_at(s.t, x);
        sample_site_branching(field.model, s.d, n, atom, rng, thr, gauss, want_values, sc);
        for (int dir = 0; dir < 2 * s.d; ++dir) {
            uint64_t c = sc.children[static_cast<size_t>(dir)];
            if (c == 0) continue;
            Site dest = x;
            apply_direction(dest, dir);
            uint64_t& slot = next.counts[dest];
            slot = checked_add(slot, c);
        }
        if (record) {
            StepDraws::SiteDraw sd;
            sd.x = x;
            sd.atom = atom;
            sd.dir_counts = sc.dir_counts;
            sd.value_counts = sc.value_counts;
            record->sites.push_back(std::move(sd));
        }
    }
    if (used_gaussian) *used_gaussian = gauss;
    return next;
}

OccupancyState apply_aggregate_step(const OccupancyState& s, const StepDraws& draws) {
    OccupancyState next;
    next.d = s.d;
    next.t = s.t + 1;
    for (const auto& sd : draws.sites) {
        for (size_t dir = 0; dir < sd.dir_counts.size(); ++dir) {
            uint64_t kids = 0;
            if (dir < sd.value_counts.size())
                for (size_t k = 1; k < sd.value_counts[dir].size(); ++k)
                    kids = checked_add(kids, checked_mul(sd.value_counts[dir][k],
                                                         static_cast<uint64_t>(k)));
            if (kids == 0) continue;
            Site dest = sd.x;
            apply_direction(dest, static_cast<int>(dir));
            uint64_t& slot = next.counts[dest];
            slot = checked_add(slot, kids);
        }
    }
    return next;
}

// ---------------------------------------------------------------------------
// trajectories and ensembles
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    if (d < 1 || d > 8) throw ConfigError("dimension must be between 1 and 8");
    if (horizon < 0) throw ConfigError("horizon must be >= 0");
    if (env.atoms.empty()) throw ConfigError("environment model is empty");
    if (!(env.m > Rational(0)))
        throw ConfigError("mean offspring must be positive for normalized statistics");
    for (const auto& n : moment_indices)
        if (static_cast<int>(n.size()) != d)
            throw ConfigError("moment multi-index length must equal dimension");
    for (const auto& n : y_indices)
        if (static_cast<int>(n.size()) != d)
            throw ConfigError("Y multi-index length must equal dimension");
    for (long rt : record_times)
        if (rt < 0 || rt > horizon)
            throw ConfigError("record times must lie in [0, horizon]");
}

std::vector<long> RunConfig::resolved_record_times() const {
    std::vector<long> rt;
    if (record_times.empty()) {
        rt.resize(static_cast<size_t>(horizon) + 1);
        for (long t = 0; t <= horizon; ++t) rt[static_cast<size_t>(t)] = t;
    } else {
        rt = record_times;
        std::sort(rt.begin(), rt.end());
        rt.erase(std::unique(rt.begin(), rt.end()), rt.end());
    }
    return rt;
}

namespace {

StatBasis make_basis(const RunConfig& cfg) {
    StatBasis basis;
    basis.d = cfg.d;
    basis.log_m = std::log(cfg.env.m.to_double());
    basis.moment_indices = cfg.moment_indices;
    for (const auto& n : cfg.y_indices)
        basis.y_polys.push_back(WnEval::from(wn_coefficients(n, cfg.d)));
    return basis;
}

StatRecord zero_record(long t, const StatBasis& basis) {
    StatRecord rec;
    rec.t = t;
    rec.moments.assign(basis.moment_indices.size(), 0.0);
    rec.y_stats.assign(basis.y_polys.size(), 0.0);
    return rec;
}

}  // namespace

TrajectoryResult run_trajectory(const RunConfig& cfg) {
    cfg.validate();
    const EnvironmentField field{cfg.env, cfg.env_seed};
    const StatBasis basis = make_basis(cfg);
    const auto rt = cfg.resolved_record_times();

    TrajectoryResult out;
    size_t ri = 0;

    if (cfg.mode == SimMode::Aggregate) {
        Xoshiro256pp rng(splitmix64(cfg.particle_seed ^ 0x3c6ef372fe94f82bULL));
        SiteScratch sc;
        sc.init(cfg.d, cfg.env.k_max);
        bool gauss = false;
        Slab cur = Slab::from_state(init_occupancy(cfg.d), cfg.thresholds.slab_cell_cap);
        Slab next;
        for (long t = 0; t <= cfg.horizon; ++t) {
            cur.t = t;
            if (ri < rt.size() && rt[ri] == t) {
                out.records.push_back(compute_record_view(
                    t, [&](auto&& fn) { cur.for_each_occupied(fn); }, basis));
                ++ri;
            }
            if (t == cfg.horizon) break;
            if (cur.total == 0) break;
            step_slab(cur, next, field, rng, cfg.thresholds, gauss, sc, nullptr);
            cur.clear_dirty();
            std::swap(cur, next);
        }
        out.final_t = cur.t;
        out.status = cur.total == 0 ? RunStatus::Extinct : RunStatus::Alive;
        out.approx_sampling = gauss;
    } else {
        GenealogyState g = init_genealogy(cfg.d);
        for (long t = 0; t <= cfg.horizon; ++t) {
            if (ri < rt.size() && rt[ri] == t) {
                OccupancyState occ = aggregate(g);
                out.records.push_back(compute_record_view(
                    t,
                    [&](auto&& fn) {
                        for (const auto& [x, c] : occ.counts) fn(x.data(), c);
                    },
                    basis));
                ++ri;
            }
            if (t == cfg.horizon) break;
            if (g.particles.empty()) break;
            g = genealogy_step(g, field, cfg.particle_seed, cfg.thresholds.genealogy_cap);
        }
        out.final_t = g.t;
        out.status = g.particles.empty() ? RunStatus::Extinct : RunStatus::Alive;
    }

    // after extinction the remaining requested rows are identically zero
    for (; ri < rt.size(); ++ri) out.records.push_back(zero_record(rt[ri], basis));
    return out;
}

std::string stat_suffix(const std::vector<int>& n) {
    std::string s;
    for (size_t i = 0; i < n.size(); ++i) {
        if (i) s += "_";
        s += std::to_string(n[i]);
    }
    return s;
}

EnsembleSummary run_ensemble(const RunConfig& cfg, long replicas, int threads,
                             bool keep_replica_values) {
    cfg.validate();
    if (replicas < 1) throw ConfigError("replicas must be >= 1");

    EnsembleSummary sum;
    sum.times = cfg.resolved_record_times();
    sum.replicas = replicas;
    sum.keep_replica_values = keep_replica_values;

    sum.stat_names = {"nbar", "nbar2", "rho_star", "R"};
    for (const auto& n : cfg.moment_indices) sum.stat_names.push_back("mom_" + stat_suffix(n));
    for (const auto& n : cfg.moment_indices) sum.stat_names.push_back("rhomom_" + stat_suffix(n));
    for (const auto& n : cfg.y_indices) sum.stat_names.push_back("y_" + stat_suffix(n));

    const size_t M = sum.stat_names.size();
    const size_t Tn = sum.times.size();
    const size_t R = static_cast<size_t>(replicas);
    std::vector<std::vector<double>> values(M, std::vector<double>(Tn * R, 0.0));
    std::vector<uint8_t> alive(Tn * R, 0);
    std::vector<uint8_t> ok(R, 1);
    std::atomic<bool> gauss{false};
    std::atomic<long> next_rep{0};

    int nthreads = threads;
    if (nthreads <= 0) {
        nthreads = static_cast<int>(std::thread::hardware_concurrency());
        if (nthreads < 1) nthreads = 1;
    }
    if (const char* cap = std::getenv("BRWRE_THREADS")) {
        int c = std::atoi(cap);
        if (c >= 1) nthreads = std::min(nthreads, c);
    }
    nthreads = static_cast<int>(std::min<long>(nthreads, replicas));

    const size_t n_moments = cfg.moment_indices.size();
    const size_t n_y = cfg.y_indices.size();

    auto worker = [&]() {
        for (;;) {
            long rep = next_rep.fetch_add(1);
            if (rep >= replicas) break;
            RunConfig rc = cfg;
            rc.record_times = sum.times;
            rc.env_seed = prf_hash(cfg.env_seed, {kSaltEnsembleEnv, static_cast<uint64_t>(rep)});
            rc.particle_seed =
                prf_hash(cfg.particle_seed, {kSaltEnsembleParticle, static_cast<uint64_t>(rep)});
            TrajectoryResult res;
            try {
                res = run_trajectory(rc);
            } catch (const NumericError&) {
                ok[static_cast<size_t>(rep)] = 0;
                continue;
            }
            if (res.approx_sampling) gauss.store(true, std::memory_order_relaxed);
            for (size_t ti = 0; ti < Tn; ++ti) {
                const StatRecord& rec = res.records[ti];
                const size_t slot = ti * R + static_cast<size_t>(rep);
                alive[slot] = rec.alive ? 1 : 0;
                size_t si = 0;
                values[si++][slot] = rec.nbar;
                values[si++][slot] = rec.nbar * rec.nbar;
                values[si++][slot] = rec.rho_star;
                values[si++][slot] = rec.r_overlap;
                for (size_t i = 0; i < n_moments; ++i) values[si++][slot] = rec.moments[i];
                for (size_t i = 0; i < n_moments; ++i)
                    values[si++][slot] = rec.alive ? rec.moments[i] / rec.nbar : 0.0;
                for (size_t i = 0; i < n_y; ++i) values[si++][slot] = rec.y_stats[i];
            }
        }
    };

    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    sum.approx_sampling = gauss.load();
    for (uint8_t o : ok)
        if (!o) ++sum.failed;

    sum.survivors.assign(Tn, 0);
    for (size_t ti = 0; ti < Tn; ++ti)
        for (size_t r = 0; r < R; ++r)
            if (ok[r] && alive[ti * R + r]) ++sum.survivors[ti];

    auto median_of = [](std::vector<double>& v) -> double {
        if (v.empty()) return 0.0;
        size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
        double hi = v[mid];
        if (v.size() % 2 == 1) return hi;
        std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1, v.end());
        return 0.5 * (hi + v[mid - 1]);
    };

    sum.stats.assign(M, SeriesStats{});
    for (size_t si = 0; si < M; ++si) {
        SeriesStats& st = sum.stats[si];
        st.mean.assign(Tn, 0.0);
        st.se.assign(Tn, 0.0);
        st.median.assign(Tn, 0.0);
        st.mean_surv.assign(Tn, 0.0);
        st.se_surv.assign(Tn, 0.0);
        st.median_surv.assign(Tn, 0.0);
        st.median_abs_surv.assign(Tn, 0.0);
        std::vector<double> all, surv, surv_abs;
        for (size_t ti = 0; ti < Tn; ++ti) {
            all.clear();
            surv.clear();
            surv_abs.clear();
            for (size_t r = 0; r < R; ++r) {
                if (!ok[r]) continue;
                double v = values[si][ti * R + r];
                all.push_back(v);
                if (alive[ti * R + r]) {
                    surv.push_back(v);
                    surv_abs.push_back(std::fabs(v));
                }
            }
            auto reduce = [&](const std::vector<double>& v, double& mean, double& se) {
                if (v.empty()) return;
                double s = 0.0;
                for (double x : v) s += x;
                mean = s / static_cast<double>(v.size());
                if (v.size() > 1) {
                    double q = 0.0;
                    for (double x : v) q += (x - mean) * (x - mean);
                    se = std::sqrt(q / static_cast<double>(v.size() - 1) /
                                   static_cast<double>(v.size()));
                }
            };
            reduce(all, st.mean[ti], st.se[ti]);
            reduce(surv, st.mean_surv[ti], st.se_surv[ti]);
            std::vector<double> tmp = all;
            st.median[ti] = median_of(tmp);
            tmp = surv;
            st.median_surv[ti] = median_of(tmp);
            tmp = surv_abs;
            st.median_abs_surv[ti] = median_of(tmp);
        }
    }

    if (keep_replica_values)
        sum.replica_values = std::move(values);
    return sum;
}

}  // namespace brwre
