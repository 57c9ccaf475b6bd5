#include "brwre/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "brwre/kernels.hpp"

namespace brwre {

QuenchedMeanField quenched_mean(const EnvironmentField& field, int d, long horizon) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (horizon < 0) throw DomainError("horizon must be >= 0");
    QuenchedMeanField out;
    out.d = d;
    out.horizon = horizon;
    out.per_time.resize(static_cast<size_t>(horizon) + 1);
    out.zbar.resize(static_cast<size_t>(horizon) + 1, 0.0);

    const double m = field.model.m.to_double();
    out.per_time[0][Site(static_cast<size_t>(d), 0)] = 1.0;
    out.zbar[0] = 1.0;
    for (long t = 0; t < horizon; ++t) {
        auto& cur = out.per_time[static_cast<size_t>(t)];
        auto& nxt = out.per_time[static_cast<size_t>(t) + 1];
        double z = 0.0;
        for (const auto& [x, v] : cur) {
            int atom = field.atom_at(t, x);
            double w = v * field.model.atom_mean[static_cast<size_t>(atom)] /
                       (2.0 * d * m);
            if (w == 0.0) continue;
            for (int dir = 0; dir < 2 * d; ++dir) {
                Site y = x;
                apply_direction(y, dir);
                nxt[y] += w;
            }
            z += 2.0 * d * w;
        }
        out.zbar[static_cast<size_t>(t) + 1] = z;
    }
    return out;
}

// ---------------------------------------------------------------------------
// two-walk dynamic program
// ---------------------------------------------------------------------------

namespace {

// Orthant-reflected dense array for the difference walk (symmetric under
// coordinate sign flips, so only x >= 0 is stored).
struct OrthantDp {
    int d;
    long r = 0;  // current radius
    std::vector<double> cells;

    explicit OrthantDp(int dim) : d(dim) {}

    size_t volume(long radius) const {
        size_t v = 1;
        for (int i = 0; i < d; ++i) v *= static_cast<size_t>(radius) + 1;
        return v;
    }

    size_t index(const int32_t* x, long radius) const {
        size_t idx = 0;
        for (int i = 0; i < d; ++i)
            idx = idx * (static_cast<size_t>(radius) + 1) + static_cast<size_t>(x[i]);
        return idx;
    }
};

double multiplicity(const int32_t* x, int d) {
    double m = 1.0;
    for (int i = 0; i < d; ++i)
        if (x[i] != 0) m *= 2.0;
    return m;
}

}  // namespace

TwoWalkSeries two_walk_series(const EnvironmentModel& model, int d, long horizon,
                              long radius_cap, double truncation_tol) {
    if (d < 1 || d > 4) throw DomainError("two-walk DP supports 1 <= d <= 4");
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    if (!(model.m > Rational(0))) throw DomainError("two-walk DP needs m > 0");

    TwoWalkSeries out;
    out.horizon = horizon;
    out.alpha = model.alpha.to_double();
    out.c = model.c.to_double();
    out.m = model.m.to_double();

    StepKernel kern = StepKernel::difference(d);
    struct KE {
        int32_t e[4];
        double p;
    };
    std::vector<KE> kes;
    for (const auto& [e, p] : kern.entries) {
        KE k{};
        for (int i = 0; i < d; ++i) k.e[i] = e[static_cast<size_t>(i)];
        k.p = p.to_double();
        kes.push_back(k);
    }

    auto radius_for = [&](long t) {
        double sigma = std::sqrt(2.0 * static_cast<double>(t) / d);
        long need = static_cast<long>(std::ceil(8.5 * sigma)) + 6;
        return std::min({2 * t, need, radius_cap});
    };

    // split-phase DP: mass 1 at the origin, alpha weight on departures from 0
    std::vector<double> u(static_cast<size_t>(horizon) + 1, 0.0);
    std::vector<double> w(static_cast<size_t>(horizon) + 1, 0.0);
    u[0] = 1.0;
    w[0] = 1.0;

    OrthantDp dp(d);
    dp.r = 0;
    dp.cells.assign(dp.volume(0), 0.0);
    dp.cells[0] = 1.0;
    double relative_truncated = 0.0;
    long max_radius = 0;

    std::vector<double> next;
    std::vector<int32_t> x(static_cast<size_t>(d));
    for (long t = 1; t <= horizon; ++t) {
        const long pr = dp.r;
        const long nr = radius_for(t);
        max_radius = std::max(max_radius, nr);
        next.assign(dp.volume(nr), 0.0);

        // pull: next[x] = sum_e p(e) * weight(x-e) * cur[|x-e|]
        std::fill(x.begin(), x.end(), 0);
        for (;;) {
            double acc = 0.0;
            for (const auto& ke : kes) {
                int32_t y[4];
                bool in = true, at_origin = true;
                for (int i = 0; i < d; ++i) {
                    int32_t yi = x[static_cast<size_t>(i)] - ke.e[i];
                    if (yi < 0) yi = -yi;
                    if (yi > pr) {
                        in = false;
                        break;
                    }
                    y[i] = yi;
                    if (yi != 0) at_origin = false;
                }
                if (!in) continue;
                double v = dp.cells[dp.index(y, pr)];
                if (v == 0.0) continue;
                acc += ke.p * v * (at_origin ? out.alpha : 1.0);
            }
            if (acc != 0.0) next[dp.index(x.data(), nr)] = acc;
            int axis = d - 1;
            while (axis >= 0) {
                auto ai = static_cast<size_t>(axis);
                if (++x[ai] <= nr) break;
                x[ai] = 0;
                --axis;
            }
            if (axis < 0) break;
        }

        // outflow past the radius: only rim sources (some coordinate >= nr-1)
        // can push mass beyond nr, since kernel displacements are at most 2
        double lost = 0.0;
        {
            std::vector<int32_t> z(static_cast<size_t>(d), 0);
            for (;;) {
                bool rim = false;
                for (int i = 0; i < d; ++i)
                    if (z[static_cast<size_t>(i)] >= nr - 1) rim = true;
                if (rim) {
                    double v = dp.cells[dp.index(z.data(), pr)];
                    if (v != 0.0) {
                        double esc = 0.0;
                        for (const auto& ke : kes) {
                            bool outside = false;
                            for (int i = 0; i < d; ++i)
                                if (z[static_cast<size_t>(i)] + ke.e[i] > nr) outside = true;
                            if (outside) esc += ke.p;
                        }
                        lost += v * multiplicity(z.data(), d) * esc;
                    }
                }
                int axis = d - 1;
                while (axis >= 0) {
                    auto ai = static_cast<size_t>(axis);
                    if (++z[ai] <= pr) break;
                    z[ai] = 0;
                    --axis;
                }
                if (axis < 0) break;
            }
        }

        dp.cells = std::move(next);
        dp.r = nr;

        double total = 0.0, comp = 0.0;
        {
            std::vector<int32_t> z(static_cast<size_t>(d), 0);
            for (;;) {
                double v = dp.cells[dp.index(z.data(), nr)];
                if (v != 0.0) {
                    double y = v * multiplicity(z.data(), d) - comp;
                    double s = total + y;
                    comp = (s - total) - y;
                    total = s;
                }
                int axis = d - 1;
                while (axis >= 0) {
                    auto ai = static_cast<size_t>(axis);
                    if (++z[ai] <= nr) break;
                    z[ai] = 0;
                    --axis;
                }
                if (axis < 0) break;
            }
        }
        if (total > 0.0) relative_truncated += lost / total;

        u[static_cast<size_t>(t)] = total;
        w[static_cast<size_t>(t)] = dp.cells[0];
    }

    out.truncated_mass = relative_truncated;
    out.radius_used = max_radius;
    if (relative_truncated > truncation_tol)
        throw NumericError("two-walk DP truncated mass " +
                           std::to_string(relative_truncated) +
                           " exceeds tolerance; raise the radius cap");

    out.u = u;
    out.second_moment.assign(static_cast<size_t>(horizon) + 1, 0.0);
    out.overlap.assign(static_cast<size_t>(horizon) + 1, 0.0);
    out.second_moment[0] = 1.0;
    out.overlap[0] = 1.0;
    const double inv_m = 1.0 / out.m;
    for (long t = 1; t <= horizon; ++t) {
        double m_pow = std::pow(inv_m, static_cast<double>(t));
        double sm = m_pow, ov = m_pow;
        double mk = 1.0;  // m^{-(k-1)}
        for (long k = 1; k <= t; ++k) {
            sm += out.c * mk * u[static_cast<size_t>(t - k)];
            ov += out.c * mk * w[static_cast<size_t>(t - k)];
            mk *= inv_m;
        }
        out.second_moment[static_cast<size_t>(t)] = sm;
        out.overlap[static_cast<size_t>(t)] = ov;
    }
    return out;
}

// ---------------------------------------------------------------------------
// zeta identity
// ---------------------------------------------------------------------------

ZetaCheckResult verify_zeta_identity(const EnvironmentField& field, uint64_t particle_seed,
                                     int d, long horizon, uint64_t path_cap) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (horizon < 0) throw DomainError("horizon must be >= 0");
    const EnvironmentModel& model = field.model;

    // genealogy simulation with the same seeds
    GenealogyState g = init_genealogy(d);
    for (long t = 0; t < horizon; ++t)
        g = genealogy_step(g, field, particle_seed, 100000);
    std::map<std::pair<Site, std::vector<uint32_t>>, double> simulated;
    for (const auto& p : g.particles) simulated[{p.pos, p.label}] = 1.0;

    // annealed chain ingredients: a_{e,k} = Qbar_k / (2d), transition
    // probability a_{e,k} / m over directions e and child indices k
    const int k_max = model.k_max;
    std::vector<double> qbar(static_cast<size_t>(k_max) + 1, 0.0);
    for (int k = 1; k <= k_max; ++k)
        qbar[static_cast<size_t>(k)] = model.annealed.tail(k).to_double();
    const double m = model.m.to_double();
    const double inv_dirs = 1.0 / (2.0 * d);

    std::map<std::pair<Site, std::vector<uint32_t>>, double> enumerated;
    uint64_t paths = 0;

    struct Frame {
        Site pos;
        std::vector<uint32_t> label;
        uint64_t label_hash;
        long t;
        double weight;  // running P(path) * zeta(path)
    };
    std::vector<Frame> stack;
    Frame root;
    root.pos.assign(static_cast<size_t>(d), 0);
    root.label_hash = root_label_hash();
    root.t = 0;
    root.weight = 1.0;
    stack.push_back(std::move(root));

    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (f.t == horizon) {
            enumerated[{f.pos, f.label}] += f.weight;
            continue;
        }
        // realized draws for the particle slot (t, x, label)
        int atom = field.atom_at(f.t, f.pos);
        const auto& cdf = model.atom_cdf[static_cast<size_t>(atom)];
        int drawn_dir = genealogy_direction(particle_seed, f.t, f.pos, f.label_hash, d);
        int drawn_k = genealogy_child_count(particle_seed, f.t, f.pos, f.label_hash, cdf);

        for (int dir = 0; dir < 2 * d; ++dir) {
            for (int k = 1; k <= k_max; ++k) {
                double tail = qbar[static_cast<size_t>(k)];
                if (tail <= 0.0) continue;  // zero kernel mass
                if (++paths > path_cap)
                    throw CapError("zeta-identity chain enumeration exceeds cap");
                // A = 1{direction matches} 1{k <= realized child count}
                bool a = (dir == drawn_dir) && (k <= drawn_k);
                if (!a) continue;  // zero contribution on this branch
                // P(step) * zeta factor = (a_{e,k}/m) * (A / a_{e,k}) = A/m
                Frame nf;
                nf.pos = f.pos;
                apply_direction(nf.pos, dir);
                nf.label = f.label;
                nf.label.push_back(static_cast<uint32_t>(k));
                nf.label_hash = child_label_hash(f.label_hash, static_cast<uint32_t>(k));
                nf.t = f.t + 1;
                nf.weight = f.weight * (inv_dirs * tail / m) * (1.0 / (inv_dirs * tail));
                stack.push_back(std::move(nf));
            }
        }
    }

    ZetaCheckResult res;
    res.paths = paths;
    const double m_pow_t = std::pow(m, static_cast<double>(horizon));
    std::map<Site, double> agg_enum;
    std::map<Site, double> agg_sim;

    for (const auto& [key, val] : enumerated) {
        auto it = simulated.find(key);
        double sim_val = it == simulated.end() ? 0.0 : it->second;
        res.max_error = std::max(res.max_error, std::fabs(m_pow_t * val - sim_val));
        agg_enum[key.first] += val;
    }
    for (const auto& [key, val] : simulated) {
        if (!enumerated.count(key))
            res.max_error = std::max(res.max_error, val);
        agg_sim[key.first] += val;
    }
    for (const auto& [pos, val] : agg_enum) {
        auto it = agg_sim.find(pos);
        double s = it == agg_sim.end() ? 0.0 : it->second;
        res.max_error_aggregated =
            std::max(res.max_error_aggregated, std::fabs(m_pow_t * val - s));
    }
    for (const auto& [pos, val] : agg_sim)
        if (!agg_enum.count(pos))
            res.max_error_aggregated = std::max(res.max_error_aggregated, val);
    return res;
}

// ---------------------------------------------------------------------------
// brute force moments
// ---------------------------------------------------------------------------

BruteForceMoments brute_force_moments(const EnvironmentModel& model, int d, long horizon,
                                      uint64_t enumeration_cap) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (horizon < 0) throw DomainError("horizon must be >= 0");
    if (horizon > 2) throw CapError("brute-force enumeration supports T <= 2");

    BruteForceMoments out;
    if (horizon == 0) {
        out.mean = Rational(1);
        out.second = Rational(1);
        return out;
    }

    // Spatial directions integrate out of population totals: all children of
    // one parent land on the parent's destination, so N_t does not depend on
    // which neighbor was drawn.
    if (horizon == 1) {
        Rational mean, second;
        for (const auto& atom : model.atoms) {
            for (size_t k = 0; k < atom.pmf.probs.size(); ++k) {
                Rational p = atom.weight * atom.pmf.probs[k];
                mean += p * Rational(static_cast<long long>(k));
                second += p * Rational(static_cast<long long>(k * k));
            }
        }
        out.mean = mean;
        out.second = second;
        return out;
    }

    // T = 2: root draws k0 from atom A at (0,0); the k0 children share one
    // site and one atom B at time 1; each child draws K_i from B i.i.d.
    Rational mean, second;
    for (const auto& atom_a : model.atoms) {
        for (size_t k0 = 0; k0 < atom_a.pmf.probs.size(); ++k0) {
            Rational pa = atom_a.weight * atom_a.pmf.probs[k0];
            if (pa.is_zero()) continue;
            if (k0 == 0) continue;  // no children, N_2 = 0
            for (const auto& atom_b : model.atoms) {
                Rational pb = pa * atom_b.weight;
                if (pb.is_zero()) continue;
                const size_t support = atom_b.pmf.probs.size();
                // odometer over (K_1..K_{k0}) in {0..k_max(B)}^{k0}
                double combos = std::pow(static_cast<double>(support),
                                         static_cast<double>(k0));
                if (combos > static_cast<double>(enumeration_cap))
                    throw CapError("brute-force enumeration exceeds cap");
                std::vector<size_t> ks(k0, 0);
                for (;;) {
                    Rational pk = pb;
                    long long total = 0;
                    for (size_t i = 0; i < k0; ++i) {
                        pk *= atom_b.pmf.probs[ks[i]];
                        total += static_cast<long long>(ks[i]);
                    }
                    if (!pk.is_zero()) {
                        mean += pk * Rational(total);
                        second += pk * Rational(total * total);
                    }
                    size_t axis = k0;
                    while (axis > 0) {
                        if (++ks[axis - 1] < support) break;
                        ks[axis - 1] = 0;
                        --axis;
                    }
                    if (axis == 0) break;
                }
            }
        }
    }
    out.mean = mean;
    out.second = second;
    return out;
}

}  // namespace brwre
