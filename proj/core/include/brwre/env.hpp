#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brwre/errors.hpp"
#include "brwre/rational.hpp"
#include "brwre/rng.hpp"

namespace brwre {

// Finite-support offspring distribution q on child counts 0..k_max.
// Probabilities are exact rationals so that environment moments and the
// small-system oracles stay exact.
struct OffspringPmf {
    std::vector<Rational> probs;  // probs[k] = P(k children), probs.back() > 0

    int k_max() const { return static_cast<int>(probs.size()) - 1; }

    Rational mean() const;
    Rational second_moment() const;

    // Sum_{j >= k} probs[j]
    Rational tail(int k) const;

    static OffspringPmf delta(int k);

    // Throws PmfError unless entries are in [0,1], sum to 1 within tol
    // (then renormalized exactly), and the top entry is positive.
    void validate_and_normalize(double tol = 1e-12);
};

// Finite mixture law Q over pmf atoms, with derived annealed moments.
struct EnvironmentModel {
    struct Atom {
        OffspringPmf pmf;
        Rational weight;
    };
    std::vector<Atom> atoms;

    // Derived on build:
    OffspringPmf annealed;  // q(k) = sum_a w_a pmf_a(k)
    Rational m;             // mean offspring
    Rational m2;            // annealed second moment m^(2)
    Rational q_mean_sq;     // Q[m_{t,x}^2]
    Rational alpha;         // Q[m_{t,x}^2] / m^2
    Rational c;             // m^-2 (m^(2) - m)
    int k_max = 0;

    // double caches for hot paths
    std::vector<double> atom_cum_weight;          // cumulative atom weights
    std::vector<std::vector<double>> atom_cdf;    // per atom, cdf over k
    std::vector<std::vector<double>> atom_probs;  // per atom, pmf over k
    std::vector<double> atom_mean;                // per atom mean offspring
    std::vector<int> atom_single_value;           // k if pmf is a point mass, else -1
};

struct EnvMoments {
    Rational m, m2, alpha, c;
};

EnvironmentModel build_environment(
    std::vector<std::pair<std::vector<Rational>, Rational>> spec,
    double tol = 1e-12);

EnvMoments environment_moments(const EnvironmentModel& model);

// Lazily realized i.i.d. field q_{t,x}: a pure function of (seed, t, x).
struct EnvironmentField {
    EnvironmentModel model;
    uint64_t seed = 0;

    int atom_at(long t, std::span<const int32_t> x) const {
        if (t < 0) throw DomainError("environment field: t must be >= 0");
        uint64_t h = splitmix64(seed ^ 0xe1f5a9d3b7c26480ULL);
        h = splitmix64(h ^ (static_cast<uint64_t>(t) + 0x9e3779b97f4a7c15ULL));
        for (int32_t c : x)
            h = splitmix64(h ^ (static_cast<uint64_t>(static_cast<int64_t>(c)) +
                                0x9e3779b97f4a7c15ULL));
        double u = u01_from_bits(h);
        const auto& cum = model.atom_cum_weight;
        for (size_t i = 0; i + 1 < cum.size(); ++i)
            if (u < cum[i]) return static_cast<int>(i);
        return static_cast<int>(cum.size()) - 1;
    }

    const OffspringPmf& sample_pmf(long t, std::span<const int32_t> x) const {
        return model.atoms[static_cast<size_t>(atom_at(t, x))].pmf;
    }
};

struct ConditionReport {
    double m = 0, m2 = 0, alpha = 0, pi_d = 0, product = 0;
    enum class Verdict { Regular, Fails } verdict = Verdict::Fails;
    std::vector<std::string> reasons;
};

// Regular-growth condition of the phase transition: m > 1 and alpha * pi_d < 1
// (m^(2) is always finite under finite support). d <= 2 fails outright.
ConditionReport check_regular_growth(const EnvironmentModel& model, int d, double pi_d);

// Named presets resolvable by the CLI: "env-a", "env-b", "env-c", "deterministic".
EnvironmentModel env_preset(const std::string& name);
bool is_env_preset(const std::string& name);

// Environment spec file: {"atoms":[{"probs":[p0,p1,...],"weight":w},...]}
// Numbers may be JSON numbers or strings like "3/5".
EnvironmentModel load_environment_json(const std::string& path);
EnvironmentModel parse_environment_json(const std::string& text);

// Resolves a preset name or a JSON file path.
EnvironmentModel resolve_environment(const std::string& name_or_path);

}  // namespace brwre
