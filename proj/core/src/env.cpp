#include "brwre/env.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace brwre {

Rational OffspringPmf::mean() const {
    Rational s;
    for (size_t k = 0; k < probs.size(); ++k)
        s += probs[k] * Rational(static_cast<long long>(k));
    return s;
}

Rational OffspringPmf::second_moment() const {
    Rational s;
    for (size_t k = 0; k < probs.size(); ++k)
        s += probs[k] * Rational(static_cast<long long>(k * k));
    return s;
}

Rational OffspringPmf::tail(int k) const {
    Rational s;
    for (size_t j = static_cast<size_t>(k < 0 ? 0 : k); j < probs.size(); ++j)
        s += probs[j];
    return s;
}

OffspringPmf OffspringPmf::delta(int k) {
    if (k < 0) throw PmfError("delta pmf needs k >= 0");
    OffspringPmf p;
    p.probs.assign(static_cast<size_t>(k) + 1, Rational(0));
    p.probs[static_cast<size_t>(k)] = Rational(1);
    return p;
}

void OffspringPmf::validate_and_normalize(double tol) {
    if (probs.empty()) throw PmfError("pmf has no entries");
    Rational sum;
    for (const auto& p : probs) {
        if (p < Rational(0) || p > Rational(1))
            throw PmfError("pmf entry outside [0,1]: " + p.str());
        sum += p;
    }
    if (sum.is_zero()) throw PmfError("pmf sums to zero");
    if (std::fabs(sum.to_double() - 1.0) > tol)
        throw PmfError("pmf entries sum to " + sum.str() + ", not 1");
    if (sum != Rational(1))
        for (auto& p : probs) p /= sum;
    // canonical support: trim trailing zeros
    while (probs.size() > 1 && probs.back().is_zero()) probs.pop_back();
}

EnvironmentModel build_environment(
    std::vector<std::pair<std::vector<Rational>, Rational>> spec, double tol) {
    if (spec.empty()) throw ConfigError("environment needs at least one atom");
    EnvironmentModel model;
    Rational wsum;
    for (auto& [probs, weight] : spec) {
        if (weight < Rational(0))
            throw WeightSumError("negative atom weight " + weight.str());
        OffspringPmf pmf;
        pmf.probs = std::move(probs);
        pmf.validate_and_normalize(tol);
        wsum += weight;
        model.atoms.push_back({std::move(pmf), weight});
    }
    if (std::fabs(wsum.to_double() - 1.0) > tol)
        throw WeightSumError("atom weights sum to " + wsum.str() + ", not 1");
    if (wsum != Rational(1))
        for (auto& a : model.atoms) a.weight /= wsum;

    model.k_max = 0;
    for (const auto& a : model.atoms)
        model.k_max = std::max(model.k_max, a.pmf.k_max());

    model.annealed.probs.assign(static_cast<size_t>(model.k_max) + 1, Rational(0));
    for (const auto& a : model.atoms)
        for (size_t k = 0; k < a.pmf.probs.size(); ++k)
            model.annealed.probs[k] += a.weight * a.pmf.probs[k];

    model.m = model.annealed.mean();
    model.m2 = model.annealed.second_moment();
    for (const auto& a : model.atoms) {
        Rational am = a.pmf.mean();
        model.q_mean_sq += a.weight * am * am;
    }
    if (!model.m.is_zero()) {
        model.alpha = model.q_mean_sq / (model.m * model.m);
        model.c = (model.m2 - model.m) / (model.m * model.m);
    }

    double cum = 0.0;
    for (const auto& a : model.atoms) {
        cum += a.weight.to_double();
        model.atom_cum_weight.push_back(cum);
        model.atom_mean.push_back(a.pmf.mean().to_double());
        std::vector<double> cdf, probs;
        double c2 = 0.0;
        int single = -1;
        int nonzero = 0;
        for (size_t k = 0; k < a.pmf.probs.size(); ++k) {
            double pk = a.pmf.probs[k].to_double();
            probs.push_back(pk);
            c2 += pk;
            cdf.push_back(c2);
            if (!a.pmf.probs[k].is_zero()) {
                ++nonzero;
                single = static_cast<int>(k);
            }
        }
        cdf.back() = 1.0;
        model.atom_cdf.push_back(std::move(cdf));
        model.atom_probs.push_back(std::move(probs));
        model.atom_single_value.push_back(nonzero == 1 ? single : -1);
    }
    model.atom_cum_weight.back() = 1.0;
    return model;
}

EnvMoments environment_moments(const EnvironmentModel& model) {
    return {model.m, model.m2, model.alpha, model.c};
}

ConditionReport check_regular_growth(const EnvironmentModel& model, int d, double pi_d) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (pi_d < 0.0 || pi_d > 1.0) throw DomainError("pi_d must lie in [0,1]");
    ConditionReport rep;
    rep.m = model.m.to_double();
    rep.m2 = model.m2.to_double();
    rep.alpha = model.alpha.to_double();
    rep.pi_d = pi_d;
    rep.product = rep.alpha * pi_d;
    if (d <= 2) rep.reasons.push_back("recurrent dimension");
    if (!(model.m > Rational(1))) rep.reasons.push_back("m <= 1");
    if (!(rep.product < 1.0)) rep.reasons.push_back("alpha*pi_d >= 1");
    rep.verdict = rep.reasons.empty() ? ConditionReport::Verdict::Regular
                                      : ConditionReport::Verdict::Fails;
    return rep;
}

EnvironmentModel env_preset(const std::string& name) {
    auto delta_mix = [](int k1, Rational w1, int k2, Rational w2) {
        std::vector<std::pair<std::vector<Rational>, Rational>> spec;
        spec.emplace_back(OffspringPmf::delta(k1).probs, w1);
        spec.emplace_back(OffspringPmf::delta(k2).probs, w2);
        return build_environment(std::move(spec));
    };
    if (name == "env-a") return delta_mix(4, Rational(3, 10), 0, Rational(7, 10));
    if (name == "env-b") return delta_mix(2, Rational(3, 5), 0, Rational(2, 5));
    if (name == "env-c") return delta_mix(2, Rational(53, 100), 0, Rational(47, 100));
    if (name == "deterministic") {
        std::vector<std::pair<std::vector<Rational>, Rational>> spec;
        spec.emplace_back(OffspringPmf::delta(1).probs, Rational(1));
        return build_environment(std::move(spec));
    }
    throw ConfigError("unknown environment preset '" + name + "'");
}

bool is_env_preset(const std::string& name) {
    return name == "env-a" || name == "env-b" || name == "env-c" ||
           name == "deterministic";
}

namespace {

Rational rational_from_json(const nlohmann::json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        auto slash = s.find('/');
        if (slash != std::string::npos) {
            long long n = std::stoll(s.substr(0, slash));
            long long d = std::stoll(s.substr(slash + 1));
            return Rational(n, d);
        }
        return Rational::from_double(std::stod(s));
    }
    if (v.is_number_integer()) return Rational(v.get<long long>());
    if (v.is_number_float()) return Rational::from_double(v.get<double>());
    throw ConfigError("expected a number or fraction string in environment spec");
}

}  // namespace

EnvironmentModel parse_environment_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad environment JSON: ") + e.what());
    }
    if (!j.contains("atoms") || !j["atoms"].is_array() || j["atoms"].empty())
        throw ConfigError("environment spec needs a nonempty 'atoms' array");
    std::vector<std::pair<std::vector<Rational>, Rational>> spec;
    for (const auto& atom : j["atoms"]) {
        if (!atom.contains("probs") || !atom.contains("weight"))
            throw ConfigError("each atom needs 'probs' and 'weight'");
        std::vector<Rational> probs;
        for (const auto& p : atom["probs"]) probs.push_back(rational_from_json(p));
        spec.emplace_back(std::move(probs), rational_from_json(atom["weight"]));
    }
    return build_environment(std::move(spec));
}

EnvironmentModel load_environment_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open environment spec '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_environment_json(ss.str());
}

EnvironmentModel resolve_environment(const std::string& name_or_path) {
    if (is_env_preset(name_or_path)) return env_preset(name_or_path);
    if (std::filesystem::exists(name_or_path))
        return load_environment_json(name_or_path);
    throw ConfigError("'" + name_or_path +
                      "' is neither an environment preset nor a readable file");
}

}  // namespace brwre
