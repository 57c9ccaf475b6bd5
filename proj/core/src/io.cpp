#include "brwre/io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace brwre {

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string trajectory_csv_header(const RunConfig& cfg) {
    std::string h = "t,N,Nbar,rho_star,R";
    for (const auto& n : cfg.y_indices) h += ",y_" + stat_suffix(n);
    for (const auto& n : cfg.moment_indices) h += ",mom_" + stat_suffix(n);
    h += ",status";
    return h;
}

std::string trajectory_csv(const TrajectoryResult& res, const RunConfig& cfg) {
    std::string out = trajectory_csv_header(cfg) + "\n";
    for (const auto& rec : res.records) {
        out += std::to_string(rec.t);
        out += "," + std::to_string(rec.n_total);
        out += "," + format_g17(rec.nbar);
        out += "," + format_g17(rec.rho_star);
        out += "," + format_g17(rec.r_overlap);
        for (double y : rec.y_stats) out += "," + format_g17(y);
        for (double m : rec.moments) out += "," + format_g17(m);
        out += rec.alive ? ",alive" : ",extinct";
        out += "\n";
    }
    return out;
}

std::string ensemble_summary_json(const EnsembleSummary& sum) {
    nlohmann::json j;
    j["replicas"] = sum.replicas;
    j["failed"] = sum.failed;
    j["approx_sampling"] = sum.approx_sampling;
    j["times"] = sum.times;
    j["survivors"] = sum.survivors;
    std::vector<double> frac;
    for (long s : sum.survivors)
        frac.push_back(static_cast<double>(s) / static_cast<double>(sum.replicas));
    j["survival_fraction"] = frac;
    nlohmann::json stats = nlohmann::json::object();
    for (size_t i = 0; i < sum.stat_names.size(); ++i) {
        const SeriesStats& st = sum.stats[i];
        nlohmann::json s;
        s["mean"] = st.mean;
        s["se"] = st.se;
        s["median"] = st.median;
        s["mean_surv"] = st.mean_surv;
        s["se_surv"] = st.se_surv;
        s["median_surv"] = st.median_surv;
        s["median_abs_surv"] = st.median_abs_surv;
        stats[sum.stat_names[i]] = std::move(s);
    }
    j["stats"] = std::move(stats);
    return j.dump(2) + "\n";
}

std::string two_walk_csv(const TwoWalkSeries& series) {
    std::string out = "t,u,second_moment,overlap\n";
    for (long t = 0; t <= series.horizon; ++t) {
        auto i = static_cast<size_t>(t);
        out += std::to_string(t);
        out += "," + format_g17(series.u[i]);
        out += "," + format_g17(series.second_moment[i]);
        out += "," + format_g17(series.overlap[i]);
        out += "\n";
    }
    return out;
}

std::string quenched_mean_csv(const QuenchedMeanField& field) {
    std::string out = "t";
    for (int i = 1; i <= field.d; ++i) out += ",x" + std::to_string(i);
    out += ",nbar_q\n";
    for (long t = 0; t <= field.horizon; ++t)
        for (const auto& [x, v] : field.per_time[static_cast<size_t>(t)]) {
            out += std::to_string(t);
            for (int32_t c : x) out += "," + std::to_string(c);
            out += "," + format_g17(v) + "\n";
        }
    return out;
}

std::string polynomial_json(const PolynomialWn& poly) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [key, coeff] : poly.coeffs) {
        nlohmann::json term;
        term["i"] = key.first;
        term["j"] = key.second;
        term["num"] = coeff.num();
        term["den"] = coeff.den();
        arr.push_back(std::move(term));
    }
    return arr.dump();
}

PolynomialWn polynomial_from_json(const std::string& text, int d) {
    PolynomialWn poly;
    poly.d = d;
    poly.n.assign(static_cast<size_t>(d), 0);
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad polynomial JSON: ") + e.what());
    }
    for (const auto& term : arr) {
        std::vector<int> xe = term.at("i").get<std::vector<int>>();
        if (static_cast<int>(xe.size()) != d)
            throw ConfigError("polynomial term dimension mismatch");
        poly.coeffs[{xe, term.at("j").get<int>()}] =
            Rational(term.at("num").get<long long>(), term.at("den").get<long long>());
    }
    return poly;
}

std::string manifest_json(const std::vector<OutputFile>& files, const Manifest& manifest) {
    nlohmann::json j;
    j["command"] = manifest.command;
    j["tool_version"] = kToolVersion;
    j["status"] = manifest.status;
    j["approx_sampling"] = manifest.approx_sampling;
    if (!manifest.config_json.empty()) {
        try {
            j["config"] = nlohmann::json::parse(manifest.config_json);
        } catch (const std::exception&) {
            j["config"] = manifest.config_json;
        }
    }
    for (const auto& [k, v] : manifest.extra) j[k] = v;
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& f : files) {
        char hex[20];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(f.content)));
        nlohmann::json rec;
        rec["fnv1a64"] = hex;
        rec["bytes"] = f.content.size();
        outputs[f.name] = std::move(rec);
    }
    j["outputs"] = std::move(outputs);
    return j.dump(2) + "\n";
}

void write_outputs(const std::filesystem::path& outdir,
                   const std::vector<OutputFile>& files, const Manifest& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create " + outdir.string() + ": " + ec.message());
    for (const auto& f : files) write_file_atomic(outdir / f.name, f.content);
    write_file_atomic(outdir / "manifest.json", manifest_json(files, manifest));
}

}  // namespace brwre
