#pragma once
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "brwre/oracle.hpp"
#include "brwre/sim.hpp"

namespace brwre {

inline constexpr const char* kToolVersion = "0.1.0";

uint64_t fnv1a64(std::string_view bytes);
std::string format_g17(double v);

// write via temp file + rename so readers never see partial artifacts
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string trajectory_csv(const TrajectoryResult& res, const RunConfig& cfg);
std::string trajectory_csv_header(const RunConfig& cfg);
std::string ensemble_summary_json(const EnsembleSummary& sum);
std::string two_walk_csv(const TwoWalkSeries& series);
std::string quenched_mean_csv(const QuenchedMeanField& field);

// [{"i": [i1..id], "j": j, "num": .., "den": ..}, ...]
std::string polynomial_json(const PolynomialWn& poly);
PolynomialWn polynomial_from_json(const std::string& text, int d);

struct OutputFile {
    std::string name;
    std::string content;
};

struct Manifest {
    std::string command;
    std::string config_json;  // resolved-config echo, serialized JSON
    std::string status = "ok";
    bool approx_sampling = false;
    std::map<std::string, std::string> extra;
};

// Writes every file atomically, then a manifest.json carrying the config
// echo, seeds, tool version, flags and an fnv1a64 checksum per file.
// Identical inputs produce byte-identical files and manifest.
void write_outputs(const std::filesystem::path& outdir,
                   const std::vector<OutputFile>& files, const Manifest& manifest);

std::string manifest_json(const std::vector<OutputFile>& files, const Manifest& manifest);

}  // namespace brwre
