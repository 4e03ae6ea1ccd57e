#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctricks/probe.hpp"
#include "ctricks/scene_gen.hpp"
#include "ctricks/toy_attn.hpp"
#include "json.hpp"

namespace ctricks::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitInvalidInput = 3;

struct RunConfig {
    std::string command;
    std::filesystem::path dataset;
    std::vector<CaseCode> cases;
    int n_per_case = 100;
    std::uint64_t seed = 0;
    PatchGrid grid;
    double k_percent = 10.0;
    double tau = 0.4;
    double lambda = 0.1;
    int epochs = 10;
    std::vector<int> conflict_deltas;
    std::filesystem::path out;
    std::filesystem::path responses;
    std::filesystem::path attn;

    // Throws Error(InvalidArgument / InvalidGrid) on out-of-range settings.
    void validate() const;
};

nlohmann::ordered_json config_json(const RunConfig& config);

// "all" or a comma-separated list; throws Error(InvalidCode) on any bad entry.
std::vector<CaseCode> parse_case_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

std::string sample_id(const CaseCode& code, int index);
// Counts cycle 3, 4, ..., 12, 3, ... over the per-case sample index.
int count_for_index(int index);
std::uint64_t sample_seed(std::uint64_t base, const CaseCode& code, int index);

struct SkippedSample {
    std::string id;
    std::string reason;
};

struct GenerateSummary {
    std::size_t written = 0;
    std::vector<SkippedSample> skipped;
};

// Writes <out>/<case>/<id>.{png,json}, <out>/index.jsonl, <out>/prompts.jsonl
// and <out>/generate_summary.json.
GenerateSummary cmd_generate(const RunConfig& config);

struct IndexEntry {
    std::string id;
    std::string manifest;  // relative to the dataset directory
    CaseCode code;
    int count = 0;
};

std::vector<IndexEntry> read_index(const std::filesystem::path& dataset);

struct EvaluateResult {
    nlohmann::ordered_json report;
    int exit_code = kExitOk;
};

// Report goes to config.out when set.
EvaluateResult cmd_evaluate(const RunConfig& config);

struct DemoResult {
    toy::TrainResult baseline;
    toy::TrainResult regularized;
    nlohmann::ordered_json summary;
};

// Paired lambda=0 / lambda=config.lambda runs from one seed on toy samples
// built from generated scenes (or config.dataset when it holds an index).
DemoResult cmd_mas_demo(const RunConfig& config);

struct ProbeRow {
    std::int64_t c_in = 0;
    toy::ProbeParams params;
};

std::vector<ProbeRow> cmd_probe_params(std::span<const std::int64_t> c_in);
std::string probe_table(std::span<const ProbeRow> rows);

}  // namespace ctricks::harness
