#include "ctricks/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ctricks/error.hpp"
#include "ctricks/mas_core.hpp"
#include "ctricks/metrics.hpp"
#include "ctricks/prompt_kit.hpp"
#include "ctricks/raster.hpp"

namespace ctricks::harness {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::MissingArtifact, path.string() + " not found");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<ojson> read_jsonl(const fs::path& path) {
    std::istringstream in(slurp(path));
    std::vector<ojson> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(ojson::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidArgument,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string canonical_case_list(std::span<const CaseCode> cases) {
    std::string out;
    for (const auto& c : cases) {
        if (!out.empty()) out += ",";
        out += c.str();
    }
    return out;
}

ojson accuracy_table(const std::map<std::string, std::pair<std::size_t, std::size_t>>& tally) {
    ojson j = ojson::object();
    for (const auto& [key, t] : tally) j[key] = static_cast<double>(t.first) / static_cast<double>(t.second);
    return j;
}

}  // namespace

void RunConfig::validate() const {
    grid.validate();
    if (n_per_case < 1) throw Error(ErrorKind::InvalidArgument, "--n must be at least 1");
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw Error(ErrorKind::InvalidArgument, "--k-percent outside (0,100]");
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorKind::InvalidArgument, "--tau outside [0,1]");
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "--lambda must be non-negative");
    if (epochs < 0) throw Error(ErrorKind::InvalidArgument, "--epochs must be non-negative");
    for (int d : conflict_deltas) {
        if (d != -2 && d != -1 && d != 1 && d != 2) {
            throw Error(ErrorKind::InvalidArgument, "--conflict-deltas entries must be in {-2,-1,1,2}");
        }
    }
}

ojson config_json(const RunConfig& c) {
    ojson j;
    j["command"] = c.command;
    j["dataset"] = c.dataset.generic_string();
    j["cases"] = canonical_case_list(c.cases);
    j["n_per_case"] = c.n_per_case;
    j["seed"] = c.seed;
    j["image_size"] = c.grid.image_size;
    j["patch_size"] = c.grid.patch_size;
    j["k_percent"] = c.k_percent;
    j["tau"] = c.tau;
    j["lambda"] = c.lambda;
    j["epochs"] = c.epochs;
    j["conflict_deltas"] = c.conflict_deltas;
    j["responses"] = c.responses.generic_string();
    j["attn"] = c.attn.generic_string();
    return j;
}

std::vector<CaseCode> parse_case_list(std::string_view text) {
    if (text == "all") return all_case_codes();
    std::vector<CaseCode> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        std::string_view item = text.substr(start, comma - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        const CaseCode code = parse_case_code(item);
        if (std::find(out.begin(), out.end(), code) == out.end()) out.push_back(code);
        start = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string item(text.substr(start, comma - start));
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidArgument, "'" + item + "' is not an integer");
        }
        if (used != item.size()) throw Error(ErrorKind::InvalidArgument, "'" + item + "' is not an integer");
        out.push_back(v);
        start = comma + 1;
    }
    return out;
}

std::string sample_id(const CaseCode& code, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", index);
    return code.str() + "_" + buf;
}

int count_for_index(int index) { return kMinCount + index % (kMaxCount - kMinCount + 1); }

std::uint64_t sample_seed(std::uint64_t base, const CaseCode& code, int index) {
    const auto code_key = static_cast<std::uint64_t>(code.prefix) * 16 + static_cast<std::uint64_t>(code.suffix - 'A');
    return derive_seed(base, code_key, static_cast<std::uint64_t>(index));
}

GenerateSummary cmd_generate(const RunConfig& config) {
    config.validate();
    if (config.cases.empty()) throw Error(ErrorKind::InvalidArgument, "no case codes selected");
    fs::create_directories(config.out);

    GenerateSummary summary;
    std::string index;
    std::string prompts;
    for (const auto& code : config.cases) {
        const fs::path case_dir = config.out / code.str();
        for (int k = 0; k < config.n_per_case; ++k) {
            const std::string id = sample_id(code, k);
            const int count = count_for_index(k);
            Scene scene;
            try {
                scene = sample_scene(code, count, config.grid, sample_seed(config.seed, code, k));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Infeasible) throw;
                summary.skipped.push_back({id, e.what()});
                continue;
            }
            if (const auto rep = validate_scene(scene); !rep.ok()) {
                summary.skipped.push_back({id, "validation: " + rep.violations.front()});
                continue;
            }
            write_sample(render(scene, id), case_dir);
            ++summary.written;

            ojson line;
            line["manifest"] = code.str() + "/" + id + ".json";
            line["case_code"] = code.str();
            line["count"] = count;
            line["id"] = id;
            index += line.dump() + "\n";

            const std::string obj = object_name(scene);
            prompts += prompt_jsonl_line(make_standard_instance(id, obj)) + "\n";
            for (int delta : config.conflict_deltas) {
                if (count + delta < 1) continue;
                prompts += prompt_jsonl_line(conflict_prompt(id, obj, count, delta)) + "\n";
            }
        }
    }
    write_text(config.out / "index.jsonl", index);
    write_text(config.out / "prompts.jsonl", prompts);

    ojson s;
    s["config"] = config_json(config);
    s["written"] = summary.written;
    s["skipped"] = summary.skipped.size();
    ojson skipped = ojson::array();
    for (const auto& sk : summary.skipped) skipped.push_back({{"id", sk.id}, {"reason", sk.reason}});
    s["skipped_samples"] = std::move(skipped);
    write_text(config.out / "generate_summary.json", s.dump(2) + "\n");
    return summary;
}

std::vector<IndexEntry> read_index(const fs::path& dataset) {
    std::vector<IndexEntry> out;
    for (const auto& j : read_jsonl(dataset / "index.jsonl")) {
        try {
            IndexEntry e;
            e.manifest = j.at("manifest").get<std::string>();
            e.code = parse_case_code(j.at("case_code").get<std::string>());
            e.count = j.at("count").get<int>();
            e.id = j.contains("id") ? j.at("id").get<std::string>() : fs::path(e.manifest).stem().string();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorKind::CorruptManifest, (dataset / "index.jsonl").string() + ": " + ex.what());
        }
    }
    return out;
}

EvaluateResult cmd_evaluate(const RunConfig& config) {
    config.validate();
    const std::vector<IndexEntry> index = read_index(config.dataset);
    GroundTruth truth;
    std::map<std::string, const IndexEntry*> by_id;
    for (const auto& e : index) {
        truth[e.id] = e.count;
        by_id[e.id] = &e;
    }

    std::vector<ModelResponse> scored;
    std::vector<std::string> unmatched;
    for (const auto& j : read_jsonl(config.responses)) {
        ModelResponse r;
        try {
            r.sample_id = j.at("sample_id").get<std::string>();
            r.variant = parse_variant(j.value("variant", std::string("standard")));
            r.raw_text = j.at("raw_text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, config.responses.string() + ": " + e.what());
        }
        if (truth.count(r.sample_id) == 0) {
            unmatched.push_back(r.sample_id);
            continue;
        }
        scored.push_back(std::move(r));
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> per_case;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_variant;
    std::map<std::string, bool> answered;
    for (const auto& r : scored) {
        const IndexEntry& e = *by_id.at(r.sample_id);
        const bool ok = response_correct(r.raw_text, e.count);
        auto& pc = per_case[e.code.str()];
        pc.first += ok ? 1 : 0;
        ++pc.second;
        auto& pv = per_variant[std::string(to_string(r.variant))];
        pv.first += ok ? 1 : 0;
        ++pv.second;
        answered[r.sample_id] = true;
    }

    ojson report;
    report["flags"] = config_json(config);
    report["accuracy_matching"] =
        "ground-truth count present as a whole numeral token or its number word (1-30); "
        "numerals inside longer digit runs do not match";
    report["n_dataset"] = index.size();
    report["n_responses"] = scored.size() + unmatched.size();
    report["n_scored"] = scored.size();
    report["overall_accuracy"] = accuracy(scored, truth);

    ojson cases = ojson::object();
    for (const auto& code : all_case_codes()) {
        const auto it = per_case.find(code.str());
        if (it != per_case.end()) {
            cases[code.str()] = static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
        }
    }
    report["per_case"] = std::move(cases);
    report["per_variant"] = accuracy_table(per_variant);

    const std::map<int, double> per_count = per_count_breakdown(scored, truth);
    ojson counts = ojson::object();
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [count, acc] : per_count) {
        counts[std::to_string(count)] = acc;
        xs.push_back(count);
        ys.push_back(acc);
    }
    report["per_count"] = std::move(counts);
    try {
        report["pearson_r"] = pearson_corr(xs, ys);
    } catch (const Error& e) {
        report["pearson_r"] = nullptr;
        report["pearson_note"] = e.what();
    }

    if (!config.attn.empty()) {
        const fs::path base = config.attn.parent_path();
        double sum = 0.0;
        std::size_t n = 0;
        std::map<std::string, std::pair<double, std::size_t>> per_case_iou;
        for (const auto& j : read_jsonl(config.attn)) {
            const std::string id = j.at("sample_id").get<std::string>();
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                unmatched.push_back(id);
                continue;
            }
            const ManifestData m = parse_manifest(slurp(config.dataset / it->second->manifest),
                                                  config.dataset / it->second->manifest);
            const int g = m.scene.grid.grid_dim();
            AttnGrid grid;
            if (j.contains("header")) {
                const AttentionRecord rec = read_attention_record(base / j.at("header").get<std::string>());
                const std::vector<int> layers = resolve_layers(rec.layers, {});
                grid = visual_attention_grid(rec, layers, select_target_steps(rec.roles), g);
            } else {
                grid.rows = g;
                grid.cols = g;
                grid.values = j.at("grid").get<std::vector<double>>();
                if (grid.values.size() != static_cast<std::size_t>(g) * g) {
                    throw Error(ErrorKind::DimensionMismatch, id + ": attention grid has " +
                                                                  std::to_string(grid.values.size()) + " cells");
                }
            }
            const double iou = attn_iou(grid, m.instance_masks, m.scene.grid, config.k_percent);
            sum += iou;
            ++n;
            auto& pc = per_case_iou[it->second->code.str()];
            pc.first += iou;
            ++pc.second;
        }
        ojson a;
        a["k_percent"] = config.k_percent;
        a["n"] = n;
        a["mean"] = n ? ojson(sum / static_cast<double>(n)) : ojson(nullptr);
        ojson pc = ojson::object();
        for (const auto& code : all_case_codes()) {
            const auto it = per_case_iou.find(code.str());
            if (it != per_case_iou.end()) pc[code.str()] = it->second.first / static_cast<double>(it->second.second);
        }
        a["per_case"] = std::move(pc);
        report["attn_iou"] = std::move(a);
    }

    std::size_t unanswered = 0;
    for (const auto& e : index) unanswered += answered.count(e.id) ? 0 : 1;
    report["unanswered_samples"] = unanswered;
    report["unmatched"] = unmatched;
    const bool partial = !unmatched.empty() || unanswered > 0;
    report["coverage"] = partial ? "partial" : "complete";

    if (!config.out.empty()) write_text(config.out, report.dump(2) + "\n");
    return {std::move(report), partial ? kExitPartial : kExitOk};
}

namespace {

struct DemoSplit {
    std::vector<toy::ToySample> train;
    std::vector<toy::ToySample> heldout;
};

// Every other scene gets a conflict prompt; a seeded 20% is held out.
DemoSplit demo_samples(const RunConfig& config, const toy::ToyDims& dims) {
    std::vector<Scene> scenes;
    if (!config.dataset.empty() && fs::exists(config.dataset / "index.jsonl")) {
        for (const auto& e : read_index(config.dataset)) {
            const fs::path p = config.dataset / e.manifest;
            scenes.push_back(parse_manifest(slurp(p), p).scene);
        }
    } else {
        for (const auto& code : config.cases) {
            for (int k = 0; k < config.n_per_case; ++k) {
                try {
                    scenes.push_back(
                        sample_scene(code, count_for_index(k), config.grid, sample_seed(config.seed, code, k)));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Infeasible) throw;
                }
            }
        }
    }
    if (scenes.size() < 2) throw Error(ErrorKind::InvalidArgument, "mas-demo needs at least two scenes");

    Rng rng(derive_seed(config.seed, 0xde70));
    std::vector<std::size_t> order(scenes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);
    const std::size_t n_heldout = std::max<std::size_t>(1, scenes.size() / 5);

    DemoSplit split;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t i = order[r];
        const Scene& s = scenes[i];
        const std::string obj = object_name(s);
        const std::string text =
            i % 2 == 0 ? standard_prompt(obj) : conflict_prompt("", obj, s.count, draw_conflict_delta(rng)).text;
        (r < n_heldout ? split.heldout : split.train).push_back(toy::make_sample(s, text, dims));
    }
    return split;
}

double argmax_accuracy(const toy::ToyModel& model, std::span<const toy::ToySample> samples) {
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const toy::Forward f = toy::forward(model, s);
        Eigen::Index best = 0;
        f.logits.maxCoeff(&best);
        correct += (static_cast<int>(best) + toy::kFirstCountClass == s.label) ? 1 : 0;
    }
    return samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
}

ojson run_json(const toy::TrainResult& r, std::span<const toy::ToySample> heldout, const MasConfig& scoring) {
    const toy::LossBreakdown h = toy::evaluate_loss(r.model, heldout, scoring);
    const toy::EpochStats& last = r.trajectory.back();
    ojson j;
    j["final_train"] = {{"ce", last.ce}, {"mas_mean", last.mas_mean}, {"l_mas", last.l_mas}, {"l_total", last.l_total}};
    j["heldout"] = {{"ce", h.ce},
                    {"mas_mean", h.mas},
                    {"l_mas", h.l_mas},
                    {"accuracy", argmax_accuracy(r.model, heldout)}};
    return j;
}

}  // namespace

DemoResult cmd_mas_demo(const RunConfig& config) {
    config.validate();
    const toy::ToyDims dims;
    const DemoSplit split = demo_samples(config, dims);

    MasConfig with_mas;
    with_mas.tau = config.tau;
    with_mas.lambda = config.lambda;
    MasConfig without = with_mas;
    without.lambda = 0.0;

    toy::TrainOptions opts;
    opts.epochs = config.epochs;
    opts.seed = config.seed;

    DemoResult res{toy::train(split.train, without, opts, dims), toy::train(split.train, with_mas, opts, dims), {}};

    // Both runs are scored with the same tau so l_mas is comparable.
    ojson s;
    s["config"] = config_json(config);
    s["n_train"] = split.train.size();
    s["n_heldout"] = split.heldout.size();
    s["parameters"] = res.baseline.model.parameter_count();
    s["baseline"] = run_json(res.baseline, split.heldout, with_mas);
    s["mas"] = run_json(res.regularized, split.heldout, with_mas);
    const double base_mas = s["baseline"]["heldout"]["mas_mean"].get<double>();
    const double reg_mas = s["mas"]["heldout"]["mas_mean"].get<double>();
    const double base_ce = s["baseline"]["heldout"]["ce"].get<double>();
    const double reg_ce = s["mas"]["heldout"]["ce"].get<double>();
    s["heldout_mas_uplift"] = reg_mas - base_mas;
    s["heldout_ce_relative_change"] = base_ce != 0.0 ? (reg_ce - base_ce) / base_ce : 0.0;
    res.summary = std::move(s);

    if (!config.out.empty()) {
        write_text(config.out / "trajectory_baseline.jsonl", toy::trajectory_jsonl(res.baseline.trajectory));
        write_text(config.out / "trajectory_mas.jsonl", toy::trajectory_jsonl(res.regularized.trajectory));
        write_text(config.out / "mas_demo_summary.json", res.summary.dump(2) + "\n");
        toy::save_checkpoint(res.baseline.model, config.out / "model_baseline");
        toy::save_checkpoint(res.regularized.model, config.out / "model_mas");
    }
    return res;
}

std::vector<ProbeRow> cmd_probe_params(std::span<const std::int64_t> c_in) {
    std::vector<ProbeRow> rows;
    for (auto c : c_in) rows.push_back({c, toy::probe_param_count({.c_in = c})});
    return rows;
}

std::string probe_table(std::span<const ProbeRow> rows) {
    std::string out = "c_in      bottleneck        head       total\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-8lld %11lld %11lld %11lld  (~%.2fM)\n", static_cast<long long>(r.c_in),
                      static_cast<long long>(r.params.bottleneck), static_cast<long long>(r.params.head),
                      static_cast<long long>(r.params.total), static_cast<double>(r.params.total) / 1e6);
        out += buf;
    }
    return out;
}

}  // namespace ctricks::harness
