#include <set>

#include "ctricks/error.hpp"
#include "ctricks/harness.hpp"
#include "ctricks/raster.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace ctricks;
namespace h = ctricks::harness;
namespace fs = std::filesystem;

namespace {

h::RunConfig gen_config(const fs::path& out, const std::string& cases, int n) {
    h::RunConfig c;
    c.command = "generate";
    c.cases = h::parse_case_list(cases);
    c.n_per_case = n;
    c.seed = 5;
    c.out = out;
    return c;
}

std::string response_lines(const std::vector<h::IndexEntry>& index, auto answer) {
    std::string out;
    for (const auto& e : index) {
        nlohmann::json j{{"sample_id", e.id}, {"variant", "standard"}, {"raw_text", answer(e)}};
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("case list parsing") {
    CHECK(h::parse_case_list("all").size() == 32);
    CHECK(h::parse_case_list("1A,9B").size() == 2);
    CHECK(h::parse_case_list("1A, 1A").size() == 1);
    CHECK_THROWS_AS(h::parse_case_list("1A,1C"), Error);
    CHECK(h::parse_int_list("-2,-1,1,2") == std::vector<int>{-2, -1, 1, 2});
    CHECK(h::parse_int_list("").empty());
    CHECK_THROWS_AS(h::parse_int_list("1,x"), Error);
    CHECK(h::sample_id({12, 'B'}, 7) == "12B_0007");
}

TEST_CASE("generate 1A n=10 covers every count once") {
    testutil::TempDir tmp("gen1a");
    const auto s = h::cmd_generate(gen_config(tmp.path, "1A", 10));
    CHECK(s.written == 10);
    CHECK(s.skipped.empty());
    const auto index = h::read_index(tmp.path);
    std::multiset<int> counts;
    for (const auto& e : index) counts.insert(e.count);
    CHECK(counts == std::multiset<int>{3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    for (const auto& e : index) {
        const auto r = read_sample(tmp.path / "1A", e.id);
        CHECK(r.scene.count == e.count);
        CHECK(validate_scene(r.scene).ok());
    }
}

TEST_CASE("generate all n=1 gives 32 samples in 32 directories") {
    testutil::TempDir tmp("genall");
    auto cfg = gen_config(tmp.path, "all", 1);
    cfg.conflict_deltas = {-1, 1};
    const auto s = h::cmd_generate(cfg);
    CHECK(s.written == 32);
    int dirs = 0;
    for (const auto& d : fs::directory_iterator(tmp.path)) dirs += d.is_directory();
    CHECK(dirs == 32);
    const std::string prompts = testutil::read_file(tmp.path / "prompts.jsonl");
    CHECK(std::count(prompts.begin(), prompts.end(), '\n') == 32 * 3);
}

TEST_CASE("invalid case rejected before anything is written") {
    testutil::TempDir tmp("genbad");
    const fs::path out = tmp.path / "ds";
    CHECK_THROWS_AS(gen_config(out, "1A,1C", 2), Error);
    auto bad_grid = gen_config(out, "1A", 2);
    bad_grid.grid = {448, 27};
    CHECK_THROWS_AS(h::cmd_generate(bad_grid), Error);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("evaluate fixtures") {
    testutil::TempDir tmp("eval");
    const fs::path ds = tmp.path / "ds";
    h::cmd_generate(gen_config(ds, "1A,2B", 20));
    const auto index = h::read_index(ds);
    REQUIRE(index.size() == 40);

    h::RunConfig cfg;
    cfg.command = "evaluate";
    cfg.dataset = ds;
    cfg.responses = tmp.path / "r.jsonl";

    SUBCASE("all right") {
        testutil::write_file(cfg.responses, response_lines(index, [](const h::IndexEntry& e) {
                                 return "shapes: " + std::to_string(e.count);
                             }));
        const auto r = h::cmd_evaluate(cfg);
        CHECK(r.exit_code == h::kExitOk);
        CHECK(r.report["overall_accuracy"] == 1.0);
        CHECK(r.report["per_case"]["1A"] == 1.0);
    }
    SUBCASE("all off by one") {
        testutil::write_file(cfg.responses, response_lines(index, [](const h::IndexEntry& e) {
                                 return "shapes: " + std::to_string(e.count + 1);
                             }));
        CHECK(h::cmd_evaluate(cfg).report["overall_accuracy"] == 0.0);
    }
    SUBCASE("linear decay gives r = -1, zero-accuracy counts surface") {
        // Nine copies of each response, 12 - c of them right: accuracy 1 - (c-3)/9.
        std::string lines;
        for (const auto& e : index) {
            for (int rep = 0; rep < 9; ++rep) {
                const bool right = rep < 12 - e.count;
                nlohmann::json j{{"sample_id", e.id},
                                 {"variant", "standard"},
                                 {"raw_text", "shapes: " + std::to_string(right ? e.count : e.count + 1)}};
                lines += j.dump() + "\n";
            }
        }
        testutil::write_file(cfg.responses, lines);
        const auto r = h::cmd_evaluate(cfg);
        CHECK(r.report["pearson_r"].get<double>() == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(r.report["per_count"]["12"] == 0.0);
        CHECK(r.report["per_count"]["3"] == 1.0);
    }
    SUBCASE("partial coverage and unmatched ids") {
        std::vector<h::IndexEntry> half(index.begin(), index.begin() + 10);
        std::string lines = response_lines(half, [](const h::IndexEntry& e) { return std::to_string(e.count); });
        lines += "{\"sample_id\":\"nope\",\"variant\":\"standard\",\"raw_text\":\"3\"}\n";
        testutil::write_file(cfg.responses, lines);
        const auto r = h::cmd_evaluate(cfg);
        CHECK(r.exit_code == h::kExitPartial);
        CHECK(r.report["unmatched"].size() == 1);
        CHECK(r.report["unanswered_samples"] == 30);
        CHECK(r.report["overall_accuracy"] == 1.0);
    }
    SUBCASE("attention grids") {
        testutil::write_file(cfg.responses, response_lines(index, [](const h::IndexEntry&) { return "3"; }));
        std::string lines;
        for (const auto& e : index) {
            nlohmann::json j{{"sample_id", e.id}, {"grid", std::vector<double>(256, 1.0)}};
            lines += j.dump() + "\n";
        }
        cfg.attn = tmp.path / "attn.jsonl";
        testutil::write_file(cfg.attn, lines);
        const auto r = h::cmd_evaluate(cfg);
        CHECK(r.report["attn_iou"]["n"] == 40);
        const double mean = r.report["attn_iou"]["mean"].get<double>();
        CHECK(mean >= 0.0);
        CHECK(mean < 1.0);
    }
}

TEST_CASE("generate is byte-for-byte reproducible") {
    testutil::TempDir a("det_a");
    testutil::TempDir b("det_b");
    h::cmd_generate(gen_config(a.path, "3C,8A,15B", 3));
    h::cmd_generate(gen_config(b.path, "3C,8A,15B", 3));
    std::size_t files = 0;
    for (const auto& f : fs::recursive_directory_iterator(a.path)) {
        if (!f.is_regular_file()) continue;
        const auto rel = fs::relative(f.path(), a.path);
        CHECK(testutil::read_file(f.path()) == testutil::read_file(b.path / rel));
        ++files;
    }
    CHECK(files == 9 * 2 + 3);
}

TEST_CASE("probe table") {
    const std::vector<std::int64_t> cins{1024, 2048};
    const auto rows = h::cmd_probe_params(cins);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].params.total == 1707013);
    CHECK(h::probe_table(rows).find("2231301") != std::string::npos);
}
