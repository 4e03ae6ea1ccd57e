#include <cmath>

#include "ctricks/error.hpp"
#include "ctricks/probe.hpp"
#include "ctricks/prompt_kit.hpp"
#include "ctricks/toy_attn.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ctricks;
using namespace ctricks::toy;

namespace {

std::vector<ToySample> small_batch(int n, std::uint64_t seed) {
    std::vector<ToySample> out;
    const ToyDims dims;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const CaseCode code = all_case_codes()[uniform_index(rng, 32)];
        const int count = 3 + static_cast<int>(uniform_index(rng, 10));
        const Scene s = sample_scene(code, count, PatchGrid{}, seed * 100 + i);
        const std::string text = i % 2 ? standard_prompt(object_name(s))
                                       : conflict_prompt("", object_name(s), count, 1).text;
        out.push_back(make_sample(s, text, dims));
    }
    return out;
}

bool same_model(const ToyModel& a, const ToyModel& b) {
    for (std::size_t i = 0; i < a.parameter_count(); ++i)
        if (a.flat(i) != b.flat(i)) return false;
    return true;
}

}  // namespace

TEST_CASE("sample layout") {
    const Scene s = sample_scene({1, 'A'}, 6, PatchGrid{}, 1);
    const ToySample t = make_sample(s, standard_prompt("shapes"), ToyDims{});
    CHECK(t.label == 6);
    int visual = 0, generated = 0;
    for (auto r : t.roles) {
        visual += r == TokenRole::Visual;
        generated += r == TokenRole::Generated;
    }
    CHECK(visual == 64);
    CHECK(generated == 2);
    int occupancy = 0;
    for (int i = 0; i < 64; ++i) occupancy += t.tokens[i];
    CHECK(occupancy == 6);
    for (int id : t.tokens) CHECK(id < 64);
    CHECK(tokenize_prompt("I can see 6 circles")[3] == vocab::kNumeralBase + 5);
}

TEST_CASE("forward: attention rows are distributions") {
    const ToyModel m = ToyModel::random(ToyDims{}, 3);
    for (const auto& s : small_batch(4, 2)) {
        const Forward f = forward(m, s);
        CHECK(f.logits.size() == 10);
        CHECK_NOTHROW(f.record.validate(1e-6));
        // prefix-LM: answer positions never see later answer positions
        const int T = f.record.keys;
        CHECK(f.record.row(0, 0, T - 2)[T - 1] == 0.0);
    }
}

TEST_CASE("zero model gives uniform rows") {
    const ToyModel m = ToyModel::zeros(ToyDims{});
    const auto batch = small_batch(1, 4);
    const Forward f = forward(m, batch[0]);
    const int T = f.record.keys;
    auto row = f.record.row(1, 2, 0);
    for (int k = 0; k < T - 2; ++k) CHECK(row[k] == doctest::Approx(1.0 / (T - 2)));
    auto last = f.record.row(0, 0, T - 1);
    for (int k = 0; k < T; ++k) CHECK(last[k] == doctest::Approx(1.0 / T));
}

TEST_CASE("swapping two empty visual tokens leaves logits unchanged") {
    const ToyModel m = ToyModel::random(ToyDims{}, 8);
    const Scene s = sample_scene({1, 'A'}, 4, PatchGrid{}, 5);
    ToySample a = make_sample(s, standard_prompt("shapes"), ToyDims{});
    int i = -1, j = -1;
    for (int k = 0; k < 64; ++k) {
        if (a.tokens[k] != 0) continue;
        if (i < 0) i = k;
        else if (j < 0 && k > i + 5) j = k;
    }
    REQUIRE(j > 0);
    ToySample b = a;
    std::swap(b.tokens[i], b.tokens[j]);
    CHECK((forward(m, a).logits - forward(m, b).logits).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite differences: CE only") {
    const ToyModel m = ToyModel::random(ToyDims{}, 11);
    const auto batch = small_batch(3, 6);
    MasConfig cfg;
    cfg.lambda = 0.0;
    const FdReport rep = finite_diff_check(m, batch, cfg, 120, 1e-5, 1);
    CHECK(rep.checked >= 100);
    CHECK(rep.max_rel_error <= 1e-4);
}

TEST_CASE("finite differences: CE + MAS hinge active") {
    const ToyModel m = ToyModel::random(ToyDims{}, 12);
    const auto batch = small_batch(3, 7);
    MasConfig cfg;
    cfg.lambda = 0.1;
    cfg.tau = 0.95;
    REQUIRE(evaluate_loss(m, batch, cfg).l_mas > 0.0);
    const FdReport rep = finite_diff_check(m, batch, cfg, 120, 1e-5, 2);
    CHECK(rep.skipped_kink == 0);
    CHECK(rep.checked >= 100);
    CHECK(rep.max_rel_error <= 1e-4);

    // the MAS term really contributes: gradients differ from CE-only ones
    MasConfig ce = cfg;
    ce.lambda = 0.0;
    CHECK_FALSE(same_model(loss_and_grads(m, batch, cfg).grads, loss_and_grads(m, batch, ce).grads));
}

TEST_CASE("finite differences: kink coordinates are skipped") {
    const ToyModel m = ToyModel::random(ToyDims{}, 13);
    const auto batch = small_batch(2, 8);
    MasConfig cfg;
    cfg.lambda = 0.1;
    cfg.tau = evaluate_loss(m, batch, cfg).mas;  // exactly at the kink
    const FdReport rep = finite_diff_check(m, batch, cfg, 60, 1e-5, 3);
    CHECK(rep.skipped_kink > 0);
    CHECK(rep.kink_coordinates.size() == rep.skipped_kink);
    CHECK(rep.max_rel_error <= 1e-4);
    CHECK_THROWS_AS(finite_diff_check(m, batch, cfg, 1, 1e-2, 0), Error);
}

TEST_CASE("lambda = 0 and inactive hinge give pure CE gradients") {
    const ToyModel m = ToyModel::random(ToyDims{}, 14);
    const auto batch = small_batch(4, 9);
    MasConfig ce;
    ce.lambda = 0.0;
    MasConfig flat;
    flat.lambda = 0.1;
    flat.tau = 0.0;
    const auto g0 = loss_and_grads(m, batch, ce);
    const auto g1 = loss_and_grads(m, batch, flat);
    CHECK(same_model(g0.grads, g1.grads));
    CHECK(g0.loss.total == g1.loss.total);
    CHECK(g0.loss.total == doctest::Approx(evaluate_loss(m, batch, ce).ce).epsilon(1e-12));
}

TEST_CASE("training: deterministic, tau = 0 matches lambda = 0") {
    const auto data = small_batch(24, 10);
    TrainOptions opts;
    opts.epochs = 2;
    opts.seed = 4;
    MasConfig base;
    base.lambda = 0.0;
    MasConfig zero_tau;
    zero_tau.tau = 0.0;

    const TrainResult a = train(data, base, opts);
    const TrainResult b = train(data, base, opts);
    const TrainResult c = train(data, zero_tau, opts);
    CHECK(trajectory_jsonl(a.trajectory) == trajectory_jsonl(b.trajectory));
    CHECK(same_model(a.model, b.model));
    CHECK(same_model(a.model, c.model));
    REQUIRE(a.trajectory.size() == 3);
    CHECK(a.trajectory[2].ce < a.trajectory[0].ce);

    opts.epochs = 0;
    CHECK(train(data, base, opts).trajectory.size() == 1);
    CHECK_THROWS_AS(train(std::span<const ToySample>{}, base, opts), Error);
}

TEST_CASE("checkpoint round trip") {
    testutil::TempDir tmp("toy");
    const ToyModel m = ToyModel::random(ToyDims{}, 21);
    save_checkpoint(m, tmp.path / "model");
    const ToyModel back = load_checkpoint(tmp.path / "model");
    CHECK(same_model(m, back));
    CHECK(back.parameter_count() == m.parameter_count());
}

TEST_CASE("probe parameter counts") {
    const ProbeParams a = probe_param_count({.c_in = 1024});
    CHECK(a.bottleneck == 1024 * 512 + 512 + 2 * 512);
    CHECK(a.head == 512 * 256 * 9 + 256 + 256 * 5 + 5);
    CHECK(a.head == 1181189);
    CHECK(a.total == 1707013);
    const ProbeParams b = probe_param_count({.c_in = 2048});
    CHECK(b.total == 2231301);
    CHECK(b.total - a.total == 524288);
    const ProbeParams c = probe_param_count({.c_in = 512});
    CHECK(c.total == 512 * 512 + 512 + 1024 + 1181189);
    CHECK_THROWS_AS(probe_param_count({.c_in = 0}), Error);
}
