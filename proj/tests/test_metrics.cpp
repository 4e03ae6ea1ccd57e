#include <algorithm>
#include <cmath>

#include "ctricks/error.hpp"
#include "ctricks/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctricks;

TEST_CASE("parse_count") {
    CHECK(parse_count("There are five red apples", "apples") == 5);
    CHECK(parse_count("circles: 7", "circles") == 7);
    CHECK(parse_count("I count twelve, maybe 13", "circles") == 12);
    CHECK(parse_count("Maybe 4. circles: 9", "circles") == 9);
    CHECK(parse_count("twenty one things", "x") == 21);
    CHECK_FALSE(parse_count("no idea", "circles").has_value());
    CHECK_FALSE(parse_count("", "circles").has_value());
}

TEST_CASE("accuracy scoring") {
    CHECK(response_correct("There are five red apples", 5));
    CHECK_FALSE(response_correct("There are four red apples", 5));
    CHECK_FALSE(response_correct("I see 120 dots", 12));
    CHECK(response_correct("circles: 12.", 12));
    CHECK(response_correct("Twelve", 12));
    CHECK_FALSE(response_correct("fivefold", 5));

    GroundTruth gt{{"a", 5}, {"b", 7}};
    std::vector<ModelResponse> rs{{"a", PromptVariant::Standard, "circles: 5"},
                                  {"b", PromptVariant::Standard, "circles: 8"}};
    CHECK(accuracy(rs, gt) == 0.5);
    CHECK(accuracy(std::span<const ModelResponse>{}, gt) == 0.0);
    rs.push_back({"zzz", PromptVariant::Standard, "1"});
    try {
        accuracy(rs, gt);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnmatchedSample);
    }
}

TEST_CASE("per-count breakdown exposes zero-accuracy counts") {
    GroundTruth gt;
    std::vector<ModelResponse> rs;
    for (int c = 3; c <= 12; ++c) {
        for (int k = 0; k < 4; ++k) {
            const std::string id = std::to_string(c) + "_" + std::to_string(k);
            gt[id] = c;
            // count 7 is never produced, everything else right
            rs.push_back({id, PromptVariant::Standard, "shapes: " + std::to_string(c == 7 ? 6 : c)});
        }
    }
    const auto table = per_count_breakdown(rs, gt);
    CHECK(table.size() == 10);
    CHECK(table.at(7) == 0.0);
    CHECK(table.at(5) == 1.0);
    CHECK(per_count_breakdown(std::span<const ModelResponse>{}, gt).empty());
}

TEST_CASE("pearson") {
    std::vector<double> xs, ys;
    for (int c = 3; c <= 12; ++c) {
        xs.push_back(c);
        ys.push_back(1.0 - (c - 3) / 9.0);
    }
    CHECK(std::abs(pearson_corr(xs, ys) + 1.0) <= 1e-9);
    CHECK(std::abs(pearson_corr(xs, xs) - 1.0) <= 1e-12);
    std::vector<double> flat(xs.size(), 0.5);
    CHECK_THROWS_AS(pearson_corr(xs, flat), Error);
    CHECK_THROWS_AS(pearson_corr(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("top-k binarization") {
    AttnGrid u{2, 2, {1, 1, 1, 1}};
    const CellMask m = binarize_topk(u, 25);
    CHECK(m.set_count() == 1);
    CHECK(m.bits[0] == 1);

    AttnGrid hot{8, 8, std::vector<double>(64, 0.0)};
    hot.values[37] = 1.0;
    const CellMask h = binarize_topk(hot, 10);
    CHECK(topk_cell_count(64, 10) == 7);
    CHECK(h.set_count() == 7);
    CHECK(h.bits[37] == 1);
    for (int i = 0; i < 6; ++i) CHECK(h.bits[i] == 1);
    CHECK(h.bits[6] == 0);

    CHECK(binarize_topk(hot, 100).set_count() == 64);
    CHECK(topk_cell_count(256, 10) == 26);
}

TEST_CASE("attn_iou examples") {
    const PatchGrid pg{64, 8};
    Mask gt(64, 64);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) gt.set(x, y);  // cells (0,0),(0,1),(1,0),(1,1)
    AttnGrid same{8, 8, std::vector<double>(64, 0.0)};
    for (int i : {0, 1, 8, 9}) same.values[i] = 1.0;
    CHECK(attn_iou(same, std::vector<Mask>{gt}, pg, 100.0 * 4 / 64) == 1.0);

    AttnGrid disjoint{8, 8, std::vector<double>(64, 0.0)};
    for (int i : {60, 61, 62, 63}) disjoint.values[i] = 1.0;
    CHECK(attn_iou(disjoint, std::vector<Mask>{gt}, pg, 100.0 * 4 / 64) == 0.0);

    AttnGrid half{8, 8, std::vector<double>(64, 0.0)};
    for (int i : {1, 9, 2, 10}) half.values[i] = 1.0;
    CHECK(attn_iou(half, std::vector<Mask>{gt}, pg, 100.0 * 4 / 64) == doctest::Approx(1.0 / 3.0));

    AttnGrid wrong{4, 4, std::vector<double>(16, 0.0)};
    CHECK_THROWS_AS(attn_iou(wrong, std::vector<Mask>{gt}, pg, 10), Error);
}

TEST_CASE("attn_iou equals the pixel-set oracle on random 8x8 fixtures") {
    Rng rng(17);
    const PatchGrid pg{64, 8};
    for (int t = 0; t < 300; ++t) {
        AttnGrid g{8, 8, std::vector<double>(64)};
        // coarse values force plenty of ties
        for (auto& v : g.values) v = static_cast<double>(uniform_index(rng, 4));
        std::vector<Mask> gt;
        const int n = 1 + static_cast<int>(uniform_index(rng, 3));
        for (int i = 0; i < n; ++i) {
            const ObjectSpec o{static_cast<Shape>(uniform_index(rng, 3)), 0,
                               {uniform(rng, 4, 60), uniform(rng, 4, 60)}, uniform(rng, 2, 20)};
            gt.push_back(rasterize(o, 64));
        }
        const double k = std::vector<double>{5, 10, 25, 50, 100}[uniform_index(rng, 5)];
        CAPTURE(t);
        REQUIRE(attn_iou(g, gt, pg, k) == oracle::attn_iou(g, gt, 8, k));
    }
}

TEST_CASE("PR curve and AP examples") {
    const BoxF gt{0, 0, 10, 10};
    std::vector<Detection> one{{{0, 0, 10, 10}, 0.9, 0}};
    auto c = pr_curve(one, std::vector<BoxF>{gt});
    REQUIRE(c.size() == 1);
    CHECK(c[0].precision == 1.0);
    CHECK(c[0].recall == 1.0);
    CHECK(ap(c) == 1.0);

    std::vector<Detection> fp_tp{{{50, 50, 60, 60}, 0.9, 0}, {{0, 0, 10, 10}, 0.8, 0}};
    c = pr_curve(fp_tp, std::vector<BoxF>{gt});
    REQUIRE(c.size() == 2);
    CHECK(c[0].precision == 0.0);
    CHECK(c[0].recall == 0.0);
    CHECK(c[1].precision == 0.5);
    CHECK(c[1].recall == 1.0);
    CHECK(ap(c) == 0.5);

    CHECK(pr_curve(std::span<const Detection>{}, std::vector<BoxF>{gt}).empty());
    CHECK(ap(std::span<const PRPoint>{}) == 0.0);
}

TEST_CASE("AP equals brute-force evaluation on small fixtures") {
    Rng rng(23);
    for (int t = 0; t < 2000; ++t) {
        const int ng = static_cast<int>(uniform_index(rng, 4));
        const int nd = static_cast<int>(uniform_index(rng, 5));
        std::vector<BoxF> gts;
        for (int i = 0; i < ng; ++i) {
            const double x = uniform(rng, 0, 30), y = uniform(rng, 0, 30);
            gts.push_back({x, y, x + uniform(rng, 5, 15), y + uniform(rng, 5, 15)});
        }
        std::vector<Detection> dets;
        for (int i = 0; i < nd; ++i) {
            BoxF b;
            if (ng > 0 && uniform01(rng) < 0.7) {
                const BoxF& g = gts[uniform_index(rng, ng)];
                const double jx = uniform(rng, -4, 4), jy = uniform(rng, -4, 4);
                b = {g.x0 + jx, g.y0 + jy, g.x1 + jx, g.y1 + jy};
            } else {
                const double x = uniform(rng, 0, 30), y = uniform(rng, 0, 30);
                b = {x, y, x + 10, y + 10};
            }
            // a few exact confidence ties exercise the stable order
            dets.push_back({b, static_cast<double>(uniform_index(rng, 3)) / 2.0, 0});
        }
        CAPTURE(t);
        REQUIRE(ap(pr_curve(dets, gts)) == doctest::Approx(oracle::ap(dets, gts, 0.5).value()).epsilon(1e-12));
    }
}

TEST_CASE("box iou") {
    CHECK(box_iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
    CHECK(box_iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
    const BoxF f = to_boxf(Box{13, 13, 15, 15});
    CHECK(f.x0 == 13.0);
    CHECK(f.x1 == 15.0);
}

TEST_CASE("parse_count is total on arbitrary bytes") {
    Rng rng(31);
    const std::string pieces[] = {"twenty", "-", " ", "one", "12", "circles", ":", "\xc3\xa9", "\xff", "0", "thirty"};
    for (int t = 0; t < 20000; ++t) {
        std::string s;
        const int n = static_cast<int>(uniform_index(rng, 12));
        for (int i = 0; i < n; ++i) {
            if (uniform01(rng) < 0.5) s += static_cast<char>(uniform_index(rng, 256));
            else s += pieces[uniform_index(rng, std::size(pieces))];
        }
        CHECK_NOTHROW(parse_count(s, "circles"));
        CHECK_NOTHROW(scan_numbers(s));
        CHECK_NOTHROW(response_correct(s, 7));
    }
}

TEST_CASE("top-k keeps exactly ceil(k% of cells)") {
    Rng rng(8);
    for (int t = 0; t < 500; ++t) {
        const int r = 1 + static_cast<int>(uniform_index(rng, 16));
        const int c = 1 + static_cast<int>(uniform_index(rng, 16));
        AttnGrid g{r, c, std::vector<double>(static_cast<std::size_t>(r) * c)};
        for (auto& v : g.values) v = static_cast<double>(uniform_index(rng, 3));
        const double k = uniform(rng, 0.5, 100.0);
        const auto want = static_cast<std::size_t>(std::ceil(k / 100.0 * r * c - 1e-9));
        CHECK(binarize_topk(g, k).set_count() == std::max<std::size_t>(want, 1));
    }
}
