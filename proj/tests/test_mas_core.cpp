#include <cmath>

#include "ctricks/error.hpp"
#include "ctricks/mas_core.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace ctricks;

namespace {

using R = TokenRole;

// Fills every target row with `visual` mass spread evenly over visual keys and
// the remainder over text keys; non-target rows are uniform.
AttentionRecord fixture(int layers, int heads, const std::vector<R>& roles, double visual) {
    AttentionRecord rec(layers, heads, static_cast<int>(roles.size()), roles);
    int nv = 0, nx = 0;
    for (auto r : roles) {
        nv += r == R::Visual;
        nx += r == R::Text;
    }
    for (int l = 0; l < layers; ++l)
        for (int h = 0; h < heads; ++h)
            for (int t = 0; t < rec.steps; ++t) {
                auto row = rec.row(l, h, t);
                for (int k = 0; k < rec.keys; ++k) {
                    if (roles[t] != R::Generated) row[k] = 1.0 / rec.keys;
                    else if (roles[k] == R::Visual) row[k] = visual / nv;
                    else if (roles[k] == R::Text) row[k] = (1.0 - visual) / nx;
                    else row[k] = 0.0;
                }
            }
    return rec;
}

}  // namespace

TEST_CASE("target steps") {
    const std::vector<R> roles{R::Text, R::Text, R::Text, R::Text, R::Text, R::Generated, R::Generated, R::Generated};
    CHECK(select_target_steps(roles) == std::vector<int>{5, 6, 7});
    const std::vector<R> multi{R::Visual, R::Text, R::Generated, R::Generated, R::Text, R::Text};
    CHECK(select_target_steps(multi) == std::vector<int>{2, 3});
    try {
        select_target_steps(std::vector<R>{R::Text, R::Text});
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyTarget);
    }
}

TEST_CASE("mas_layer examples") {
    const std::vector<R> roles{R::Visual, R::Visual, R::Visual, R::Visual, R::Text, R::Text, R::Generated, R::Generated};
    const auto targets = select_target_steps(roles);

    CHECK(mas_layer(fixture(1, 2, roles, 1.0), 0, targets) == 1.0);

    // uniform over |V| = |X| with no generated keys
    const std::vector<R> sym{R::Visual, R::Visual, R::Text, R::Text, R::Generated};
    AttentionRecord u(1, 3, 5, sym);
    for (int h = 0; h < 3; ++h)
        for (int t = 0; t < 5; ++t) {
            auto row = u.row(0, h, t);
            for (int k = 0; k < 4; ++k) row[k] = 0.25;
        }
    CHECK(mas_layer(u, 0, select_target_steps(sym)) == doctest::Approx(0.5).epsilon(1e-15));

    // visual-sink level: about 10.7% of attention on visual tokens
    CHECK(mas_layer(fixture(1, 4, roles, 0.107), 0, targets) == doctest::Approx(0.107).epsilon(1e-12));
}

TEST_CASE("generated keys are outside the default key domain") {
    const std::vector<R> roles{R::Visual, R::Text, R::Generated, R::Generated};
    AttentionRecord rec(1, 1, 4, roles);
    for (int t = 0; t < 4; ++t) {
        auto row = rec.row(0, 0, t);
        row[0] = 0.3;
        row[1] = 0.3;
        row[2] = 0.4;
    }
    const auto targets = select_target_steps(roles);
    CHECK(mas_layer(rec, 0, targets) == doctest::Approx(0.5));
    CHECK(mas_layer(rec, 0, targets, KeyDomain::AllKeys) == doctest::Approx(0.3));

    AttentionRecord dead(1, 1, 4, roles);
    for (int t = 0; t < 4; ++t) dead.row(0, 0, t)[2] = 1.0;
    try {
        mas_layer(dead, 0, targets);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroDenominator);
    }
}

TEST_CASE("mas_mean over layers") {
    const std::vector<R> roles{R::Visual, R::Visual, R::Text, R::Text, R::Generated};
    const auto targets = select_target_steps(roles);
    AttentionRecord two(2, 2, 5, roles);
    const AttentionRecord a = fixture(1, 2, roles, 0.2);
    const AttentionRecord b = fixture(1, 2, roles, 0.6);
    std::copy(a.weights.begin(), a.weights.end(), two.weights.begin());
    std::copy(b.weights.begin(), b.weights.end(), two.weights.begin() + static_cast<long>(a.weights.size()));
    const std::vector<int> both{0, 1};
    CHECK(mas_mean(two, both, targets) == doctest::Approx(0.4));
    const std::vector<int> first{0};
    CHECK(mas_mean(two, first, targets) == mas_layer(two, 0, targets));
    const AttentionRecord same = fixture(3, 2, roles, 0.35);
    CHECK(mas_mean(same, resolve_layers(3, {}), targets) == doctest::Approx(mas_layer(same, 1, targets)));
    try {
        mas_mean(two, std::vector<int>{}, targets);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyLayerSet);
    }
    CHECK_THROWS_AS(resolve_layers(2, std::vector<int>{2}), Error);
}

TEST_CASE("hinge and total loss") {
    CHECK(hinge_loss(0.5, 0.4) == 0.0);
    CHECK(hinge_loss(0.1, 0.4) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(hinge_loss(0.0, 0.4) == 0.4);
    CHECK(hinge_slope(0.1, 0.4) == -1.0);
    CHECK(hinge_slope(0.4, 0.4) == 0.0);
    CHECK(hinge_slope(0.5, 0.4) == 0.0);
    CHECK(total_loss(2.0, hinge_loss(0.3, 0.4), 0.1) == doctest::Approx(2.01));
    CHECK(total_loss(2.0, 0.3, 0.1) == doctest::Approx(2.03));
    CHECK(total_loss(2.0, 0.3, 0.0) == 2.0);
    CHECK(total_loss(2.0, 0.0, 0.1) == 2.0);
}

TEST_CASE("record validation") {
    const std::vector<R> roles{R::Visual, R::Text, R::Generated};
    AttentionRecord rec = fixture(1, 1, roles, 0.5);
    CHECK_NOTHROW(rec.validate());
    rec.row(0, 0, 2)[0] += 0.01;
    CHECK_THROWS_AS(rec.validate(), Error);
}

TEST_CASE("attention record file round trip") {
    testutil::TempDir tmp("mas");
    const std::vector<R> roles{R::Visual, R::Visual, R::Visual, R::Visual, R::Text, R::Generated};
    const AttentionRecord rec = fixture(2, 2, roles, 0.25);
    const auto header = tmp.path / "rec.json";
    write_attention_record(rec, header);
    const AttentionRecord back = read_attention_record(header);
    CHECK(back.layers == 2);
    CHECK(back.roles == roles);
    REQUIRE(back.weights.size() == rec.weights.size());
    for (std::size_t i = 0; i < rec.weights.size(); ++i) {
        CHECK(back.weights[i] == static_cast<double>(static_cast<float>(rec.weights[i])));
    }

    const auto j = nlohmann::json::parse(testutil::read_file(header));
    CHECK(j["dtype"] == "f32");
    CHECK(j["byte_order"] == "little-endian");
    const auto payload = tmp.path / j["payload"].get<std::string>();

    SUBCASE("tampered payload") {
        std::string bytes = testutil::read_file(payload);
        bytes[3] ^= 0x10;
        testutil::write_file(payload, bytes);
        try {
            read_attention_record(header);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::CorruptPayload);
        }
    }
    SUBCASE("missing payload") {
        std::filesystem::remove(payload);
        try {
            read_attention_record(header);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MissingArtifact);
        }
    }
}

TEST_CASE("sha256") {
    const std::string abc = "abc";
    CHECK(sha256_hex(std::span(reinterpret_cast<const unsigned char*>(abc.data()), abc.size())) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("visual attention grid") {
    std::vector<R> roles(4, R::Visual);
    roles.push_back(R::Text);
    roles.push_back(R::Generated);
    AttentionRecord rec(1, 1, 6, roles);
    for (int t = 0; t < 6; ++t) {
        auto row = rec.row(0, 0, t);
        row[0] = 0.1;
        row[3] = 0.5;
        row[4] = 0.4;
    }
    const AttnGrid g = visual_attention_grid(rec, resolve_layers(1, {}), select_target_steps(roles), 2);
    CHECK(g.rows == 2);
    CHECK(g.at(0, 0) == doctest::Approx(0.1));
    CHECK(g.at(1, 1) == doctest::Approx(0.5));
    CHECK(g.at(0, 1) == 0.0);
}

TEST_CASE("mas_layer invariances and monotonicity") {
    const std::vector<R> roles{R::Visual, R::Visual, R::Visual, R::Text, R::Text, R::Generated, R::Generated};
    const auto targets = select_target_steps(roles);
    Rng rng(3);
    AttentionRecord rec(1, 3, 7, roles);
    for (int h = 0; h < 3; ++h)
        for (int t = 0; t < 7; ++t) {
            auto row = rec.row(0, h, t);
            double s = 0;
            for (auto& v : row) s += (v = uniform(rng, 0.01, 1.0));
            for (auto& v : row) v /= s;
        }
    const double base = mas_layer(rec, 0, targets);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);

    AttentionRecord heads = rec;  // swap heads 0 and 2
    for (int t = 0; t < 7; ++t) {
        auto a = heads.row(0, 0, t);
        auto b = heads.row(0, 2, t);
        std::swap_ranges(a.begin(), a.end(), b.begin());
    }
    CHECK(mas_layer(heads, 0, targets) == doctest::Approx(base).epsilon(1e-14));

    AttentionRecord within = rec;  // swap two visual keys and the two text keys
    for (int h = 0; h < 3; ++h)
        for (int t = 0; t < 7; ++t) {
            auto row = within.row(0, h, t);
            std::swap(row[0], row[2]);
            std::swap(row[3], row[4]);
        }
    CHECK(mas_layer(within, 0, targets) == doctest::Approx(base).epsilon(1e-14));

    AttentionRecord moved = rec;  // text -> visual mass transfer
    for (int h = 0; h < 3; ++h) {
        auto row = moved.row(0, h, 5);
        const double m = row[4] / 2;
        row[4] -= m;
        row[1] += m;
    }
    CHECK(mas_layer(moved, 0, targets) >= base);
}

TEST_CASE("hinge slope matches finite differences away from the kink") {
    for (double m : {0.0, 0.1, 0.39, 0.41, 0.7, 1.0}) {
        const double e = 1e-6;
        const double fd = (hinge_loss(m + e, 0.4) - hinge_loss(m - e, 0.4)) / (2 * e);
        CHECK(std::abs(fd - hinge_slope(m, 0.4)) <= 1e-8);
    }
}
