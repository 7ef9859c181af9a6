#include <doctest.h>

#include <cmath>
#include <set>

#include "dig/io.hpp"
#include "dig/rng.hpp"
#include "dig/scene.hpp"

using namespace dig;

TEST_CASE("generate_scene is deterministic in its seed") {
    const SceneConfig a = generate_scene(7, 3, 8);
    const SceneConfig b = generate_scene(7, 3, 8);
    CHECK(a.objects == b.objects);
    CHECK(a.seed == b.seed);
}

TEST_CASE("generate_scene honors a degenerate count range") {
    const SceneConfig s = generate_scene(7, 1, 1);
    CHECK(s.objects.size() == 1);
}

TEST_CASE("generate_scene rejects out-of-range counts") {
    CHECK_THROWS_AS(generate_scene(1, 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(generate_scene(1, 3, 13), std::invalid_argument);
    CHECK_THROWS_AS(generate_scene(1, 5, 3), std::invalid_argument);
}

TEST_CASE("generated scenes satisfy separation and id invariants") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const SceneConfig s = generate_scene(seed, 3, 8);
        REQUIRE(s.objects.size() >= 3);
        REQUIRE(s.objects.size() <= 8);
        for (std::size_t i = 0; i < s.objects.size(); ++i) {
            const auto& a = s.objects[i];
            CHECK(a.id == static_cast<int>(i));
            CHECK(std::abs(a.x) <= s.world_half_extent);
            CHECK(std::abs(a.y) <= s.world_half_extent);
            for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
                const auto& b = s.objects[j];
                const double dist = std::hypot(a.x - b.x, a.y - b.y);
                CHECK(dist >= kMinSeparationFactor * (a.radius() + b.radius()));
            }
        }
    }
}

TEST_CASE("sample_modifications targets are distinct and visible") {
    const SceneConfig scene = generate_scene(11, 4, 4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto mods =
            sample_modifications(scene, 4, seed, ModOptions{false, 0});
        REQUIRE(mods.size() == 4);
        std::set<int> targets;
        for (const auto& mod : mods) {
            REQUIRE(mod.target_id.has_value());
            targets.insert(*mod.target_id);
            if (mod.kind != ModKind::Remove) {
                // Exactly one attribute must differ.
                const auto& before = mod.before.value();
                const auto& after = mod.after.value();
                int diffs = 0;
                diffs += before.shape != after.shape;
                diffs += before.color != after.color;
                diffs += before.size != after.size;
                diffs += before.material != after.material;
                CHECK(diffs == 1);
                CHECK(before.x == after.x);
                CHECK(before.y == after.y);
            }
        }
        CHECK(targets.size() == 4);
    }
}

TEST_CASE("color change never resamples the current color") {
    const SceneConfig scene = generate_scene(3, 3, 3);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        for (const auto& mod : sample_modifications(scene, 1, seed)) {
            if (mod.kind == ModKind::ColorChange) {
                CHECK(mod.before->color != mod.after->color);
            }
        }
    }
}

TEST_CASE("sample_modifications rejects an infeasible budget") {
    const SceneConfig scene = generate_scene(5, 1, 1);
    CHECK_THROWS_AS(sample_modifications(scene, 3, 0, ModOptions{false, 0}),
                    InfeasibleEditBudget);
}

TEST_CASE("apply_modifications identity and removal") {
    const SceneConfig scene = generate_scene(13, 5, 5);
    CHECK(same_objects(apply_modifications(scene, {}), scene));

    Modification remove;
    remove.kind = ModKind::Remove;
    remove.target_id = 2;
    remove.before = *scene.find(2);
    const SceneConfig out = apply_modifications(scene, {remove});
    CHECK(out.objects.size() == 4);
    CHECK(out.find(2) == nullptr);
}

TEST_CASE("apply_modifications round-trips an inverse edit") {
    const SceneConfig scene = generate_scene(17, 3, 3);
    Modification grow;
    grow.kind = ModKind::SizeChange;
    grow.target_id = 0;
    grow.before = *scene.find(0);
    grow.after = grow.before;
    grow.after->size = grow.before->size == SizeClass::Large ? SizeClass::Small
                                                             : SizeClass::Large;
    Modification shrink = grow;
    std::swap(shrink.before, shrink.after);
    const SceneConfig there = apply_modifications(scene, {grow});
    const SceneConfig back = apply_modifications(there, {shrink});
    CHECK(same_objects(back, scene));
}

TEST_CASE("apply_modifications surfaces unknown targets") {
    const SceneConfig scene = generate_scene(19, 3, 3);
    Modification mod;
    mod.kind = ModKind::Remove;
    mod.target_id = 99;
    mod.before = scene.objects[0];
    CHECK_THROWS_AS(apply_modifications(scene, {mod}), UnknownTarget);
}

TEST_CASE("make_pair pins k with n_max=1 and count_override") {
    CHECK(make_pair(5, 1).k == 1);
    CHECK(make_pair(5, 4, 2).k == 2);
    CHECK_THROWS_AS(make_pair(5, 4, 9), std::invalid_argument);
}

TEST_CASE("make_pair replay invariant and distinct targets") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const PairSpec pair = make_pair(seed, 4);
        CHECK(pair.k == static_cast<int>(pair.mods.size()));
        CHECK(same_objects(apply_modifications(pair.base, pair.mods), pair.edited));
        std::set<int> targets;
        int non_add = 0;
        for (const auto& mod : pair.mods) {
            if (mod.kind == ModKind::Add) continue;
            ++non_add;
            targets.insert(*mod.target_id);
        }
        CHECK(static_cast<int>(targets.size()) == non_add);
    }
}

TEST_CASE("sampled K is uniform over [1, n_max]") {
    constexpr int kTrials = 10000;
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < kTrials; ++i) {
        counts[make_pair(static_cast<std::uint64_t>(i), 4).k - 1] += 1;
    }
    for (int bin = 0; bin < 4; ++bin) {
        const double freq = static_cast<double>(counts[bin]) / kTrials;
        CHECK(freq == doctest::Approx(0.25).epsilon(0.12));  // +-3% absolute
    }
}

TEST_CASE("scene documents round-trip canonically") {
    const SceneConfig scene = generate_scene(23, 3, 8);
    const std::string doc = scene_to_string(scene);
    const SceneConfig parsed = scene_from_string(doc);
    CHECK(parsed.objects == scene.objects);
    CHECK(parsed.seed == scene.seed);
    CHECK(scene_to_string(parsed) == doc);  // serialize(deserialize(d)) == d
}

TEST_CASE("pair documents round-trip canonically") {
    const PairSpec pair = make_pair(29, 4);
    const std::string doc = pair_to_string(pair);
    const PairSpec parsed = pair_from_string(doc);
    CHECK(pair_to_string(parsed) == doc);
    CHECK(parsed.pair_id == pair.pair_id);
    CHECK(parsed.k == pair.k);
    CHECK(same_objects(parsed.base, pair.base));
    CHECK(same_objects(parsed.edited, pair.edited));
}

TEST_CASE("missing fields produce a ParseError naming the field") {
    const std::string doc = R"({
      "seed": 1,
      "world_half_extent": 3.0,
      "objects": [{"id": 0, "color": "red", "size": "small",
                   "material": "matte", "position": [0.0, 0.0]}]
    })";
    CHECK_THROWS_WITH_AS(scene_from_string(doc),
                         doctest::Contains("shape"), ParseError);
}
