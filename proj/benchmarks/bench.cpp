#include <benchmark/benchmark.h>

#include "dig/curriculum.hpp"
#include "dig/grpo.hpp"
#include "dig/png.hpp"
#include "dig/render.hpp"
#include "dig/reward.hpp"
#include "dig/rng.hpp"
#include "dig/scene.hpp"

using namespace dig;

namespace {

std::vector<BBox> random_boxes(Rng& rng, int count) {
    std::vector<BBox> boxes;
    for (int i = 0; i < count; ++i) {
        const int x0 = static_cast<int>(rng.uniform_int(0, 254));
        const int y0 = static_cast<int>(rng.uniform_int(0, 254));
        const int x1 = static_cast<int>(rng.uniform_int(x0 + 1, 256));
        const int y1 = static_cast<int>(rng.uniform_int(y0 + 1, 256));
        boxes.push_back(BBox{x0, y0, x1, y1});
    }
    return boxes;
}

void BM_RenderScene(benchmark::State& state) {
    const SceneConfig scene = generate_scene(1, 8, 8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_scene(scene));
    }
}
BENCHMARK(BM_RenderScene);

void BM_MakePair(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(make_pair(seed++, 4));
    }
}
BENCHMARK(BM_MakePair);

void BM_EncodePng(benchmark::State& state) {
    const Image img = render_scene(generate_scene(2, 8, 8));
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_png(img));
    }
}
BENCHMARK(BM_EncodePng);

void BM_HungarianMatch(benchmark::State& state) {
    Rng rng(3);
    const int n = static_cast<int>(state.range(0));
    const auto pred = random_boxes(rng, n);
    const auto gt = random_boxes(rng, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hungarian_match(pred, gt));
    }
}
BENCHMARK(BM_HungarianMatch)->Arg(4)->Arg(8)->Arg(16);

void BM_TotalReward(benchmark::State& state) {
    Rng rng(4);
    const auto gt = random_boxes(rng, 4);
    const std::string text = "[[10,20,40,60],[100,100,140,130],[5,200,30,220]]";
    for (auto _ : state) {
        benchmark::DoNotOptimize(total_reward(text, gt));
    }
}
BENCHMARK(BM_TotalReward);

void BM_TrainBatch(benchmark::State& state) {
    GridEnv env;
    StageSpec stage;
    stage.name = "dig1";
    stage.k_rule = KRule{true, 1, 4};
    stage.n_pairs = 1;
    const auto data = stage_dataset(stage, 5);
    TrainSample sample;
    sample.features =
        featurize(data[0].image_a, data[0].image_b, data[0].count_hint, env);
    for (const auto& b : data[0].annotation.boxes) sample.gt.push_back(b.box);

    PolicyParams params = init_policy(FeatureMatrix::kDim, 32, 6);
    const PolicyParams ref = params;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_batch(params, ref, {sample}, env,
                                             RewardConfig{}, GrpoConfig{},
                                             seed++));
    }
}
BENCHMARK(BM_TrainBatch);

}  // namespace

BENCHMARK_MAIN();
