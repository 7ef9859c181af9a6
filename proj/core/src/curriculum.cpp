#include "dig/curriculum.hpp"

#include <stdexcept>

#include "dig/rng.hpp"

namespace dig {

Schedule default_schedule(int n_max, std::vector<int> sizes,
                          std::vector<int> updates, std::uint64_t root_seed) {
    if (n_max < 2) {
        throw std::invalid_argument("n_max must be >= 2 for the mixed stage");
    }
    if (sizes.size() != 3 || updates.size() != 3) {
        throw std::invalid_argument("default schedule takes three stage sizes/updates");
    }
    Schedule schedule;
    schedule.root_seed = root_seed;
    schedule.stages = {
        StageSpec{"dig1", KRule{true, 1, n_max}, true, sizes[0], updates[0]},
        StageSpec{"dig2", KRule{true, 2, n_max}, true, sizes[1], updates[1]},
        StageSpec{"digmix", KRule{false, 0, n_max}, false, sizes[2], updates[2]},
    };
    return schedule;
}

std::vector<DatasetSample> stage_dataset(const StageSpec& stage,
                                         std::uint64_t seed,
                                         const Camera& camera, int width,
                                         int height) {
    std::vector<DatasetSample> out;
    out.reserve(stage.n_pairs);
    for (int i = 0; i < stage.n_pairs; ++i) {
        const std::uint64_t sample_seed = mix_seed(seed, i);
        bool done = false;
        for (int retry = 0; retry < 100 && !done; ++retry) {
            const std::uint64_t pair_seed = mix_seed(sample_seed, retry);
            try {
                const std::optional<int> override_k =
                    stage.k_rule.fixed ? std::optional<int>(stage.k_rule.k)
                                       : std::nullopt;
                PairSpec pair = make_pair(pair_seed, stage.k_rule.n_max, override_k);
                RenderedPair rendered = render_pair(pair, camera, width, height);
                DatasetSample sample;
                sample.count_hint = stage.count_hint_given ? pair.k : 0;
                sample.pair = std::move(pair);
                sample.image_a = std::move(rendered.image_a);
                sample.image_b = std::move(rendered.image_b);
                sample.annotation = std::move(rendered.annotation);
                out.push_back(std::move(sample));
                done = true;
            } catch (const InvisibleDifference&) {
            } catch (const DegenerateBox&) {
            }
        }
        if (!done) {
            throw std::runtime_error("stage '" + stage.name +
                                     "': sample generation failed after 100 retries");
        }
    }
    return out;
}

namespace {

std::vector<BBox> annotation_boxes(const Annotation& ann) {
    std::vector<BBox> boxes;
    boxes.reserve(ann.boxes.size());
    for (const auto& b : ann.boxes) boxes.push_back(b.box);
    return boxes;
}

}  // namespace

EvalMetrics evaluate(const PolicyParams& params,
                     const std::vector<DatasetSample>& dataset,
                     const GridEnv& env, const RewardConfig& reward_cfg,
                     int width, int height) {
    EvalMetrics metrics;
    for (const auto& sample : dataset) {
        const FeatureMatrix features =
            featurize(sample.image_a, sample.image_b, sample.count_hint, env);
        const auto actions = greedy_rollout(params, features, env);
        const auto pred = actions_to_boxes(actions, env, width, height);
        const RewardBreakdown bd =
            score_boxes(pred, annotation_boxes(sample.annotation), reward_cfg);
        for (EvalRow* row : {&metrics.overall, &metrics.per_k[sample.pair.k]}) {
            row->n += 1;
            row->mean_r_acc += bd.r_acc;
            row->mean_f1 += bd.f1;
            row->mean_iou += bd.mean_iou;
        }
    }
    auto finish = [](EvalRow& row) {
        if (row.n == 0) return;
        row.mean_r_acc /= row.n;
        row.mean_f1 /= row.n;
        row.mean_iou /= row.n;
    };
    finish(metrics.overall);
    for (auto& [k, row] : metrics.per_k) finish(row);
    return metrics;
}

CurriculumResult run_curriculum(const Schedule& schedule, PolicyParams params,
                                const GridEnv& env,
                                const RewardConfig& reward_cfg,
                                const GrpoConfig& grpo_cfg,
                                const RunHooks& hooks, int start_stage,
                                int start_step, const Camera& camera, int width,
                                int height) {
    if (schedule.stages.empty()) {
        throw std::invalid_argument("schedule has no stages");
    }
    CurriculumResult result;
    int step = start_step;
    for (std::size_t si = start_stage; si < schedule.stages.size(); ++si) {
        const StageSpec& stage = schedule.stages[si];
        const std::uint64_t train_seed = mix_seed(schedule.root_seed, 1000 + si);
        const std::uint64_t eval_seed = mix_seed(schedule.root_seed, 2000 + si);
        const std::uint64_t pick_seed = mix_seed(schedule.root_seed, 3000 + si);
        const std::uint64_t update_seed = mix_seed(schedule.root_seed, 4000 + si);

        const auto train_ds = stage_dataset(stage, train_seed, camera, width, height);
        StageSpec eval_stage = stage;
        eval_stage.n_pairs = kEvalPairsPerStage;
        const auto eval_ds =
            stage_dataset(eval_stage, eval_seed, camera, width, height);

        // Precompute features and ground truth once per sample.
        std::vector<TrainSample> prepared(train_ds.size());
        for (std::size_t i = 0; i < train_ds.size(); ++i) {
            prepared[i].features = featurize(train_ds[i].image_a,
                                             train_ds[i].image_b,
                                             train_ds[i].count_hint, env);
            prepared[i].gt = annotation_boxes(train_ds[i].annotation);
        }

        const PolicyParams ref_params = params;  // refreshed each stage
        Rng picker(pick_seed);
        for (int u = 0; u < stage.n_updates; ++u) {
            const std::size_t idx = static_cast<std::size_t>(
                picker.uniform_int(0, static_cast<std::int64_t>(prepared.size()) - 1));
            const std::vector<TrainSample> batch{prepared[idx]};
            const BatchStats stats =
                train_batch(params, ref_params, batch, env, reward_cfg, grpo_cfg,
                            mix_seed(update_seed, u), width, height);
            ++step;
            TrainRecord record{step,          stage.name,     stats.mean_r_acc,
                               stats.mean_f1, stats.mean_iou, stats.mean_kl,
                               stats.loss};
            result.log.records.push_back(record);
            if (hooks.on_update) hooks.on_update(record, params);
        }

        StageSummary summary{stage.name, step,
                             evaluate(params, eval_ds, env, reward_cfg, width, height)};
        result.log.summaries.push_back(summary);
        if (hooks.on_stage_end) hooks.on_stage_end(summary, params);
    }
    result.params = std::move(params);
    return result;
}

}  // namespace dig
