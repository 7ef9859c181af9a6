#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dig/grpo.hpp"
#include "dig/render.hpp"
#include "dig/reward.hpp"
#include "dig/scene.hpp"

namespace dig {

// Difference-count rule for one stage: a pinned K or uniform over [1, n_max].
struct KRule {
    bool fixed = true;
    int k = 1;
    int n_max = 4;
};

struct StageSpec {
    std::string name;
    KRule k_rule;
    bool count_hint_given = true;
    int n_pairs = 1600;
    int n_updates = 500;
};

struct Schedule {
    std::vector<StageSpec> stages;
    std::uint64_t root_seed = 0;
};

// DiG-1 -> DiG-2 -> DiG-Mix. Sizes/updates apply per stage in order.
Schedule default_schedule(int n_max = 4,
                          std::vector<int> sizes = {1600, 1600, 1600},
                          std::vector<int> updates = {500, 500, 500},
                          std::uint64_t root_seed = 0);

struct DatasetSample {
    PairSpec pair;
    Image image_a;
    Image image_b;
    Annotation annotation;
    int count_hint = 0;
};

// Generates the stage's pairs; regenerates with a fresh sub-seed whenever an
// edit ends up fully occluded (up to 100 retries per sample).
std::vector<DatasetSample> stage_dataset(const StageSpec& stage,
                                         std::uint64_t seed,
                                         const Camera& camera = {},
                                         int width = 256, int height = 256);

struct TrainRecord {
    int step = 0;
    std::string stage;
    double mean_r_acc = 0.0;
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
    double mean_kl = 0.0;
    double loss = 0.0;
};

struct EvalRow {
    int n = 0;
    double mean_r_acc = 0.0;
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
};

struct EvalMetrics {
    EvalRow overall;
    std::map<int, EvalRow> per_k;
};

struct StageSummary {
    std::string stage;
    int end_step = 0;
    EvalMetrics eval;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    std::vector<StageSummary> summaries;
};

struct RunHooks {
    std::function<void(const TrainRecord&, const PolicyParams&)> on_update;
    std::function<void(const StageSummary&, const PolicyParams&)> on_stage_end;
};

// Greedy-decoding evaluation with per-K breakdown.
EvalMetrics evaluate(const PolicyParams& params,
                     const std::vector<DatasetSample>& dataset,
                     const GridEnv& env, const RewardConfig& reward_cfg,
                     int width = 256, int height = 256);

inline constexpr int kEvalPairsPerStage = 200;

struct CurriculumResult {
    PolicyParams params;
    TrainLog log;
};

// Runs the staged schedule: parameters carry across stage boundaries, the KL
// reference is refreshed at each boundary. start_stage/start_step support
// resuming from a stage-boundary checkpoint.
CurriculumResult run_curriculum(const Schedule& schedule, PolicyParams params,
                                const GridEnv& env,
                                const RewardConfig& reward_cfg,
                                const GrpoConfig& grpo_cfg,
                                const RunHooks& hooks = {}, int start_stage = 0,
                                int start_step = 0, const Camera& camera = {},
                                int width = 256, int height = 256);

}  // namespace dig
