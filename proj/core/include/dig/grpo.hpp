#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dig/geometry.hpp"
#include "dig/render.hpp"
#include "dig/reward.hpp"

namespace dig {

struct GridEnv {
    int grid_size = 8;   // C: the image is carved into C x C cells
    int max_steps = 6;   // rollout length cap, including STOP

    int cells() const { return grid_size * grid_size; }
    int num_actions() const { return cells() + 1; }
    int stop_action() const { return cells(); }
};

struct DimMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GroupTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-cell input rows: [difference, col norm, row norm, count hint].
struct FeatureMatrix {
    static constexpr int kDim = 4;
    int cells = 0;
    std::vector<double> data;  // cells x kDim, row-major

    const double* row(int i) const { return data.data() + i * kDim; }
    double* row(int i) { return data.data() + i * kDim; }
};

// Two-layer tanh scorer: shared trunk, per-cell logit head, and a STOP head
// reading the mean hidden activation.
struct PolicyParams {
    int feat_dim = FeatureMatrix::kDim;
    int hidden = 32;
    std::vector<double> w1;  // hidden x feat_dim
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
    std::vector<double> ws;  // hidden
    double bs = 0.0;

    std::size_t size() const { return w1.size() + b1.size() + w2.size() + ws.size() + 2; }
    void fill(double v);
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

PolicyParams init_policy(int feat_dim, int hidden, std::uint64_t seed,
                         double init_scale = 0.1);

struct Rollout {
    std::vector<int> actions;        // cell indices, optionally ending in STOP
    std::vector<double> old_logprobs;
    double reward = 0.0;
    int group_id = 0;
    int feature_index = 0;  // into the batch feature list
};

struct GrpoConfig {
    int group_size = 8;
    double clip_eps = 0.2;
    double kl_beta = 0.01;
    double learning_rate = 1e-2;
    double std_floor = 1e-6;
    int updates_per_batch = 1;
    bool exact_kl = false;  // exact per-token KL instead of the k3 estimator
};

FeatureMatrix featurize(const Image& image_a, const Image& image_b,
                        int count_hint, const GridEnv& env);

// Logits for every action given one feature matrix (history-independent).
struct PolicyForward {
    std::vector<double> hidden;  // cells x H, post-tanh
    std::vector<double> mean_hidden;
    std::vector<double> logits;  // cells + 1, STOP last
};

PolicyForward policy_forward(const PolicyParams& params,
                             const FeatureMatrix& features, const GridEnv& env);

Rollout sample_rollout(const PolicyParams& params, const FeatureMatrix& features,
                       const GridEnv& env, std::uint64_t rng_seed);

// Deterministic argmax decoding, used for evaluation.
std::vector<int> greedy_rollout(const PolicyParams& params,
                                const FeatureMatrix& features, const GridEnv& env);

std::vector<BBox> actions_to_boxes(const std::vector<int>& actions,
                                   const GridEnv& env, int width, int height);

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double std_floor = 1e-6);

struct LossStats {
    double loss = 0.0;
    double mean_kl = 0.0;
};

// Clipped-surrogate loss with KL regularization; analytic gradient written
// into grad_out (same shapes as params). advantages[i] belongs to rollouts[i].
LossStats grpo_loss_and_grad(const PolicyParams& params,
                             const PolicyParams& ref_params,
                             const std::vector<FeatureMatrix>& features,
                             const std::vector<Rollout>& rollouts,
                             const std::vector<double>& advantages,
                             const GridEnv& env, const GrpoConfig& cfg,
                             PolicyParams& grad_out);

void update_step(PolicyParams& params, const PolicyParams& grad, double lr);

struct TrainSample {
    FeatureMatrix features;
    std::vector<BBox> gt;
};

struct BatchStats {
    double mean_r_acc = 0.0;
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
    double mean_kl = 0.0;
    double loss = 0.0;
};

// One GRPO step: G rollouts per sample under a snapshot of params, rewards via
// the compound reward (format fixed at 1 for structural outputs), group
// advantage normalization, then updates_per_batch gradient steps.
BatchStats train_batch(PolicyParams& params, const PolicyParams& ref_params,
                       const std::vector<TrainSample>& batch, const GridEnv& env,
                       const RewardConfig& reward_cfg, const GrpoConfig& cfg,
                       std::uint64_t rng_seed, int image_width = 256,
                       int image_height = 256);

}  // namespace dig
