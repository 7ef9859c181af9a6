#include "dig/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dig/rng.hpp"

namespace dig {

void PolicyParams::fill(double v) {
    std::fill(w1.begin(), w1.end(), v);
    std::fill(b1.begin(), b1.end(), v);
    std::fill(w2.begin(), w2.end(), v);
    std::fill(ws.begin(), ws.end(), v);
    b2 = v;
    bs = v;
}

std::vector<double> PolicyParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(size());
    flat.insert(flat.end(), w1.begin(), w1.end());
    flat.insert(flat.end(), b1.begin(), b1.end());
    flat.insert(flat.end(), w2.begin(), w2.end());
    flat.push_back(b2);
    flat.insert(flat.end(), ws.begin(), ws.end());
    flat.push_back(bs);
    return flat;
}

void PolicyParams::unflatten(const std::vector<double>& flat) {
    if (flat.size() != size()) throw ShapeMismatch("flat parameter size mismatch");
    std::size_t k = 0;
    for (auto& v : w1) v = flat[k++];
    for (auto& v : b1) v = flat[k++];
    for (auto& v : w2) v = flat[k++];
    b2 = flat[k++];
    for (auto& v : ws) v = flat[k++];
    bs = flat[k++];
}

PolicyParams init_policy(int feat_dim, int hidden, std::uint64_t seed,
                         double init_scale) {
    PolicyParams p;
    p.feat_dim = feat_dim;
    p.hidden = hidden;
    p.w1.resize(static_cast<std::size_t>(hidden) * feat_dim);
    p.b1.assign(hidden, 0.0);
    p.w2.resize(hidden);
    p.ws.resize(hidden);
    Rng rng(seed);
    for (auto& v : p.w1) v = rng.normal(0.0, init_scale);
    // Zero output heads: the untrained policy is uniform over actions, and the
    // trunk unblocks once the heads pick up signal.
    std::fill(p.w2.begin(), p.w2.end(), 0.0);
    std::fill(p.ws.begin(), p.ws.end(), 0.0);
    return p;
}

FeatureMatrix featurize(const Image& image_a, const Image& image_b,
                        int count_hint, const GridEnv& env) {
    if (image_a.width != image_b.width || image_a.height != image_b.height) {
        throw DimMismatch("image pair dimensions differ");
    }
    const int c = env.grid_size;
    const int cell_w = (image_a.width + c - 1) / c;
    const int cell_h = (image_a.height + c - 1) / c;

    FeatureMatrix fm;
    fm.cells = env.cells();
    fm.data.resize(static_cast<std::size_t>(fm.cells) * FeatureMatrix::kDim);
    for (int row = 0; row < c; ++row) {
        for (int col = 0; col < c; ++col) {
            double sum = 0.0;
            for (int dy = 0; dy < cell_h; ++dy) {
                // Edge replication: clamp out-of-range pixels to the border.
                const int y = std::min(row * cell_h + dy, image_a.height - 1);
                for (int dx = 0; dx < cell_w; ++dx) {
                    const int x = std::min(col * cell_w + dx, image_a.width - 1);
                    const auto* pa = image_a.at(x, y);
                    const auto* pb = image_b.at(x, y);
                    sum += (std::abs(pa[0] - pb[0]) + std::abs(pa[1] - pb[1]) +
                            std::abs(pa[2] - pb[2])) /
                           3.0;
                }
            }
            double* f = fm.row(row * c + col);
            f[0] = sum / (255.0 * cell_w * cell_h);
            f[1] = col / (c - 1.0);
            f[2] = row / (c - 1.0);
            f[3] = static_cast<double>(count_hint);
        }
    }
    // Scale the difference column so the strongest cell reads 1; raw change
    // fractions are tiny and would drown under the positional features.
    double max_diff = 0.0;
    for (int i = 0; i < fm.cells; ++i) max_diff = std::max(max_diff, fm.row(i)[0]);
    if (max_diff > 0.0) {
        for (int i = 0; i < fm.cells; ++i) fm.row(i)[0] /= max_diff;
    }
    return fm;
}

PolicyForward policy_forward(const PolicyParams& params,
                             const FeatureMatrix& features, const GridEnv& env) {
    const int cells = env.cells();
    if (features.cells != cells) throw ShapeMismatch("feature/grid cell mismatch");
    const int H = params.hidden;
    const int F = params.feat_dim;

    PolicyForward fwd;
    fwd.hidden.resize(static_cast<std::size_t>(cells) * H);
    fwd.mean_hidden.assign(H, 0.0);
    fwd.logits.resize(cells + 1);
    for (int i = 0; i < cells; ++i) {
        const double* f = features.row(i);
        double* h = fwd.hidden.data() + static_cast<std::size_t>(i) * H;
        double logit = params.b2;
        for (int j = 0; j < H; ++j) {
            double u = params.b1[j];
            const double* w = params.w1.data() + static_cast<std::size_t>(j) * F;
            for (int k = 0; k < F; ++k) u += w[k] * f[k];
            h[j] = std::tanh(u);
            fwd.mean_hidden[j] += h[j];
            logit += params.w2[j] * h[j];
        }
        fwd.logits[i] = logit;
    }
    double stop = params.bs;
    for (int j = 0; j < H; ++j) {
        fwd.mean_hidden[j] /= cells;
        stop += params.ws[j] * fwd.mean_hidden[j];
    }
    fwd.logits[cells] = stop;
    return fwd;
}

namespace {

// Log-softmax over the allowed action subset; fills probs (zero elsewhere)
// and returns log Z relative to raw logits.
double masked_log_z(const std::vector<double>& logits,
                    const std::vector<bool>& allowed, std::vector<double>& probs) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (allowed[i]) max_logit = std::max(max_logit, logits[i]);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = allowed[i] ? std::exp(logits[i] - max_logit) : 0.0;
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    return max_logit + std::log(z);
}

}  // namespace

Rollout sample_rollout(const PolicyParams& params, const FeatureMatrix& features,
                       const GridEnv& env, std::uint64_t rng_seed) {
    const PolicyForward fwd = policy_forward(params, features, env);
    const int n = env.num_actions();
    Rng rng(rng_seed);

    Rollout rollout;
    std::vector<bool> allowed(n, true);
    std::vector<double> probs(n);
    for (int step = 0; step < env.max_steps; ++step) {
        const double log_z = masked_log_z(fwd.logits, allowed, probs);
        const double u = rng.uniform_real();
        double acc = 0.0;
        int action = env.stop_action();
        for (int i = 0; i < n; ++i) {
            if (!allowed[i]) continue;
            acc += probs[i];
            if (u < acc) {
                action = i;
                break;
            }
        }
        rollout.actions.push_back(action);
        rollout.old_logprobs.push_back(fwd.logits[action] - log_z);
        if (action == env.stop_action()) break;
        allowed[action] = false;
    }
    return rollout;
}

std::vector<int> greedy_rollout(const PolicyParams& params,
                                const FeatureMatrix& features,
                                const GridEnv& env) {
    const PolicyForward fwd = policy_forward(params, features, env);
    const int n = env.num_actions();
    std::vector<int> actions;
    std::vector<bool> allowed(n, true);
    for (int step = 0; step < env.max_steps; ++step) {
        int best = -1;
        for (int i = 0; i < n; ++i) {
            if (!allowed[i]) continue;
            if (best < 0 || fwd.logits[i] > fwd.logits[best]) best = i;
        }
        actions.push_back(best);
        if (best == env.stop_action()) break;
        allowed[best] = false;
    }
    return actions;
}

std::vector<BBox> actions_to_boxes(const std::vector<int>& actions,
                                   const GridEnv& env, int width, int height) {
    const int c = env.grid_size;
    const int cell_w = (width + c - 1) / c;
    const int cell_h = (height + c - 1) / c;
    std::vector<BBox> boxes;
    for (int action : actions) {
        if (action == env.stop_action()) continue;
        const int row = action / c;
        const int col = action % c;
        boxes.push_back(BBox{col * cell_w, row * cell_h,
                             std::min((col + 1) * cell_w, width),
                             std::min((row + 1) * cell_h, height)});
    }
    return boxes;
}

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double std_floor) {
    const int g = static_cast<int>(rewards.size());
    if (g < 2) throw GroupTooSmall("group size must be >= 2");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= g;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double stddev = std::sqrt(var / g);  // population std
    std::vector<double> adv(g);
    for (int i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / (stddev + std_floor);
    return adv;
}

LossStats grpo_loss_and_grad(const PolicyParams& params,
                             const PolicyParams& ref_params,
                             const std::vector<FeatureMatrix>& features,
                             const std::vector<Rollout>& rollouts,
                             const std::vector<double>& advantages,
                             const GridEnv& env, const GrpoConfig& cfg,
                             PolicyParams& grad_out) {
    if (rollouts.size() != advantages.size()) {
        throw ShapeMismatch("rollout/advantage count mismatch");
    }
    const int n_actions = env.num_actions();
    const int n_rollouts = static_cast<int>(rollouts.size());

    grad_out = params;
    grad_out.fill(0.0);

    std::vector<PolicyForward> fwd_theta(features.size());
    std::vector<PolicyForward> fwd_ref(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        fwd_theta[i] = policy_forward(params, features[i], env);
        fwd_ref[i] = policy_forward(ref_params, features[i], env);
    }

    // Per-feature-matrix logit gradients, accumulated across rollouts/steps.
    std::vector<std::vector<double>> dz(features.size(),
                                        std::vector<double>(n_actions, 0.0));

    double loss = 0.0;
    double kl_sum = 0.0;
    std::vector<double> probs_theta(n_actions), probs_ref(n_actions);

    for (int r = 0; r < n_rollouts; ++r) {
        const Rollout& ro = rollouts[r];
        const double adv = advantages[r];
        const int fi = ro.feature_index;
        const auto& zt = fwd_theta[fi].logits;
        const auto& zr = fwd_ref[fi].logits;
        const int n_tokens = static_cast<int>(ro.actions.size());
        const double w = 1.0 / (n_rollouts * n_tokens);

        std::vector<bool> allowed(n_actions, true);
        for (int t = 0; t < n_tokens; ++t) {
            const int a = ro.actions[t];
            const double log_z_theta = masked_log_z(zt, allowed, probs_theta);
            const double log_z_ref = masked_log_z(zr, allowed, probs_ref);
            const double lp_theta = zt[a] - log_z_theta;
            const double lp_ref = zr[a] - log_z_ref;

            // Clipped surrogate (Eq. 5): min gates the gradient to the
            // unclipped branch.
            const double ratio = std::exp(lp_theta - ro.old_logprobs[t]);
            const double unclipped = ratio * adv;
            const double clipped =
                std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
            const double l_clip = std::min(unclipped, clipped);
            loss -= w * l_clip;

            double dlp = (unclipped <= clipped) ? -w * ratio * adv : 0.0;

            // KL regularization at the sampled token (k3) or over the full
            // allowed set (exact).
            if (cfg.exact_kl) {
                double kl_t = 0.0;
                for (int j = 0; j < n_actions; ++j) {
                    if (!allowed[j] || probs_theta[j] <= 0.0) continue;
                    kl_t += probs_theta[j] *
                            ((zt[j] - log_z_theta) - (zr[j] - log_z_ref));
                }
                loss += cfg.kl_beta * w * kl_t;
                kl_sum += w * kl_t;
                for (int j = 0; j < n_actions; ++j) {
                    if (!allowed[j]) continue;
                    const double diff =
                        (zt[j] - log_z_theta) - (zr[j] - log_z_ref);
                    dz[fi][j] += cfg.kl_beta * w * probs_theta[j] * (diff - kl_t);
                }
            } else {
                const double delta = lp_ref - lp_theta;
                const double k3 = std::exp(delta) - delta - 1.0;
                loss += cfg.kl_beta * w * k3;
                kl_sum += w * k3;
                dlp += cfg.kl_beta * w * (1.0 - std::exp(delta));
            }

            // dlp routes through the masked softmax.
            for (int j = 0; j < n_actions; ++j) {
                if (!allowed[j]) continue;
                dz[fi][j] += dlp * ((j == a ? 1.0 : 0.0) - probs_theta[j]);
            }

            if (a != env.stop_action()) allowed[a] = false;
        }
    }

    // Backprop dz through the scorer, per feature matrix.
    const int H = params.hidden;
    const int F = params.feat_dim;
    const int cells = env.cells();
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
        const auto& fwd = fwd_theta[fi];
        const double dz_stop = dz[fi][cells];
        for (int i = 0; i < cells; ++i) {
            const double dzi = dz[fi][i];
            const double* h = fwd.hidden.data() + static_cast<std::size_t>(i) * H;
            const double* f = features[fi].row(i);
            for (int j = 0; j < H; ++j) {
                const double dh = dzi * params.w2[j] + dz_stop * params.ws[j] / cells;
                const double du = dh * (1.0 - h[j] * h[j]);
                double* gw1 = grad_out.w1.data() + static_cast<std::size_t>(j) * F;
                for (int k = 0; k < F; ++k) gw1[k] += du * f[k];
                grad_out.b1[j] += du;
                grad_out.w2[j] += dzi * h[j];
            }
            grad_out.b2 += dzi;
        }
        for (int j = 0; j < H; ++j) grad_out.ws[j] += dz_stop * fwd.mean_hidden[j];
        grad_out.bs += dz_stop;
    }

    if (!std::isfinite(loss)) throw NonFiniteLoss("loss is not finite");
    for (double v : grad_out.flatten()) {
        if (!std::isfinite(v)) throw NonFiniteLoss("gradient is not finite");
    }
    return LossStats{loss, kl_sum};
}

void update_step(PolicyParams& params, const PolicyParams& grad, double lr) {
    for (std::size_t i = 0; i < params.w1.size(); ++i) params.w1[i] -= lr * grad.w1[i];
    for (std::size_t i = 0; i < params.b1.size(); ++i) params.b1[i] -= lr * grad.b1[i];
    for (std::size_t i = 0; i < params.w2.size(); ++i) params.w2[i] -= lr * grad.w2[i];
    for (std::size_t i = 0; i < params.ws.size(); ++i) params.ws[i] -= lr * grad.ws[i];
    params.b2 -= lr * grad.b2;
    params.bs -= lr * grad.bs;
}

BatchStats train_batch(PolicyParams& params, const PolicyParams& ref_params,
                       const std::vector<TrainSample>& batch, const GridEnv& env,
                       const RewardConfig& reward_cfg, const GrpoConfig& cfg,
                       std::uint64_t rng_seed, int image_width,
                       int image_height) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");

    const PolicyParams sampling_params = params;  // pi_old snapshot
    std::vector<FeatureMatrix> features;
    features.reserve(batch.size());
    std::vector<Rollout> rollouts;
    std::vector<double> advantages;
    BatchStats stats;

    for (std::size_t s = 0; s < batch.size(); ++s) {
        features.push_back(batch[s].features);
        std::vector<double> rewards;
        rewards.reserve(cfg.group_size);
        for (int g = 0; g < cfg.group_size; ++g) {
            Rollout ro = sample_rollout(
                sampling_params, batch[s].features, env,
                mix_seed(rng_seed, s * static_cast<std::size_t>(cfg.group_size) + g));
            ro.group_id = static_cast<int>(s);
            ro.feature_index = static_cast<int>(s);
            const auto boxes =
                actions_to_boxes(ro.actions, env, image_width, image_height);
            const RewardBreakdown bd = score_boxes(boxes, batch[s].gt, reward_cfg);
            ro.reward = bd.r_total;
            stats.mean_r_acc += bd.r_acc;
            stats.mean_f1 += bd.f1;
            stats.mean_iou += bd.mean_iou;
            rewards.push_back(ro.reward);
            rollouts.push_back(std::move(ro));
        }
        const auto adv = group_advantages(rewards, cfg.std_floor);
        advantages.insert(advantages.end(), adv.begin(), adv.end());
    }

    const double n = static_cast<double>(rollouts.size());
    stats.mean_r_acc /= n;
    stats.mean_f1 /= n;
    stats.mean_iou /= n;

    PolicyParams grad;
    for (int u = 0; u < cfg.updates_per_batch; ++u) {
        const LossStats ls = grpo_loss_and_grad(params, ref_params, features,
                                                rollouts, advantages, env, cfg, grad);
        update_step(params, grad, cfg.learning_rate);
        stats.loss = ls.loss;
        stats.mean_kl = ls.mean_kl;
    }
    return stats;
}

}  // namespace dig
