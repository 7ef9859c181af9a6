// dig: generation, scoring, training and evaluation workflows for the
// paired-image difference-localization task.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dig/curriculum.hpp"
#include "dig/grpo.hpp"
#include "dig/io.hpp"
#include "dig/png.hpp"
#include "dig/render.hpp"
#include "dig/reward.hpp"
#include "dig/rng.hpp"
#include "dig/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct RewardFlags {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double alpha = 0.1;
    double min_iou = 0.0;

    dig::RewardConfig to_config() const {
        return dig::RewardConfig{lambda1, lambda2, alpha, min_iou};
    }
};

void add_reward_flags(CLI::App* cmd, RewardFlags& flags) {
    cmd->add_option("--lambda1", flags.lambda1, "Weight on F1");
    cmd->add_option("--lambda2", flags.lambda2, "Weight on mean IoU");
    cmd->add_option("--alpha", flags.alpha, "Format-reward weight");
    cmd->add_option("--min-iou", flags.min_iou, "Minimum IoU for a match");
}

dig::KRule krule_from_json(const json& stage, int n_max) {
    const auto& k = stage.at("k");
    if (k.is_string() && k.get<std::string>() == "uniform") {
        return dig::KRule{false, 0, n_max};
    }
    return dig::KRule{true, k.get<int>(), n_max};
}

// Schedule document: seed, n_max and a stage list; missing fields fall back
// to the three-stage default.
dig::Schedule schedule_from_json(const json& cfg) {
    const int n_max = cfg.value("n_max", 4);
    dig::Schedule schedule;
    schedule.root_seed = cfg.value("seed", std::uint64_t{0});
    if (!cfg.contains("stages")) {
        schedule = dig::default_schedule(n_max);
        schedule.root_seed = cfg.value("seed", std::uint64_t{0});
        return schedule;
    }
    for (const auto& stage : cfg.at("stages")) {
        dig::StageSpec spec;
        spec.name = stage.at("name").get<std::string>();
        spec.k_rule = krule_from_json(stage, n_max);
        spec.count_hint_given = stage.value("count_hint", spec.k_rule.fixed);
        spec.n_pairs = stage.value("n_pairs", 1600);
        spec.n_updates = stage.value("n_updates", 500);
        schedule.stages.push_back(std::move(spec));
    }
    return schedule;
}

json schedule_to_json(const dig::Schedule& schedule, int n_max) {
    json stages = json::array();
    for (const auto& s : schedule.stages) {
        json j{{"name", s.name},
               {"count_hint", s.count_hint_given},
               {"n_pairs", s.n_pairs},
               {"n_updates", s.n_updates}};
        if (s.k_rule.fixed) {
            j["k"] = s.k_rule.k;
        } else {
            j["k"] = "uniform";
        }
        stages.push_back(std::move(j));
    }
    return json{{"seed", schedule.root_seed}, {"n_max", n_max}, {"stages", stages}};
}

json load_config(const std::string& path) {
    try {
        return json::parse(dig::read_file(path));
    } catch (const json::parse_error& e) {
        throw dig::ParseError(std::string("config: ") + e.what());
    }
}

// ---- generate ----------------------------------------------------------

struct GenerateOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string stage_filter;
    int n_override = -1;
    int jobs = 1;
};

int cmd_generate(const GenerateOptions& opt) {
    json cfg = json::object();
    if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
    if (opt.seed_given) cfg["seed"] = opt.seed;
    const int n_max = cfg.value("n_max", 4);
    const int width = cfg.value("width", 256);
    const int height = cfg.value("height", 256);

    dig::Schedule schedule = schedule_from_json(cfg);
    if (!opt.stage_filter.empty()) {
        std::erase_if(schedule.stages, [&](const dig::StageSpec& s) {
            return s.name != opt.stage_filter;
        });
        if (schedule.stages.empty()) {
            std::cerr << "dig generate: unknown stage '" << opt.stage_filter
                      << "'\n";
            return kExitData;
        }
    }
    if (opt.n_override >= 0) {
        for (auto& s : schedule.stages) s.n_pairs = opt.n_override;
    }

    const fs::path out(opt.out_dir);
    fs::create_directories(out);

    dig::RunManifest manifest;
    manifest.command = "generate";
    manifest.version = kVersion;
    manifest.root_seed = schedule.root_seed;
    manifest.config_json = schedule_to_json(schedule, n_max).dump();

    for (std::size_t si = 0; si < schedule.stages.size(); ++si) {
        const auto& stage = schedule.stages[si];
        const fs::path stage_dir = out / stage.name;
        fs::create_directories(stage_dir / "scenes");
        fs::create_directories(stage_dir / "images");

        // Stage seed derivation matches run_curriculum's train split.
        const auto samples = dig::stage_dataset(
            stage, dig::mix_seed(schedule.root_seed, 1000 + si), {}, width,
            height);

        // PNG encoding dominates; spread it over the worker budget.
        const int jobs = std::max(1, opt.jobs);
        std::vector<std::pair<std::string, std::string>> files(samples.size() * 2);
        auto encode_range = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto& s = samples[i];
                files[2 * i] = {s.pair.pair_id + "_a.png",
                                dig::encode_png(s.image_a)};
                files[2 * i + 1] = {s.pair.pair_id + "_b.png",
                                    dig::encode_png(s.image_b)};
            }
        };
        if (jobs == 1) {
            encode_range(0, samples.size());
        } else {
            std::vector<std::thread> workers;
            const std::size_t chunk = (samples.size() + jobs - 1) / jobs;
            for (int w = 0; w < jobs; ++w) {
                const std::size_t begin = std::min(samples.size(), w * chunk);
                const std::size_t end = std::min(samples.size(), begin + chunk);
                if (begin < end) workers.emplace_back(encode_range, begin, end);
            }
            for (auto& t : workers) t.join();
        }

        std::ostringstream annotations;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            const std::string scene_doc = dig::pair_to_string(s.pair);
            const fs::path scene_rel =
                fs::path(stage.name) / "scenes" / (s.pair.pair_id + ".json");
            dig::write_file(out / scene_rel, scene_doc);
            manifest.outputs[scene_rel.generic_string()] =
                dig::sha256_hex(scene_doc);

            for (const auto& [name, bytes] : {files[2 * i], files[2 * i + 1]}) {
                const fs::path rel = fs::path(stage.name) / "images" / name;
                dig::write_file(out / rel, bytes);
                manifest.outputs[rel.generic_string()] = dig::sha256_hex(bytes);
            }

            dig::AnnotationRecord record;
            record.pair_id = s.pair.pair_id;
            record.count_hint = s.count_hint;
            for (const auto& b : s.annotation.boxes) {
                record.boxes.push_back(b.box);
                record.kinds.push_back(b.kind);
            }
            annotations << dig::annotation_to_line(record) << '\n';
        }
        const fs::path ann_rel = fs::path(stage.name) / "annotations.jsonl";
        dig::write_file(out / ann_rel, annotations.str());
        manifest.outputs[ann_rel.generic_string()] =
            dig::sha256_hex(annotations.str());
        std::cout << stage.name << ": " << samples.size() << " pairs\n";
    }

    dig::write_manifest(out, manifest);
    return 0;
}

// ---- score -------------------------------------------------------------

struct ScoreOptions {
    std::string predictions_path;
    std::string annotations_path;
    std::string out_path;
    RewardFlags reward;
    int width = 256;
    int height = 256;
};

int cmd_score(const ScoreOptions& opt) {
    const auto predictions = dig::read_predictions(opt.predictions_path);
    const auto annotations = dig::read_annotations(opt.annotations_path);
    std::map<std::string, const dig::AnnotationRecord*> by_id;
    for (const auto& a : annotations) by_id[a.pair_id] = &a;

    std::vector<std::string> missing;
    for (const auto& p : predictions) {
        if (!by_id.count(p.pair_id)) missing.push_back(p.pair_id);
    }
    if (!missing.empty()) {
        std::cerr << "dig score: predictions reference unknown pairs:";
        for (const auto& id : missing) std::cerr << ' ' << id;
        std::cerr << '\n';
        return kExitData;
    }

    const dig::RewardConfig cfg = opt.reward.to_config();
    std::ostringstream lines;
    dig::RewardBreakdown sums;
    for (const auto& p : predictions) {
        const auto bd = dig::total_reward(p.text, by_id[p.pair_id]->boxes, cfg,
                                          opt.width, opt.height);
        lines << dig::breakdown_to_line(p.pair_id, bd) << '\n';
        sums.r_format += bd.r_format;
        sums.precision += bd.precision;
        sums.recall += bd.recall;
        sums.f1 += bd.f1;
        sums.mean_iou += bd.mean_iou;
        sums.r_acc += bd.r_acc;
        sums.r_total += bd.r_total;
    }
    const double n = predictions.empty() ? 1.0 : double(predictions.size());
    dig::RewardBreakdown means;
    means.r_format = 0;
    means.precision = sums.precision / n;
    means.recall = sums.recall / n;
    means.f1 = sums.f1 / n;
    means.mean_iou = sums.mean_iou / n;
    means.r_acc = sums.r_acc / n;
    means.r_total = sums.r_total / n;
    const double mean_format = sums.r_format / n;

    json summary{{"pair_id", "__summary__"},
                 {"r_format", mean_format},
                 {"precision", means.precision},
                 {"recall", means.recall},
                 {"f1", means.f1},
                 {"mean_iou", means.mean_iou},
                 {"r_acc", means.r_acc},
                 {"r_total", means.r_total}};
    lines << summary.dump() << '\n';

    if (!opt.out_path.empty()) dig::write_file(opt.out_path, lines.str());
    std::cout << "n=" << predictions.size() << " mean_r_format=" << mean_format
              << " mean_r_acc=" << means.r_acc << " mean_f1=" << means.f1
              << " mean_iou=" << means.mean_iou
              << " mean_r_total=" << means.r_total << '\n';
    return 0;
}

// ---- train -------------------------------------------------------------

struct TrainOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string resume_path;
    RewardFlags reward;
    int group_size = 8;
    double clip_eps = 0.2;
    double beta = 0.01;
    double lr = 1e-2;
};

int cmd_train(const TrainOptions& opt) {
    json cfg = json::object();
    if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
    if (opt.seed_given) cfg["seed"] = opt.seed;

    dig::Schedule schedule = schedule_from_json(cfg);
    const int n_max = cfg.value("n_max", 4);
    const int width = cfg.value("width", 256);
    const int height = cfg.value("height", 256);

    dig::GridEnv env;
    dig::GrpoConfig grpo_cfg;
    grpo_cfg.group_size = opt.group_size;
    grpo_cfg.clip_eps = opt.clip_eps;
    grpo_cfg.kl_beta = opt.beta;
    grpo_cfg.learning_rate = opt.lr;
    int hidden = 32;
    if (cfg.contains("env")) {
        const auto& e = cfg["env"];
        env.grid_size = e.value("grid_size", env.grid_size);
        env.max_steps = e.value("max_steps", env.max_steps);
        hidden = e.value("hidden", hidden);
    }
    if (cfg.contains("grpo")) {
        const auto& g = cfg["grpo"];
        grpo_cfg.group_size = g.value("group_size", grpo_cfg.group_size);
        grpo_cfg.clip_eps = g.value("clip_eps", grpo_cfg.clip_eps);
        grpo_cfg.kl_beta = g.value("beta", grpo_cfg.kl_beta);
        grpo_cfg.learning_rate = g.value("lr", grpo_cfg.learning_rate);
        grpo_cfg.updates_per_batch =
            g.value("updates_per_batch", grpo_cfg.updates_per_batch);
        grpo_cfg.exact_kl = g.value("exact_kl", grpo_cfg.exact_kl);
    }
    dig::RewardConfig reward_cfg = opt.reward.to_config();
    if (cfg.contains("reward")) {
        const auto& r = cfg["reward"];
        reward_cfg.lambda1 = r.value("lambda1", reward_cfg.lambda1);
        reward_cfg.lambda2 = r.value("lambda2", reward_cfg.lambda2);
        reward_cfg.alpha = r.value("alpha", reward_cfg.alpha);
        reward_cfg.match_min_iou = r.value("min_iou", reward_cfg.match_min_iou);
    }

    dig::PolicyParams params =
        dig::init_policy(dig::FeatureMatrix::kDim, hidden,
                         dig::mix_seed(schedule.root_seed, 777));
    int start_stage = 0;
    int start_step = 0;
    if (!opt.resume_path.empty()) {
        const dig::Checkpoint ckpt = dig::load_checkpoint(opt.resume_path);
        if (ckpt.grid_size != env.grid_size) {
            throw dig::ShapeMismatch("checkpoint grid size differs from config");
        }
        params = ckpt.params;
        start_stage = ckpt.stage_index;
        start_step = ckpt.step;
    }

    const fs::path out(opt.out_dir);
    fs::create_directories(out);

    dig::RunManifest manifest;
    manifest.command = "train";
    manifest.version = kVersion;
    manifest.root_seed = schedule.root_seed;
    json resolved = schedule_to_json(schedule, n_max);
    resolved["env"] = {{"grid_size", env.grid_size},
                       {"max_steps", env.max_steps},
                       {"hidden", hidden}};
    resolved["grpo"] = {{"group_size", grpo_cfg.group_size},
                        {"clip_eps", grpo_cfg.clip_eps},
                        {"beta", grpo_cfg.kl_beta},
                        {"lr", grpo_cfg.learning_rate},
                        {"updates_per_batch", grpo_cfg.updates_per_batch},
                        {"exact_kl", grpo_cfg.exact_kl}};
    resolved["reward"] = {{"lambda1", reward_cfg.lambda1},
                          {"lambda2", reward_cfg.lambda2},
                          {"alpha", reward_cfg.alpha},
                          {"min_iou", reward_cfg.match_min_iou}};
    manifest.config_json = resolved.dump();

    std::ofstream log_stream(out / "log.csv");
    log_stream << "step,stage,mean_r_acc,mean_f1,mean_iou,mean_kl,loss\n";

    int stage_counter = start_stage;
    dig::RunHooks hooks;
    hooks.on_update = [&](const dig::TrainRecord& r, const dig::PolicyParams&) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      r.step, r.stage.c_str(), r.mean_r_acc, r.mean_f1,
                      r.mean_iou, r.mean_kl, r.loss);
        log_stream << buf;
    };
    hooks.on_stage_end = [&](const dig::StageSummary& summary,
                             const dig::PolicyParams& p) {
        ++stage_counter;
        dig::Checkpoint ckpt{p, summary.end_step, stage_counter, env.grid_size};
        const std::string name =
            "checkpoint_stage" + std::to_string(stage_counter) + ".txt";
        dig::save_checkpoint(out / name, ckpt);
        std::cout << "stage " << summary.stage
                  << " done: eval r_acc=" << summary.eval.overall.mean_r_acc
                  << " f1=" << summary.eval.overall.mean_f1
                  << " iou=" << summary.eval.overall.mean_iou << '\n';
    };

    dig::CurriculumResult result;
    try {
        result = dig::run_curriculum(schedule, std::move(params), env, reward_cfg,
                                     grpo_cfg, hooks, start_stage, start_step, {},
                                     width, height);
    } catch (...) {
        log_stream.flush();
        throw;
    }
    log_stream.flush();
    log_stream.close();

    const int final_step = result.log.records.empty()
                               ? start_step
                               : result.log.records.back().step;
    dig::save_checkpoint(
        out / "checkpoint_final.txt",
        dig::Checkpoint{result.params, final_step,
                        static_cast<int>(schedule.stages.size()), env.grid_size});

    for (const auto& entry : fs::directory_iterator(out)) {
        const auto name = entry.path().filename().string();
        if (name == "manifest.json" || name == "manifest.json.tmp") continue;
        manifest.outputs[name] = dig::sha256_file(entry.path());
    }
    dig::write_manifest(out, manifest);
    return 0;
}

// ---- eval --------------------------------------------------------------

struct EvalOptions {
    std::string checkpoint_path;
    std::string data_dir;
    std::string out_path;
    RewardFlags reward;
    int width = 256;
    int height = 256;
};

int cmd_eval(const EvalOptions& opt) {
    const dig::Checkpoint ckpt = dig::load_checkpoint(opt.checkpoint_path);
    dig::GridEnv env;
    env.grid_size = ckpt.grid_size;
    if (ckpt.params.feat_dim != dig::FeatureMatrix::kDim) {
        throw dig::ShapeMismatch("checkpoint feature dimension unsupported");
    }

    const fs::path data(opt.data_dir);
    const auto annotations = dig::read_annotations(data / "annotations.jsonl");

    // Scene documents are re-rendered; images on disk are not needed.
    std::vector<dig::DatasetSample> dataset;
    for (const auto& ann : annotations) {
        const fs::path scene_path = data / "scenes" / (ann.pair_id + ".json");
        dig::PairSpec pair = dig::pair_from_string(dig::read_file(scene_path));
        dig::RenderedPair rendered =
            dig::render_pair(pair, {}, opt.width, opt.height);
        dig::DatasetSample sample;
        sample.count_hint = ann.count_hint;
        sample.pair = std::move(pair);
        sample.image_a = std::move(rendered.image_a);
        sample.image_b = std::move(rendered.image_b);
        sample.annotation = std::move(rendered.annotation);
        dataset.push_back(std::move(sample));
    }

    const dig::EvalMetrics metrics = dig::evaluate(
        ckpt.params, dataset, env, opt.reward.to_config(), opt.width, opt.height);

    std::ostringstream csv;
    csv << "k,n,mean_r_acc,mean_f1,mean_iou\n";
    char buf[120];
    for (const auto& [k, row] : metrics.per_k) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g\n", k, row.n,
                      row.mean_r_acc, row.mean_f1, row.mean_iou);
        csv << buf;
    }
    std::snprintf(buf, sizeof(buf), "all,%d,%.10g,%.10g,%.10g\n",
                  metrics.overall.n, metrics.overall.mean_r_acc,
                  metrics.overall.mean_f1, metrics.overall.mean_iou);
    csv << buf;

    if (!opt.out_path.empty()) dig::write_file(opt.out_path, csv.str());
    std::cout << csv.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Paired-image difference localization toolkit"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "Generate a paired dataset");
    generate->add_option("--config", gen.config_path, "Generation config (JSON)");
    generate->add_option("--out", gen.out_dir, "Output directory")->required();
    generate->add_option("--seed", gen.seed, "Root seed")
        ->each([&](const std::string&) { gen.seed_given = true; });
    generate->add_option("--stage", gen.stage_filter,
                         "Only this stage (dig1, dig2, digmix)");
    generate->add_option("--n", gen.n_override, "Pairs per stage override");
    generate->add_option("--jobs", gen.jobs, "Worker thread cap");

    ScoreOptions score;
    auto* score_cmd = app.add_subcommand("score", "Score predictions");
    score_cmd->add_option("predictions", score.predictions_path,
                          "Predictions file (JSONL)")->required();
    score_cmd->add_option("annotations", score.annotations_path,
                          "Annotations file (JSONL)")->required();
    score_cmd->add_option("--out", score.out_path, "Breakdown output file");
    score_cmd->add_option("--width", score.width, "Image width");
    score_cmd->add_option("--height", score.height, "Image height");
    add_reward_flags(score_cmd, score.reward);

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Run curriculum training");
    train_cmd->add_option("--config", train.config_path, "Schedule config (JSON)");
    train_cmd->add_option("--out", train.out_dir, "Output directory")->required();
    train_cmd->add_option("--seed", train.seed, "Root seed")
        ->each([&](const std::string&) { train.seed_given = true; });
    train_cmd->add_option("--resume", train.resume_path,
                          "Resume from a stage-boundary checkpoint");
    train_cmd->add_option("--group-size", train.group_size, "Rollout group size");
    train_cmd->add_option("--clip-eps", train.clip_eps, "Surrogate clip range");
    train_cmd->add_option("--beta", train.beta, "KL coefficient");
    train_cmd->add_option("--lr", train.lr, "Learning rate");
    add_reward_flags(train_cmd, train.reward);

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("checkpoint", eval.checkpoint_path, "Checkpoint file")
        ->required();
    eval_cmd->add_option("data", eval.data_dir,
                         "Stage directory with scenes/ and annotations.jsonl")
        ->required();
    eval_cmd->add_option("--out", eval.out_path, "Metrics CSV output file");
    eval_cmd->add_option("--width", eval.width, "Image width");
    eval_cmd->add_option("--height", eval.height, "Image height");
    add_reward_flags(eval_cmd, eval.reward);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*generate) return cmd_generate(gen);
        if (*score_cmd) return cmd_score(score);
        if (*train_cmd) return cmd_train(train);
        if (*eval_cmd) return cmd_eval(eval);
    } catch (const dig::NonFiniteLoss& e) {
        std::cerr << "dig: numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "dig: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
