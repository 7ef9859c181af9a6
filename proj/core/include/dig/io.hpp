#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dig/curriculum.hpp"
#include "dig/grpo.hpp"
#include "dig/render.hpp"
#include "dig/reward.hpp"
#include "dig/scene.hpp"

namespace dig {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Canonical scene/pair documents: UTF-8 JSON, sorted keys, 2-space indent,
// trailing newline. Serialization is byte-deterministic.
std::string scene_to_string(const SceneConfig& scene);
SceneConfig scene_from_string(const std::string& text);
std::string pair_to_string(const PairSpec& pair);
PairSpec pair_from_string(const std::string& text);

// One annotation record per line: pair_id, integer box quadruples, kinds and
// the count hint used at training time.
struct AnnotationRecord {
    std::string pair_id;
    std::vector<BBox> boxes;
    std::vector<ModKind> kinds;
    int count_hint = 0;
};

std::string annotation_to_line(const AnnotationRecord& record);
AnnotationRecord annotation_from_line(const std::string& line);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

// Batch-scoring input: one record per line with pair_id and raw model text.
struct PredictionRecord {
    std::string pair_id;
    std::string text;
};

std::string prediction_to_line(const PredictionRecord& record);
PredictionRecord prediction_from_line(const std::string& line);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

std::string breakdown_to_line(const std::string& pair_id,
                              const RewardBreakdown& breakdown);

// Checkpoints: text dump with a shape header and hexfloat values, so the
// round trip is bit-exact.
struct Checkpoint {
    PolicyParams params;
    int step = 0;
    int stage_index = 0;
    int grid_size = 8;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string train_log_csv(const TrainLog& log);

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Run manifest: resolved config, root seed and digests of every produced
// file. Written atomically last; its presence marks a complete run.
struct RunManifest {
    std::string command;
    std::string version;
    std::uint64_t root_seed = 0;
    std::string config_json;                       // resolved config document
    std::map<std::string, std::string> outputs;    // relative path -> sha256
};

void write_manifest(const std::filesystem::path& out_dir,
                    const RunManifest& manifest);

}  // namespace dig
