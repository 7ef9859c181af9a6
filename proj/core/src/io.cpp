#include "dig/io.hpp"

#include <openssl/evp.h>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dig {

namespace {

using nlohmann::json;

json object_to_json(const ObjectSpec& obj) {
    return json{{"id", obj.id},
                {"shape", to_string(obj.shape)},
                {"color", to_string(obj.color)},
                {"size", to_string(obj.size)},
                {"material", to_string(obj.material)},
                {"position", {obj.x, obj.y}}};
}

const json& require(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end()) {
        throw ParseError(std::string("missing field \"") + field + "\"");
    }
    return *it;
}

ObjectSpec object_from_json(const json& j) {
    try {
        ObjectSpec obj;
        obj.id = require(j, "id").get<int>();
        obj.shape = shape_from_string(require(j, "shape").get<std::string>());
        obj.color = color_from_string(require(j, "color").get<std::string>());
        obj.size = size_from_string(require(j, "size").get<std::string>());
        obj.material =
            material_from_string(require(j, "material").get<std::string>());
        const auto& pos = require(j, "position");
        if (!pos.is_array() || pos.size() != 2) {
            throw ParseError("field \"position\" must be a pair");
        }
        obj.x = pos[0].get<double>();
        obj.y = pos[1].get<double>();
        return obj;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed object: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
}

json scene_to_json(const SceneConfig& scene) {
    json objects = json::array();
    for (const auto& obj : scene.objects) objects.push_back(object_to_json(obj));
    return json{{"seed", scene.seed},
                {"world_half_extent", scene.world_half_extent},
                {"objects", std::move(objects)}};
}

SceneConfig scene_from_json(const json& j) {
    SceneConfig scene;
    try {
        scene.seed = require(j, "seed").get<std::uint64_t>();
        scene.world_half_extent = require(j, "world_half_extent").get<double>();
        for (const auto& obj : require(j, "objects")) {
            scene.objects.push_back(object_from_json(obj));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed scene: ") + e.what());
    }
    return scene;
}

json mod_to_json(const Modification& mod) {
    json j{{"kind", to_string(mod.kind)}};
    if (mod.target_id) j["target_id"] = *mod.target_id;
    if (mod.before) j["before"] = object_to_json(*mod.before);
    if (mod.after) j["after"] = object_to_json(*mod.after);
    return j;
}

Modification mod_from_json(const json& j) {
    Modification mod;
    try {
        mod.kind = mod_kind_from_string(require(j, "kind").get<std::string>());
        if (j.contains("target_id")) mod.target_id = j["target_id"].get<int>();
        if (j.contains("before")) mod.before = object_from_json(j["before"]);
        if (j.contains("after")) mod.after = object_from_json(j["after"]);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed modification: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return mod;
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
}

}  // namespace

std::string scene_to_string(const SceneConfig& scene) {
    return canonical_dump(scene_to_json(scene));
}

SceneConfig scene_from_string(const std::string& text) {
    return scene_from_json(parse_json(text));
}

std::string pair_to_string(const PairSpec& pair) {
    json mods = json::array();
    for (const auto& mod : pair.mods) mods.push_back(mod_to_json(mod));
    return canonical_dump(json{{"pair_id", pair.pair_id},
                               {"k", pair.k},
                               {"n_max", pair.n_max},
                               {"base", scene_to_json(pair.base)},
                               {"edited", scene_to_json(pair.edited)},
                               {"mods", std::move(mods)}});
}

PairSpec pair_from_string(const std::string& text) {
    const json j = parse_json(text);
    PairSpec pair;
    try {
        pair.pair_id = require(j, "pair_id").get<std::string>();
        pair.k = require(j, "k").get<int>();
        pair.n_max = require(j, "n_max").get<int>();
        pair.base = scene_from_json(require(j, "base"));
        pair.edited = scene_from_json(require(j, "edited"));
        for (const auto& mod : require(j, "mods")) {
            pair.mods.push_back(mod_from_json(mod));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed pair: ") + e.what());
    }
    return pair;
}

std::string annotation_to_line(const AnnotationRecord& record) {
    json boxes = json::array();
    for (const auto& b : record.boxes) {
        boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    }
    json kinds = json::array();
    for (const auto& k : record.kinds) kinds.push_back(to_string(k));
    return json{{"pair_id", record.pair_id},
                {"boxes", std::move(boxes)},
                {"kinds", std::move(kinds)},
                {"count_hint", record.count_hint}}
        .dump();
}

AnnotationRecord annotation_from_line(const std::string& line) {
    const json j = parse_json(line);
    AnnotationRecord record;
    try {
        record.pair_id = require(j, "pair_id").get<std::string>();
        record.count_hint = require(j, "count_hint").get<int>();
        for (const auto& b : require(j, "boxes")) {
            if (!b.is_array() || b.size() != 4) {
                throw ParseError("box must be a quadruple");
            }
            record.boxes.push_back(BBox{b[0].get<int>(), b[1].get<int>(),
                                        b[2].get<int>(), b[3].get<int>()});
        }
        for (const auto& k : require(j, "kinds")) {
            record.kinds.push_back(mod_kind_from_string(k.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed annotation: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return record;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
    std::vector<AnnotationRecord> records;
    for (const auto& line : read_lines(path)) {
        records.push_back(annotation_from_line(line));
    }
    return records;
}

std::string prediction_to_line(const PredictionRecord& record) {
    return json{{"pair_id", record.pair_id}, {"text", record.text}}.dump();
}

PredictionRecord prediction_from_line(const std::string& line) {
    const json j = parse_json(line);
    try {
        return PredictionRecord{require(j, "pair_id").get<std::string>(),
                                require(j, "text").get<std::string>()};
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed prediction: ") + e.what());
    }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::vector<PredictionRecord> records;
    for (const auto& line : read_lines(path)) {
        records.push_back(prediction_from_line(line));
    }
    return records;
}

std::string breakdown_to_line(const std::string& pair_id,
                              const RewardBreakdown& breakdown) {
    return json{{"pair_id", pair_id},
                {"r_format", breakdown.r_format},
                {"precision", breakdown.precision},
                {"recall", breakdown.recall},
                {"f1", breakdown.f1},
                {"mean_iou", breakdown.mean_iou},
                {"r_acc", breakdown.r_acc},
                {"r_total", breakdown.r_total}}
        .dump();
}

namespace {

void dump_array(std::ostream& os, const char* name,
                const std::vector<double>& values) {
    os << name << ' ' << values.size();
    char buf[40];
    for (double v : values) {
        std::snprintf(buf, sizeof(buf), " %a", v);
        os << buf;
    }
    os << '\n';
}

std::vector<double> parse_array(std::istringstream& is, const std::string& name) {
    std::string label;
    std::size_t count = 0;
    if (!(is >> label >> count) || label != name) {
        throw ParseError("checkpoint: expected array \"" + name + "\"");
    }
    std::vector<double> values(count);
    std::string tok;
    for (auto& v : values) {
        if (!(is >> tok)) throw ParseError("checkpoint: truncated array " + name);
        v = std::strtod(tok.c_str(), nullptr);
    }
    return values;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ostringstream os;
    os << "dig-checkpoint 1\n";
    os << "feat_dim " << ckpt.params.feat_dim << '\n';
    os << "hidden " << ckpt.params.hidden << '\n';
    os << "grid_size " << ckpt.grid_size << '\n';
    os << "step " << ckpt.step << '\n';
    os << "stage_index " << ckpt.stage_index << '\n';
    dump_array(os, "w1", ckpt.params.w1);
    dump_array(os, "b1", ckpt.params.b1);
    dump_array(os, "w2", ckpt.params.w2);
    dump_array(os, "b2", {ckpt.params.b2});
    dump_array(os, "ws", ckpt.params.ws);
    dump_array(os, "bs", {ckpt.params.bs});
    write_file(path, os.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::istringstream is(read_file(path));
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "dig-checkpoint" || version != 1) {
        throw ParseError("not a dig checkpoint: " + path.string());
    }
    Checkpoint ckpt;
    auto read_int = [&is](const char* name) {
        std::string label;
        int value = 0;
        if (!(is >> label >> value) || label != name) {
            throw ParseError(std::string("checkpoint: expected field ") + name);
        }
        return value;
    };
    ckpt.params.feat_dim = read_int("feat_dim");
    ckpt.params.hidden = read_int("hidden");
    ckpt.grid_size = read_int("grid_size");
    ckpt.step = read_int("step");
    ckpt.stage_index = read_int("stage_index");
    ckpt.params.w1 = parse_array(is, "w1");
    ckpt.params.b1 = parse_array(is, "b1");
    ckpt.params.w2 = parse_array(is, "w2");
    ckpt.params.b2 = parse_array(is, "b2").at(0);
    ckpt.params.ws = parse_array(is, "ws");
    ckpt.params.bs = parse_array(is, "bs").at(0);
    const std::size_t expect_w1 =
        static_cast<std::size_t>(ckpt.params.hidden) * ckpt.params.feat_dim;
    if (ckpt.params.w1.size() != expect_w1 ||
        ckpt.params.b1.size() != static_cast<std::size_t>(ckpt.params.hidden) ||
        ckpt.params.w2.size() != static_cast<std::size_t>(ckpt.params.hidden) ||
        ckpt.params.ws.size() != static_cast<std::size_t>(ckpt.params.hidden)) {
        throw ParseError("checkpoint: array shapes inconsistent with header");
    }
    return ckpt;
}

std::string train_log_csv(const TrainLog& log) {
    std::ostringstream os;
    os << "step,stage,mean_r_acc,mean_f1,mean_iou,mean_kl,loss\n";
    char buf[160];
    for (const auto& r : log.records) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      r.step, r.stage.c_str(), r.mean_r_acc, r.mean_f1,
                      r.mean_iou, r.mean_kl, r.loss);
        os << buf;
    }
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

void write_manifest(const std::filesystem::path& out_dir,
                    const RunManifest& manifest) {
    json j{{"command", manifest.command},
           {"version", manifest.version},
           {"root_seed", manifest.root_seed},
           {"config", parse_json(manifest.config_json)},
           {"outputs", manifest.outputs}};
    const auto tmp = out_dir / "manifest.json.tmp";
    write_file(tmp, j.dump(2) + "\n");
    std::filesystem::rename(tmp, out_dir / "manifest.json");
}

}  // namespace dig
