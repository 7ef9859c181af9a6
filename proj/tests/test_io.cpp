#include <doctest.h>

#include <filesystem>

#include "dig/io.hpp"
#include "dig/png.hpp"
#include "dig/render.hpp"
#include "dig/scene.hpp"

using namespace dig;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "dig_io_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("encode_png emits a well-formed signature and is deterministic") {
    const SceneConfig scene = generate_scene(4, 3, 5);
    const Image img = render_scene(scene);
    const std::string bytes = encode_png(img);
    REQUIRE(bytes.size() > 8);
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    for (int i = 0; i < 8; ++i) {
        CHECK(static_cast<unsigned char>(bytes[i]) == sig[i]);
    }
    CHECK(encode_png(img) == bytes);
    // IEND trailer closes the stream.
    CHECK(bytes.find("IEND") == bytes.size() - 8);
}

TEST_CASE("write_png round-trips through the filesystem") {
    const fs::path path = temp_dir() / "img.png";
    const Image img(32, 16, Rgb{10, 200, 30});
    write_png(path, img);
    CHECK(read_file(path) == encode_png(img));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    Checkpoint ckpt;
    ckpt.params = init_policy(FeatureMatrix::kDim, 32, 123);
    // Force awkward values that decimal formatting would mangle.
    ckpt.params.w1[0] = 0.1 + 0.2;
    ckpt.params.b2 = -1.0 / 3.0;
    ckpt.params.bs = 1e-300;
    ckpt.step = 42;
    ckpt.stage_index = 1;
    ckpt.grid_size = 8;

    const fs::path path = temp_dir() / "ckpt.txt";
    save_checkpoint(path, ckpt);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.params.flatten() == ckpt.params.flatten());
    CHECK(loaded.step == 42);
    CHECK(loaded.stage_index == 1);
    CHECK(loaded.grid_size == 8);

    // Saving the loaded state reproduces the file byte for byte.
    const fs::path again = temp_dir() / "ckpt2.txt";
    save_checkpoint(again, loaded);
    CHECK(read_file(again) == read_file(path));
}

TEST_CASE("load_checkpoint rejects truncated files") {
    const fs::path path = temp_dir() / "bad.txt";
    write_file(path, "not a checkpoint\n");
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
}

TEST_CASE("annotation records round-trip") {
    AnnotationRecord rec;
    rec.pair_id = "pair_00000000000000ff";
    rec.boxes = {BBox{1, 2, 3, 4}, BBox{10, 20, 30, 40}};
    rec.kinds = {ModKind::Remove, ModKind::ColorChange};
    rec.count_hint = 2;
    const std::string line = annotation_to_line(rec);
    CHECK(line.find('\n') == std::string::npos);
    const AnnotationRecord back = annotation_from_line(line);
    CHECK(back.pair_id == rec.pair_id);
    CHECK(back.boxes == rec.boxes);
    CHECK(back.kinds == rec.kinds);
    CHECK(back.count_hint == 2);
    CHECK(annotation_to_line(back) == line);
}

TEST_CASE("prediction records round-trip including tricky text") {
    PredictionRecord rec;
    rec.pair_id = "p1";
    rec.text = "the \"answer\" is [[1,2,3,4]]\nwith a newline";
    const std::string line = prediction_to_line(rec);
    CHECK(line.find('\n') == std::string::npos);
    const PredictionRecord back = prediction_from_line(line);
    CHECK(back.pair_id == rec.pair_id);
    CHECK(back.text == rec.text);
}

TEST_CASE("jsonl readers recover every line") {
    const fs::path path = temp_dir() / "ann.jsonl";
    std::string body;
    for (int i = 0; i < 5; ++i) {
        AnnotationRecord rec;
        rec.pair_id = "p" + std::to_string(i);
        rec.boxes = {BBox{0, 0, i + 1, i + 1}};
        rec.kinds = {ModKind::Add};
        body += annotation_to_line(rec) + "\n";
    }
    write_file(path, body);
    const auto records = read_annotations(path);
    REQUIRE(records.size() == 5);
    CHECK(records[3].pair_id == "p3");
    CHECK(records[3].boxes[0] == BBox{0, 0, 4, 4});
}

TEST_CASE("train_log_csv lists a header plus one row per record") {
    TrainLog log;
    TrainRecord rec;
    rec.step = 1;
    rec.stage = "dig1";
    rec.mean_r_acc = 0.25;
    rec.loss = -0.5;
    log.records = {rec, rec};
    const std::string csv = train_log_csv(log);
    CHECK(csv.rfind("step,stage,", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 3);
}

TEST_CASE("sha256 matches known vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const fs::path path = temp_dir() / "abc.txt";
    write_file(path, "abc");
    CHECK(sha256_file(path) == sha256_hex("abc"));
}

TEST_CASE("write_manifest records digests of listed outputs") {
    const fs::path dir = temp_dir() / "run";
    fs::create_directories(dir);
    write_file(dir / "a.txt", "hello");

    RunManifest man;
    man.command = "generate";
    man.version = "0.1.0";
    man.root_seed = 9;
    man.config_json = "{}";
    man.outputs["a.txt"] = sha256_file(dir / "a.txt");
    write_manifest(dir, man);

    const std::string text = read_file(dir / "manifest.json");
    CHECK(text.find("\"a.txt\"") != std::string::npos);
    CHECK(text.find(sha256_hex("hello")) != std::string::npos);
    CHECK(text.find("\"generate\"") != std::string::npos);
    CHECK(text.back() == '\n');
}
