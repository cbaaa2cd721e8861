#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "remtime/cli.hpp"
#include "remtime/config.hpp"
#include "remtime/errors.hpp"

using namespace remtime;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("remtime_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// synth -> prepare -> train -> predict into `root`; returns the predictions path.
fs::path pipeline(const fs::path& root) {
    const std::vector<std::string> small{"--set", "train.max_epochs=3", "--set", "train.batch_size=64",
                                         "--set", "model.conv_channels=8,8", "--set", "model.dense_units=16"};
    REQUIRE(call({"synth", "--set", "synth.n=120", "--seed", "5", "--run-dir", (root / "synth").string()}).code == 0);
    auto r = call({"prepare", "--log", (root / "synth" / "log.csv").string(), "--set", "schema.categorical=channel",
                   "--set", "schema.numeric=amount", "--set", "schema.sequence_length=8", "--run-dir",
                   (root / "prep").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::vector<std::string> train{"train", "--prepared", (root / "prep").string(), "--run-dir", (root / "train").string()};
    train.insert(train.end(), small.begin(), small.end());
    r = call(train);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = call({"predict", "--prepared", (root / "prep").string(), "--checkpoint",
              (root / "train" / "checkpoint.json").string(), "--mc-samples", "10", "--threads", "2", "--run-dir",
              (root / "pred").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return root / "pred" / "predictions.csv";
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    auto r = call({});
    CHECK(r.code == 2);
    CHECK(r.err.find("usage: remtime") != std::string::npos);
    r = call({"frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown command 'frobnicate'") != std::string::npos);
    CHECK(call({"train", "--no-such-flag"}).code == 2);
    CHECK(call({"train", "--mc-samples", "many"}).code == 2);
    r = call({"predict", "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--mc-samples") != std::string::npos);
}

TEST_CASE("configuration errors exit with 1") {
    const auto root = scratch("cfg");
    auto r = call({"synth", "--set", "model.colour=red", "--run-dir", (root / "a").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown config key 'model.colour'") != std::string::npos);
    r = call({"synth", "--set", "synth.n=ten", "--run-dir", (root / "b").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("config error") != std::string::npos);
    r = call({"train", "--run-dir", (root / "c").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--prepared") != std::string::npos);
    r = call({"prepare", "--log", (root / "missing.csv").string(), "--run-dir", (root / "d").string()});
    CHECK(r.code == 1);
    fs::remove_all(root);
}

TEST_CASE("config layering: defaults, file, then flags") {
    config::RunConfig cfg;
    CHECK(cfg.integer("train.batch_size") == 256);
    cfg.merge_yaml("train:\n  batch_size: 32\n  learning_rate: 0.01\nschema:\n  numeric: [a, b]\n");
    CHECK(cfg.integer("train.batch_size") == 32);
    CHECK(cfg.texts("schema.numeric") == std::vector<std::string>{"a", "b"});
    cfg.set_assignment("train.batch_size=8");
    CHECK(cfg.integer("train.batch_size") == 8);
    CHECK_THROWS_AS(cfg.merge_yaml("train:\n  warp: 9\n"), ConfigError);
    CHECK_THROWS_AS(cfg.set_assignment("novalue"), ConfigError);
    config::RunConfig other;
    CHECK(other.canonical() != cfg.canonical());
    CHECK(config::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("full pipeline writes artifacts and a manifest") {
    const auto root = scratch("pipe");
    {
        std::ofstream y(root / "cfg.yaml");
        y << "synth:\n  n: 80\n";
    }
    auto r = call({"synth", "--config", (root / "cfg.yaml").string(), "--runs-root", (root / "runs").string()});
    REQUIRE(r.code == 0);
    std::size_t made = 0;
    fs::path synth_dir;
    for (const auto& e : fs::directory_iterator(root / "runs")) {
        ++made;
        synth_dir = e.path();
    }
    CHECK(made == 1);
    CHECK(synth_dir.filename().string().rfind("synth-", 0) == 0);
    CHECK(fs::exists(synth_dir / "truth.csv"));
    const json m = json::parse(slurp(synth_dir / "manifest.json"));
    CHECK(m["format"] == "remtime-run");
    CHECK(m["command"] == "synth");
    CHECK(m["config"]["synth.n"] == "80");
    for (const auto& a : m["artifacts"]) {
        CHECK(a["sha256"] == config::sha256_file(synth_dir / a["path"].get<std::string>()));
    }
    // a second run with the same config gets its own directory
    REQUIRE(call({"synth", "--config", (root / "cfg.yaml").string(), "--runs-root", (root / "runs").string()}).code == 0);
    made = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "runs")) ++made;
    CHECK(made == 2);

    const auto pred = pipeline(root / "p");
    CHECK(slurp(pred).rfind("case_id,prefix_length,target,mean,epistemic_var,aleatoric_var,total_std\n", 0) == 0);
    CHECK(fs::exists(root / "p" / "train" / "training_log.csv"));
    const json split = json::parse(slurp(root / "p" / "prep" / "split.json"));
    CHECK(split.contains("deleted"));

    r = call({"baseline", "--prepared", (root / "p" / "prep").string(), "--run-dir", (root / "p" / "ats").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = call({"evaluate", "--predictions", "bnn=" + pred.string(), "--predictions",
              "ats=" + (root / "p" / "ats" / "predictions.csv").string(), "--set", "evaluation.base=ats", "--run-dir",
              (root / "p" / "eval").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(root / "p" / "eval" / "comparison.csv"));
    CHECK(fs::exists(root / "p" / "eval" / "retention_bnn.svg"));

    r = call({"calibrate", "--predictions", pred.string(), "--set", "calibration.window=50", "--set",
              "calibration.stride=20", "--run-dir", (root / "p" / "cal").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(root / "p" / "cal" / "calibration.csv"));
    fs::remove_all(root);
}

TEST_CASE("identical seeds give byte-identical predictions") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    CHECK(slurp(pipeline(a)) == slurp(pipeline(b)));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("installed binary reports exit codes") {
    const char* bin = std::getenv("REMTIME_CLI");
    if (bin == nullptr) return;
    const std::string quiet = " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system((std::string(bin) + quiet).c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((std::string(bin) + " --help" + quiet).c_str())) == 0);
    CHECK(WEXITSTATUS(std::system((std::string(bin) + " synth --set nope=1" + quiet).c_str())) == 1);
}
