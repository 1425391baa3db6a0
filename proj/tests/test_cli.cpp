#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "lrcl/cli.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = lrcl::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// Small enough that a full pipeline takes about a second.
fs::path tiny_config(const fs::path& dir) {
  const nlohmann::json j = {
      {"data",
       {{"synth", {{"num_classes", 3}, {"windows_per_class", 16}}},
        {"validation_windows_per_class", 4},
        {"test_windows_per_class", 4}}},
      {"pretrain", {{"batch_size", 8}, {"epochs", 1}, {"latent_size", 8}}},
      {"finetune", {{"batch_size", 8}, {"epochs", 2}}},
      {"eval", {{"counts", {1, 2}}, {"repeats", 1}, {"batch_sizes", {8}}, {"latent_sizes", {8}}}}};
  const fs::path p = dir / "config.json";
  write_file(p, j.dump());
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help lists config keys and exit codes") {
    const Result r = cli({"--help"});
    CHECK(r.code == lrcl::kExitOk);
    CHECK(r.out.find("pretrain.temperature = 0.05") != std::string::npos);
    CHECK(r.out.find("LRCL_LOG") != std::string::npos);
    CHECK(r.out.find("Exit codes") != std::string::npos);
  }

  TEST_CASE("usage errors exit with code 2") {
    CHECK(cli({}).code == lrcl::kExitUsage);
    CHECK(cli({"frobnicate"}).code == lrcl::kExitUsage);
    CHECK(cli({"pretrain", "--bogus"}).code == lrcl::kExitUsage);
    CHECK(cli({"synth"}).code == lrcl::kExitUsage);
    const auto dir = oracle::temp_dir("cli_usage");
    write_file(dir / "bad.json", R"({"pretrain": {"temprature": 0.1}})");
    const Result r = cli({"synth", "--config", (dir / "bad.json").string(), "--out", (dir / "x.lrw").string()});
    CHECK(r.code == lrcl::kExitUsage);
    CHECK(r.err.find("pretrain.temprature") != std::string::npos);
    CHECK(cli({"synth", "--out", (dir / "x.lrw").string(), "--split", "dev"}).code == lrcl::kExitUsage);
    CHECK(cli({"pretrain", "--out", (dir / "p.ckpt").string(), "--batch-size", "1"}).code == lrcl::kExitUsage);
  }

  TEST_CASE("pipeline writes checkpoints, traces and reports") {
    const auto dir = oracle::temp_dir("cli_pipeline");
    const std::string cfg = tiny_config(dir).string();
    auto path = [&](const char* name) { return (dir / name).string(); };
    for (const char* split : {"train", "validation", "test"}) {
      REQUIRE(cli({"synth", "--config", cfg, "--split", split, "--out", path(split)}).code == 0);
    }
    REQUIRE(cli({"pretrain", "--config", cfg, "--data", path("train"), "--out", path("pre.ckpt")}).code == 0);
    CHECK(slurp(dir / "pre.ckpt.loss.csv").rfind("step,epoch,split,value\n", 0) == 0);
    REQUIRE(cli({"finetune", "--config", cfg, "--checkpoint", path("pre.ckpt"), "--data", path("train"),
                 "--validation", path("validation"), "--labels-per-class", "4", "--out", path("fine.ckpt")})
                .code == 0);
    REQUIRE(cli({"supervised", "--config", cfg, "--data", path("train"), "--validation", path("validation"),
                 "--out", path("sup.ckpt")})
                .code == 0);
    const Result e = cli({"evaluate", "--checkpoint", path("fine.ckpt"), "--data", path("test"), "--side", "right",
                          "--out", path("report.json")});
    REQUIRE(e.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report.at("side") == "right");
    CHECK(report.at("evaluated") == 12);
    CHECK(report.at("macro_f1").get<double>() >= 0.0);
    CHECK(slurp(dir / "report.json.confusion.csv").rfind("true\\pred,", 0) == 0);
    CHECK(cli({"pretrain-simclr", "--config", cfg, "--side", "both", "--out", path("simclr.ckpt")}).code == 0);
    // A pretrained checkpoint has no classifier to evaluate.
    CHECK(cli({"evaluate", "--checkpoint", path("pre.ckpt"), "--data", path("test")}).code == lrcl::kExitUsage);
  }

  TEST_CASE("experiments write their tables") {
    const auto dir = oracle::temp_dir("cli_experiment");
    const std::string cfg = tiny_config(dir).string();
    const std::string out = (dir / "run").string();
    REQUIRE(cli({"experiment", "--config", cfg, "--kind", "reduced_labels", "--out", out}).code == 0);
    CHECK(fs::exists(dir / "run" / "config.json"));
    CHECK(slurp(dir / "run" / "curve.csv").find("\n2,supervised,1,") != std::string::npos);
    REQUIRE(cli({"experiment", "--config", cfg, "--kind", "sweep", "--labels-per-class", "2", "--out", out}).code ==
            0);
    CHECK(slurp(dir / "run" / "sweep.csv").find("\n8,8,") != std::string::npos);
    REQUIRE(cli({"experiment", "--config", cfg, "--kind", "repeats", "--labels-per-class", "2", "--out", out}).code ==
            0);
    CHECK(nlohmann::json::parse(slurp(dir / "run" / "repeats.json")).at("ssl").at("runs") == 1);
    CHECK(cli({"experiment", "--config", cfg, "--kind", "nope", "--out", out}).code == lrcl::kExitUsage);
  }

  TEST_CASE("corrupt inputs exit with code 3") {
    const auto dir = oracle::temp_dir("cli_corrupt");
    const std::string cfg = tiny_config(dir).string();
    const std::string data = (dir / "train").string();
    const std::string ckpt = (dir / "pre.ckpt").string();
    REQUIRE(cli({"synth", "--config", cfg, "--out", data}).code == 0);
    REQUIRE(cli({"pretrain", "--config", cfg, "--data", data, "--out", ckpt}).code == 0);

    std::string bytes = slurp(ckpt);
    bytes[0] = 'X';
    write_file(dir / "magic.ckpt", bytes);
    write_file(dir / "short.ckpt", slurp(ckpt).substr(0, slurp(ckpt).size() / 2));
    const std::string d = slurp(data);
    write_file(dir / "short.lrw", d.substr(0, d.size() - 7));
    for (const char* bad : {"magic.ckpt", "short.ckpt"}) {
      const Result r = cli({"finetune", "--config", cfg, "--checkpoint", (dir / bad).string(), "--out",
                            (dir / "f.ckpt").string()});
      CHECK(r.code == lrcl::kExitCorruption);
    }
    CHECK(cli({"pretrain", "--config", cfg, "--data", (dir / "short.lrw").string(), "--out", ckpt}).code ==
          lrcl::kExitCorruption);
  }

  TEST_CASE("diverging loss exits with code 4") {
    const auto dir = oracle::temp_dir("cli_nan");
    const std::string cfg = tiny_config(dir).string();
    const Result r =
        cli({"pretrain", "--config", cfg, "--epochs", "5", "--lr", "1e30", "--out", (dir / "p.ckpt").string()});
    CHECK(r.code == lrcl::kExitNumeric);
  }

  TEST_CASE("the installed tool returns the same exit codes") {
    const std::string tool = LRCL_TOOL_PATH;
    auto status = [](const std::string& cmd) {
      const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
      return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status(tool + " --help") == 0);
    CHECK(status(tool + " pretrain --no-such-flag") == 2);
  }
}
