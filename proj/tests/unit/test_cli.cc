// Spawns the real binary; ZEROPROMPT_CLI_PATH is injected by the build.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args) {
  const std::string out_path = "/tmp/zeroprompt_cli_stdout.txt";
  const std::string err_path = "/tmp/zeroprompt_cli_stderr.txt";
  const std::string cmd = std::string(ZEROPROMPT_CLI_PATH) + " " + args + " >" + out_path +
                          " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

const std::string kWork = "/tmp/zeroprompt_cli_work";

// Timeline logs are byte-reproducible except for the wall-clock timing
// field in the final record.
std::string strip_wall_clock(const std::string& log) {
  static const std::regex clock_re("\"processing_seconds\":[^,}]+");
  return std::regex_replace(log, clock_re, "\"processing_seconds\":0");
}

// One tiny trained model shared by the decode/bench cases.
std::string tiny_model_dir() {
  static bool made = [] {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const RunResult r = run_cli("train-toy --out " + kWork +
                                "/m --seed 3 --epochs 2 --utts 6 --heldout-utts 2");
    REQUIRE(r.exit_code == 0);
    return true;
  }();
  (void)made;
  return kWork + "/m";
}

}  // namespace

TEST_CASE("missing required flag is a usage error with exit code 2") {
  const RunResult r = run_cli("train-toy");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("--out") != std::string::npos);
}

TEST_CASE("unknown subcommand is a usage error") {
  CHECK(run_cli("frobnicate").exit_code == 2);
}

TEST_CASE("training twice with one seed gives byte-identical models") {
  const std::string dir = tiny_model_dir();
  const RunResult again = run_cli("train-toy --out " + kWork +
                                  "/m2 --seed 3 --epochs 2 --utts 6 --heldout-utts 2");
  REQUIRE(again.exit_code == 0);
  CHECK(slurp(dir + "/model.zpm") == slurp(kWork + "/m2/model.zpm"));
  CHECK(slurp(dir + "/train.zpc") == slurp(kWork + "/m2/train.zpc"));
  CHECK(slurp(dir + "/loss_curve.txt") == slurp(kWork + "/m2/loss_curve.txt"));
  CHECK(!slurp(dir + "/manifest.json").empty());
}

TEST_CASE("mask inspection matches the mask builder") {
  RunResult r = run_cli("inspect-mask --real 2 --zp 2 --block 2");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("xx..\n") != std::string::npos);  // real rows blind to prompt
  CHECK(r.out.find("xxxx\n") != std::string::npos);

  r = run_cli("inspect-mask --real 3 --zp 0 --block 3");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("xxx\n") != std::string::npos);
  CHECK(r.out.find(".") == std::string::npos);

  r = run_cli("inspect-mask --real 2 --zp 4 --block 2");
  CHECK(r.exit_code == 0);
  // Two prompt blocks: first sees 4 columns, second all 6.
  CHECK(r.out.find("xxxx..\n") != std::string::npos);
  CHECK(r.out.find("xxxxxx\n") != std::string::npos);
}

TEST_CASE("decode is deterministic and a zero-length prompt equals causal") {
  const std::string dir = tiny_model_dir();
  const std::string base = "decode --model " + dir + "/model.zpm --corpus " + dir +
                           "/heldout.zpc --chunk-ms 80 ";

  const RunResult causal = run_cli(base + "--mode causal --out " + kWork + "/causal.jsonl");
  REQUIRE(causal.exit_code == 0);
  const RunResult causal2 = run_cli(base + "--mode causal --out " + kWork + "/causal2.jsonl");
  REQUIRE(causal2.exit_code == 0);
  CHECK(strip_wall_clock(slurp(kWork + "/causal.jsonl")) ==
        strip_wall_clock(slurp(kWork + "/causal2.jsonl")));

  const RunResult zp0 =
      run_cli(base + "--mode zeroprompt --zp-ms 0 --out " + kWork + "/zp0.jsonl");
  REQUIRE(zp0.exit_code == 0);
  CHECK(strip_wall_clock(slurp(kWork + "/zp0.jsonl")) ==
        strip_wall_clock(slurp(kWork + "/causal.jsonl")));

  // start-layer -1 disables the prompt region entirely.
  const RunResult minus1 = run_cli(base + "--mode zeroprompt --zp-ms 80 --start-layer -1 --out " +
                                   kWork + "/minus1.jsonl");
  REQUIRE(minus1.exit_code == 0);
  CHECK(strip_wall_clock(slurp(kWork + "/minus1.jsonl")) ==
        strip_wall_clock(slurp(kWork + "/causal.jsonl")));

  CHECK(!slurp(kWork + "/causal.jsonl.manifest.json").empty());
}

TEST_CASE("prompt flags outside zeroprompt mode warn and are ignored") {
  const std::string dir = tiny_model_dir();
  const RunResult r = run_cli("decode --model " + dir + "/model.zpm --corpus " + dir +
                              "/heldout.zpc --chunk-ms 80 --mode causal --zp-ms 80 --out -");
  CHECK(r.exit_code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("invalid start layer is a runtime error") {
  const std::string dir = tiny_model_dir();
  const RunResult r = run_cli("decode --model " + dir + "/model.zpm --corpus " + dir +
                              "/heldout.zpc --chunk-ms 80 --mode zeroprompt --zp-ms 80 "
                              "--start-layer 99 --out -");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("start_layer") != std::string::npos);
}

TEST_CASE("bench sweeps keep the wer column constant") {
  const std::string dir = tiny_model_dir();
  const RunResult r = run_cli("bench --model " + dir + "/model.zpm --corpus " + dir +
                              "/heldout.zpc --chunk-ms 80 --zp-ms 0 --zp-ms 80 --out " +
                              kWork + "/report.txt");
  REQUIRE(r.exit_code == 0);
  const std::string doc = slurp(kWork + "/report.txt");
  CHECK(doc.find("## raw") != std::string::npos);
  // Both rows report identical error counts.
  const size_t first = doc.find("\"wer\":");
  const size_t second = doc.find("\"wer\":", first + 1);
  REQUIRE(second != std::string::npos);
  const std::string w1 = doc.substr(first, doc.find("}", first) - first);
  const std::string w2 = doc.substr(second, doc.find("}", second) - second);
  CHECK(w1 == w2);
}

TEST_CASE("bench refuses multi-threaded timing runs") {
  const std::string dir = tiny_model_dir();
  const RunResult r = run_cli("bench --model " + dir + "/model.zpm --corpus " + dir +
                              "/heldout.zpc --chunk-ms 80 --zp-ms 80 --threads 2 --out -");
  CHECK(r.exit_code == 2);
}
