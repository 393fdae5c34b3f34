#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ecf/ecf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(ECF_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Last line must be the machine-parsable cause.
bool one_line_error(const std::string& out) {
  static const std::regex re("error: [a-z_]+: [^\n]+\n$");
  return std::regex_search(out, re);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ecf_cli_" + std::to_string(getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& rel) const { return (dir_ / rel).string(); }

  fs::path dir_;
};

TEST_F(CliTest, GenIsDeterministicAndWritesManifestLast) {
  for (const char* d : {"a", "b"}) {
    const CliRun r = run("gen --problem diff --desk-scale --seed 0 --n-train 6 --n-valid 2 --n-test 2 --out " + at(d));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  for (const char* split : {"train", "valid", "test"}) {
    const std::string f = std::string("diff_") + split + ".ecfd";
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const json m = json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(m.at("artifacts").size(), 6u);
  EXPECT_EQ(m.at("seeds").at("master"), 0);
  EXPECT_TRUE(m.contains("config_hashes"));
  const auto manifest_time = fs::last_write_time(dir_ / "a" / "manifest.json");
  for (const auto& art : m.at("artifacts"))
    EXPECT_LE(fs::last_write_time(art.at("path").get<std::string>()), manifest_time);
  const json side = json::parse(slurp(dir_ / "a" / "diff_train.ecfd.json"));
  EXPECT_TRUE(side.at("audit").at("passed").get<bool>());
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  std::ofstream(at("cfg.json")) << R"({"problem":{"problem":"heat","resolution":16},
    "gen":{"seed":3,"counts":{"train":2,"valid":0,"test":0}}})";
  const CliRun r = run("gen --config " + at("cfg.json") + " --seed 5 --out " + at("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  const json m = json::parse(slurp(dir_ / "o" / "manifest.json"));
  EXPECT_EQ(m.at("seeds").at("master"), 5);
  const auto ds = ecf::io::read_dataset(dir_ / "o" / "heat_train.ecfd").dataset;
  EXPECT_EQ(ds.grid().resolution[0], 16u);
  EXPECT_EQ(ds.master_seed, 5u);
  EXPECT_FALSE(fs::exists(dir_ / "o" / "heat_valid.ecfd"));
}

TEST_F(CliTest, GeneratedAllenCahnPassesFluxBalance) {
  ASSERT_EQ(run("gen --problem ac_dw --n-train 3 --n-valid 0 --n-test 0 --out " + at("g")).code, 0);
  const auto ds = ecf::io::read_dataset(dir_ / "g" / "ac_dw_train.ecfd").dataset;
  for (const auto& traj : ds.samples)
    for (double r : ecf::pde::verify_flux_balance(traj, ecf::pde::conservation_law(ds.params.problem),
                                                  ds.frame_interval(), ds.mask()))
      EXPECT_LT(r, ecf::pde::flux_balance_tolerance(ds.params.problem));
}

TEST_F(CliTest, FloryHugginsEscapingBandNamesSample) {
  std::ofstream(at("fh.json")) << R"({"problem":{"fh_ic_amplitude":1.5}})";
  const CliRun r = run("gen --problem ac_fh --config " + at("fh.json") +
                    " --n-train 2 --n-valid 0 --n-test 0 --out " + at("fh"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_line_error(r.output)) << r.output;
  EXPECT_NE(r.output.find("train sample 0"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir_ / "fh" / "manifest.json"));
}

TEST_F(CliTest, TrainModesAndLogs) {
  ASSERT_EQ(run("gen --problem diff --n-train 5 --n-valid 2 --n-test 2 --out " + at("d")).code, 0);
  const std::string data = " --train " + at("d/diff_train.ecfd") + " --valid " + at("d/diff_valid.ecfd");
  const std::string small = " --epochs 4 --eval-every 2 --width 4 --modes 3";
  for (const char* mode : {"baseline", "ecf_s", "ecf_i"}) {
    const CliRun r = run(std::string("train --mode ") + mode + data + small + " --out " + at(mode));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  EXPECT_EQ(slurp(dir_ / "baseline" / "model.ecfm"), slurp(dir_ / "ecf_s" / "model.ecfm"));

  std::ifstream log(dir_ / "ecf_i" / "train_log.ndjson");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const json j = json::parse(line);
    EXPECT_EQ(j.at("epoch"), ++lines);
    EXPECT_TRUE(std::isfinite(j.at("loss").get<double>()));
  }
  EXPECT_EQ(lines, 4u);

  const CliRun r = run("train --mode baseline --lr 0 --weight-decay 0 --seed 9" + data + small +
                    " --out " + at("lr0"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto ck = ecf::nn::read_checkpoint(dir_ / "lr0" / "model.ecfm");
  ecf::nn::OperatorConfig cfg;
  cfg.width = 4;
  cfg.modes = 3;
  cfg.seed = 9;
  EXPECT_EQ(ck.model.params, ecf::nn::init_model(cfg).params);
}

TEST_F(CliTest, DivergenceExitsNonzeroAndKeepsLog) {
  ASSERT_EQ(run("gen --problem diff --n-train 5 --n-valid 0 --n-test 0 --out " + at("d")).code, 0);
  const CliRun r = run("train --mode baseline --train " + at("d/diff_train.ecfd") +
                    " --epochs 5 --batch-size 5 --lr 1e200 --out " + at("m"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_line_error(r.output)) << r.output;
  EXPECT_NE(r.output.find("diverged at epoch"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "m" / "train_log.ndjson"));
  EXPECT_FALSE(fs::exists(dir_ / "m" / "manifest.json"));
}

TEST_F(CliTest, EvalBiasedFixtureAndStagedMonotonicity) {
  ASSERT_EQ(run("gen --problem cd --n-train 0 --n-valid 0 --n-test 3 --out " + at("d")).code, 0);
  ecf::nn::OperatorConfig cfg;
  cfg.width = 4;
  cfg.modes = 3;
  ecf::nn::write_checkpoint(dir_ / "biased.ecfm", ecf::nn::identity_model(cfg, 0.01), "{}");
  const std::string test = " --data " + at("d/cd_test.ecfd");
  ASSERT_EQ(run("eval --checkpoint " + at("biased.ecfm") + test + " --correction posthoc --out " + at("r")).code, 0);
  ASSERT_EQ(run("eval --checkpoint " + at("biased.ecfm") + test + " --correction off --out " + at("r")).code, 0);
  const json post = json::parse(slurp(dir_ / "r" / "cd_ecf_s_s0.record.json"));
  const json base = json::parse(slurp(dir_ / "r" / "cd_base_s0.record.json"));
  for (double e : post.at("step_conservation").get<std::vector<double>>()) EXPECT_LE(e, 1e-12);
  const auto pr = post.at("step_rmse").get<std::vector<double>>();
  const auto br = base.at("step_rmse").get<std::vector<double>>();
  ASSERT_EQ(pr.size(), 19u);
  for (std::size_t k = 0; k < pr.size(); ++k) EXPECT_LE(pr[k], br[k] + 1e-9) << k;
}

TEST_F(CliTest, EvalRejectsIncompatibleInputs) {
  ASSERT_EQ(run("gen --problem water --n-train 0 --n-valid 0 --n-test 1 --out " + at("d")).code, 0);
  ecf::nn::OperatorConfig cfg;
  cfg.width = 4;
  cfg.modes = 3;
  ecf::nn::write_checkpoint(dir_ / "one.ecfm", ecf::nn::init_model(cfg), "{}");
  const CliRun r = run("eval --checkpoint " + at("one.ecfm") + " --data " + at("d/water_test.ecfd") +
                    " --correction off --out " + at("r"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_line_error(r.output)) << r.output;
  EXPECT_NE(r.output.find("shape_mismatch"), std::string::npos) << r.output;
  // a split that was never written
  EXPECT_EQ(run("eval --checkpoint " + at("one.ecfm") + " --data " + at("d/water_train.ecfd") +
                " --correction off --out " + at("r")).code,
            2);
}

TEST_F(CliTest, ReportCountsAndIsDeterministic) {
  fs::create_directories(dir_ / "recs");
  std::size_t k = 0;
  for (const char* v : {"base", "+ECF_I", "+ECF_S"})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ecf::MetricsRecord r{"heat", v, seed, "desk", {0.1, 0.2 + 0.01 * seed, 0.3}, {1e-3, 2e-3, 3e-3},
                           0.2, 0.3, 2e-3, 3e-3};
      std::ofstream(dir_ / "recs" / (std::to_string(k++) + ".record.json"))
          << ecf::to_json(r).dump();
    }
  for (const char* o : {"o1", "o2"})
    ASSERT_EQ(run("report --records " + at("recs") + " --format all --out " + at(o)).code, 0);
  const std::string csv = slurp(dir_ / "o1" / "records.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 16);
  for (const char* f : {"records.csv", "summary.csv", "table_rmse.md", "table_conservation.md",
                        "plot_heat_ecf_i.tsv"})
    EXPECT_EQ(slurp(dir_ / "o1" / f), slurp(dir_ / "o2" / f)) << f;
  const std::string plot = slurp(dir_ / "o1" / "plot_heat_base.tsv");
  EXPECT_EQ(std::count(plot.begin(), plot.end(), '\n'), 4);  // header + 3 steps
}

TEST_F(CliTest, VerifyAndUsageExitCodes) {
  const CliRun g = run("verify gradients");
  EXPECT_EQ(g.code, 0) << g.output;
  EXPECT_NE(g.output.find("PASS gradients/fd_mse"), std::string::npos);
  EXPECT_EQ(run("verify everything").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train --mode ecf_i").code, 2);
  const CliRun r = run("report --records " + at("none") + " --out " + at("x"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_line_error(r.output)) << r.output;
}

}  // namespace
