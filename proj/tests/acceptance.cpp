// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Long-running (full desk training on six datasets).
//
//   acceptance [--only N[,N...]] [--out DIR]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ecf/ecf.hpp"

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "  .. %s\n", s.c_str());
  std::fflush(stderr);
}

const ecf::verify::PropertyResult* find(const std::vector<ecf::verify::PropertyResult>& rs,
                                        const std::string& name) {
  for (const auto& r : rs)
    if (r.name == name) return &r;
  return nullptr;
}

// Pass when every named property passed; detail lists worst values and time.
Outcome from_properties(const std::vector<ecf::verify::PropertyResult>& rs,
                        const std::vector<std::pair<std::string, double>>& names_and_budget) {
  Outcome o{true, ""};
  for (const auto& [name, budget] : names_and_budget) {
    const auto* r = find(rs, name);
    if (!r) {
      o.passed = false;
      o.detail += name + " missing; ";
      continue;
    }
    const bool in_time = budget <= 0.0 || r->seconds < budget;
    o.passed = o.passed && r->passed && in_time;
    o.detail += name + " worst=" + fmt("%.2g", r->worst) + " " + fmt("%.2fs", r->seconds);
    if (!in_time) o.detail += " (over " + fmt("%.0fs", budget) + " budget)";
    if (!r->passed) o.detail += " [" + ecf::verify::format_result(*r) + "]";
    o.detail += "; ";
  }
  return o;
}

// ---- criterion 4

struct Extremes {
  double corrected = 0.0;
  double uncorrected = 0.0;
  bool flat = true;
};

// Corrected series must not trend upward: late steps stay within 10x of the
// early ones, above a floor well below the tolerance.
bool no_growth(const std::vector<double>& e, double floor) {
  const std::size_t n = e.size(), q = std::max<std::size_t>(1, n / 4);
  double early = 0.0, late = 0.0;
  for (std::size_t k = 0; k < q; ++k) early = std::max(early, e[k]);
  for (std::size_t k = n - q; k < n; ++k) late = std::max(late, e[k]);
  return late <= 10.0 * early + floor;
}

Extremes biased_fixture(const ecf::TrajectoryDataset& ds, double floor) {
  ecf::nn::OperatorConfig cfg;
  cfg.width = 4;
  cfg.modes = 3;
  cfg.channels = ds.channels();
  const ecf::nn::OperatorModel biased = ecf::nn::identity_model(cfg, 0.01);
  Extremes x;
  for (auto mode : {ecf::RolloutCorrection::kPostHocPerStep,
                    ecf::RolloutCorrection::kEveryStepFeedback}) {
    for (const auto& r : ecf::evaluate(biased, ds, mode)) {
      for (double e : r.conservation) x.corrected = std::max(x.corrected, e);
      x.flat = x.flat && no_growth(r.conservation, floor);
    }
  }
  for (const auto& r : ecf::evaluate(biased, ds, ecf::RolloutCorrection::kOff))
    for (double e : r.conservation) x.uncorrected = std::max(x.uncorrected, e);
  return x;
}

Outcome criterion4(const fs::path& work) {
  Outcome o{true, ""};
  for (auto p : ecf::pde::kAllProblems) {
    const auto params = ecf::pde::desk_scale(p);
    const auto ds = ecf::generate_dataset(params, "test", 10, 0);
    const Extremes f64 = biased_fixture(ds, 1e-13);
    const fs::path f = work / (std::string(ecf::pde::to_string(p)) + "_f32.ecfd");
    ecf::io::write_dataset(ds, f, ecf::Precision::kF32);
    const Extremes f32 = biased_fixture(ecf::io::read_dataset(f).dataset, 2e-7);
    const bool ok = f64.corrected <= 1e-12 && f32.corrected <= 2e-6 && f64.flat && f32.flat;
    o.passed = o.passed && ok;
    o.detail += std::string(ecf::pde::to_string(p)) + " f64=" + fmt("%.1e", f64.corrected) +
                " f32=" + fmt("%.1e", f32.corrected) + " uncorrected=" +
                fmt("%.1e", f64.uncorrected) + (f64.flat && f32.flat ? "" : " GROWS") + "; ";
  }
  return o;
}

// ---- criteria 5 and 8

struct DatasetRun {
  std::string name;
  double seconds = 0.0;
  double worst_gap = -1e300;  // max over steps/trajectories/seeds of posthoc - off
  std::vector<ecf::MetricsRecord> records;
};

DatasetRun train_and_evaluate(ecf::pde::Problem p, std::size_t n_seeds) {
  DatasetRun out;
  out.name = ecf::pde::to_string(p);
  const auto t0 = Clock::now();
  const auto params = ecf::pde::desk_scale(p);
  const auto train = ecf::generate_dataset(params, "train", 50, 0);
  const auto valid = ecf::generate_dataset(params, "valid", 10, 0);
  const auto test = ecf::generate_dataset(params, "test", 10, 0);
  for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
    ecf::nn::OperatorConfig mc;
    mc.channels = params.channels();
    mc.seed = seed;
    ecf::TrainConfig tc;
    tc.seed = seed;
    // Staged training is the baseline run; the correction only enters at
    // evaluation, so one checkpoint serves both variants.
    tc.mode = ecf::TrainMode::kBaseline;
    const auto base = ecf::train(train, &valid, ecf::nn::init_model(mc), tc).model;
    tc.mode = ecf::TrainMode::kIntegrated;
    const auto integ = ecf::train(train, &valid, ecf::nn::init_model(mc), tc).model;

    const auto off = ecf::evaluate(base, test, ecf::RolloutCorrection::kOff);
    const auto post = ecf::evaluate(base, test, ecf::RolloutCorrection::kPostHocPerStep);
    const auto feed = ecf::evaluate(integ, test, ecf::RolloutCorrection::kEveryStepFeedback);
    for (std::size_t s = 0; s < off.size(); ++s)
      for (std::size_t k = 0; k < off[s].rmse.size(); ++k)
        out.worst_gap = std::max(out.worst_gap, post[s].rmse[k] - off[s].rmse[k]);
    out.records.push_back(ecf::make_record(out.name, "base", seed, off));
    out.records.push_back(ecf::make_record(out.name, "+ECF_I", seed, feed));
    out.records.push_back(ecf::make_record(out.name, "+ECF_S", seed, post));
    progress(out.name + " seed " + std::to_string(seed) + " done at " + fmt("%.0fs", since(t0)));
  }
  out.seconds = since(t0);
  return out;
}

// ---- criterion 9

int shell(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// gen -> train (baseline, ecf_i) -> eval (three variants) -> report
bool pipeline(const fs::path& root, std::string& why) {
  const std::string cli = ECF_CLI_PATH;
  fs::remove_all(root);
  for (const char* prob : {"diff", "water"}) {
    const std::string pr = prob;
    const fs::path d = root / "data" / pr;
    if (shell(cli + " gen --problem " + pr + " --seed 0 --n-train 10 --n-valid 4 --n-test 4 --out " +
              d.string()) != 0) {
      why = "gen " + pr + " failed";
      return false;
    }
    const std::string split = " --train " + (d / (pr + "_train.ecfd")).string() + " --valid " +
                              (d / (pr + "_valid.ecfd")).string();
    for (int seed = 0; seed < 2; ++seed) {
      for (const char* mode : {"baseline", "ecf_i"}) {
        const fs::path m = root / "models" / (pr + "_" + mode + "_" + std::to_string(seed));
        if (shell(cli + " train --mode " + mode + split + " --epochs 15 --eval-every 5 --width 8" +
                  " --modes 4 --seed " + std::to_string(seed) + " --out " + m.string()) != 0) {
          why = "train " + pr + " " + mode + " failed";
          return false;
        }
      }
      const std::string test = " --data " + (d / (pr + "_test.ecfd")).string() + " --out " +
                               (root / "records").string();
      const std::string base = (root / "models" / (pr + "_baseline_" + std::to_string(seed)) / "model.ecfm").string();
      const std::string integ = (root / "models" / (pr + "_ecf_i_" + std::to_string(seed)) / "model.ecfm").string();
      if (shell(cli + " eval --checkpoint " + base + " --correction off" + test) != 0 ||
          shell(cli + " eval --checkpoint " + base + " --correction posthoc" + test) != 0 ||
          shell(cli + " eval --checkpoint " + integ + " --correction feedback" + test) != 0) {
        why = "eval " + pr + " failed";
        return false;
      }
    }
  }
  if (shell(cli + " report --records " + (root / "records").string() + " --format all --out " +
            (root / "report").string()) != 0) {
    why = "report failed";
    return false;
  }
  return true;
}

Outcome criterion9(const fs::path& work) {
  std::string why;
  const fs::path a = work / "pipeline_a", b = work / "pipeline_b";
  if (!pipeline(a, why) || !pipeline(b, why)) return {false, why};
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a / "report")) {
    const std::string name = e.path().filename().string();
    if (name == "manifest.json") continue;  // carries wall-clock timestamps
    if (slurp(e.path()) != slurp(b / "report" / name)) return {false, name + " differs"};
    ++compared;
  }
  for (const auto& e : fs::directory_iterator(a / "records")) {
    const std::string name = e.path().filename().string();
    if (!name.ends_with(".record.json")) continue;
    if (slurp(e.path()) != slurp(b / "records" / name)) return {false, name + " differs"};
    ++compared;
  }
  return {compared > 0, std::to_string(compared) + " report and record files byte-identical"};
}

// ---- criterion 10

Outcome criterion10() {
  const auto t0 = Clock::now();
  const int code = shell("ECF_THREADS=1 " + std::string(ECF_CLI_PATH) + " verify all");
  const double s = since(t0);
  return {code == 0 && s < 600.0, "exit " + std::to_string(code) + ", " + fmt("%.1fs", s) +
                                      " single-threaded (budget 600s)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  fs::path work = fs::current_path() / "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (a == "--out" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N[,N...]] [--out DIR]\n");
      return 2;
    }
  }
  auto want = [&](int n) { return only.empty() || only.count(n) > 0; };
  fs::create_directories(work);

  std::map<int, Outcome> results;
  auto guarded = [&](int n, const std::function<Outcome()>& fn) {
    if (!want(n)) return;
    progress("criterion " + std::to_string(n));
    try {
      results[n] = fn();
    } catch (const std::exception& e) {
      results[n] = {false, std::string("exception: ") + e.what()};
    }
  };

  std::vector<ecf::verify::PropertyResult> suite;
  if (want(1) || want(2) || want(3) || want(6) || want(7))
    suite = ecf::verify::run_suite(ecf::verify::Suite::kAll);

  guarded(1, [&] { return from_properties(suite, {{"parseval", 5.0}}); });
  guarded(2, [&] { return from_properties(suite, {{"error_reduction", 10.0}}); });
  guarded(3, [&] {
    return from_properties(suite, {{"flux_balance_heat", 0}, {"flux_balance_diff", 0}});
  });
  guarded(4, [&] { return criterion4(work); });
  guarded(6, [&] {
    return from_properties(suite, {{"diffusion_mode_decay", 0},
                                   {"advection_shift", 0},
                                   {"allen_cahn_first_order", 0},
                                   {"water_mass_drift", 0}});
  });
  guarded(7, [&] {
    return from_properties(suite, {{"fd_mse", 0},
                                   {"fd_mae", 0},
                                   {"fd_ecf_multichannel", 0},
                                   {"fd_ecf_odd_1d", 0},
                                   {"ecf_uniform_direction", 0}});
  });

  if (want(5) || want(8)) {
    std::vector<DatasetRun> runs;
    Outcome c5{true, ""};
    try {
      for (auto p : ecf::pde::kAllProblems) {
        runs.push_back(train_and_evaluate(p, 5));
        const DatasetRun& r = runs.back();
        const bool ok = r.worst_gap <= 1e-9 && r.seconds < 300.0;
        c5.passed = c5.passed && ok;
        c5.detail += r.name + " gap=" + fmt("%.1e", r.worst_gap) + " " + fmt("%.0fs", r.seconds) +
                     (r.seconds < 300.0 ? "" : " (over 300s)") + "; ";
      }
    } catch (const std::exception& e) {
      c5 = {false, std::string("exception: ") + e.what()};
    }
    if (want(5)) results[5] = c5;

    if (want(8)) {
      Outcome c8{!runs.empty(), ""};
      std::vector<ecf::MetricsRecord> all;
      std::ostringstream md;
      md << "# Directional comparison (desk scale, 5 seeds, mean rollout RMSE)\n\n"
         << "Absolute values are not comparable to the full-resolution benchmark.\n\n"
         << "| dataset | base | +ECF_I | +ECF_S | +ECF_S <= base |\n|---|---|---|---|---|\n";
      for (const DatasetRun& r : runs) {
        for (const auto& rec : r.records) all.push_back(rec);
        std::map<std::string, double> mean;
        for (const auto& c : ecf::summarize(r.records)) mean[c.variant] = c.mean_rmse.mean;
        const bool staged_ok = mean["+ECF_S"] <= mean["base"] + 1e-9;
        c8.passed = c8.passed && staged_ok;
        md << "| " << r.name << " | " << ecf::sci(mean["base"]) << " | " << ecf::sci(mean["+ECF_I"])
           << " | " << ecf::sci(mean["+ECF_S"]) << " | " << (staged_ok ? "yes" : "no") << " |\n";
        c8.detail += r.name + " base=" + ecf::sci(mean["base"]) + " I=" + ecf::sci(mean["+ECF_I"]) +
                     " S=" + ecf::sci(mean["+ECF_S"]) + "; ";
      }
      if (!all.empty()) {
        ecf::emit_report(all, ecf::ReportFormat::kAll, work / "report");
        ecf::io::write_text_atomic(work / "report" / "directional.md", md.str());
        c8.detail += "written to " + (work / "report").string();
      }
      results[8] = c8;
    }
  }

  guarded(9, [&] { return criterion9(work); });
  guarded(10, [&] { return criterion10(); });

  bool all_ok = true;
  for (auto& [n, o] : results) {
    while (o.detail.ends_with("; ") || o.detail.ends_with(" ")) o.detail.pop_back();
    std::printf("%s criterion %d: %s\n", o.passed ? "PASS" : "FAIL", n, o.detail.c_str());
    all_ok = all_ok && o.passed;
  }
  return all_ok ? 0 : 1;
}
