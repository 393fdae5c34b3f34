// ecf: dataset generation, training, evaluation, verification and reports.
//
// Exit codes: 0 ok, 1 failure, 2 bad usage. Every failure prints exactly one
// line to stderr:  error: <code>: <message>
//
// Settings precedence, lowest first: built-in preset, --config file, flags.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecf/ecf.hpp"

#ifndef ECF_GIT_REVISION
#define ECF_GIT_REVISION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "ecf 1.0.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string crc_of_text(const std::string& s) {
  return hex32(ecf::io::crc32_of(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// Run record; written after every artifact it lists.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : started_(utc_now()) {
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["tool_version"] = kToolVersion;
    doc_["code_revision"] = ECF_GIT_REVISION;
    doc_["artifacts"] = json::array();
  }

  void config(const std::string& name, const json& cfg) {
    doc_["configs"][name] = cfg;
    doc_["config_hashes"][name] = crc_of_text(cfg.dump());
  }
  void seed(const std::string& name, std::uint64_t v) { doc_["seeds"][name] = v; }
  void extra(const std::string& key, json v) { doc_[key] = std::move(v); }

  void artifact(const fs::path& p) {
    const auto bytes = ecf::io::read_file(p);
    doc_["artifacts"].push_back(
        {{"path", p.string()}, {"bytes", bytes.size()},
         {"crc32", hex32(ecf::io::crc32_of(bytes.data(), bytes.size()))}});
  }

  void write(const fs::path& path) {
    doc_["started"] = started_;
    doc_["finished"] = utc_now();
    ecf::io::write_text_atomic(path, doc_.dump(2) + "\n");
  }

 private:
  std::string started_;
  json doc_;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  ecf::require(static_cast<bool>(in), ecf::ErrorCode::kIo, "cannot open config " + path);
  try {
    json j = json::parse(in);
    ecf::require(j.is_object(), ecf::ErrorCode::kFormat, "config " + path + " is not an object");
    return j;
  } catch (const json::exception& e) {
    ecf::fail(ecf::ErrorCode::kFormat, "config " + path + ": " + e.what());
  }
}

json section(const json& cfg, const char* name) {
  return cfg.contains(name) ? cfg.at(name) : json::object();
}

// Config value, overridden by the flag when it was given.
template <typename T>
T pick(const json& sec, const char* key, const CLI::Option* flag, const T& flag_value,
       const T& fallback) {
  if (flag && flag->count() > 0) return flag_value;
  if (sec.contains(key)) {
    try {
      return sec.at(key).get<T>();
    } catch (const json::exception& e) {
      ecf::fail(ecf::ErrorCode::kFormat, std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

// ---- gen

struct GenArgs {
  std::string problem, config, out, precision = "f64";
  std::uint64_t seed = 0;
  std::size_t n_train = 0, n_valid = 0, n_test = 0;
  bool paper_scale = false;
  CLI::Option *o_problem{}, *o_seed{}, *o_precision{}, *o_train{}, *o_valid{}, *o_test{};
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv) {
  const json cfg = load_config(a.config);
  const json psec = section(cfg, "problem");
  const json gsec = section(cfg, "gen");
  std::string name = a.problem;
  if (a.o_problem->count() == 0) {
    ecf::require(psec.contains("problem"), ecf::ErrorCode::kInvalidArgument,
                 "no problem given (use --problem or problem.problem in the config)");
    name = psec.at("problem").get<std::string>();
  }
  const ecf::pde::Problem problem = ecf::pde::parse_problem(name);
  if (a.paper_scale)
    std::cerr << "warning: paper-scale settings requested; generation and training will be "
                 "far slower than the desk preset\n";
  ecf::pde::ProblemParams base =
      a.paper_scale ? ecf::pde::paper_scale(problem) : ecf::pde::desk_scale(problem);
  ecf::pde::ProblemParams params = ecf::io::params_from_json(psec, base);
  params.problem = problem;
  params.validate();

  const std::size_t def_train = a.paper_scale ? 500 : 50;
  const std::size_t def_eval = a.paper_scale ? 100 : 10;
  const json csec = section(gsec, "counts");
  const std::uint64_t seed = pick(gsec, "seed", a.o_seed, a.seed, std::uint64_t{0});
  const ecf::Precision precision = ecf::parse_precision(
      pick(gsec, "precision", a.o_precision, a.precision, std::string("f64")));
  const std::vector<std::pair<std::string, std::size_t>> splits = {
      {"train", pick(csec, "train", a.o_train, a.n_train, def_train)},
      {"valid", pick(csec, "valid", a.o_valid, a.n_valid, def_eval)},
      {"test", pick(csec, "test", a.o_test, a.n_test, def_eval)}};

  Manifest manifest("gen", argv);
  json resolved = {{"problem", ecf::io::params_to_json(params)},
                   {"gen", {{"seed", seed},
                            {"precision", std::string(ecf::to_string(precision))},
                            {"scale", a.paper_scale ? "paper" : "desk"}}}};
  for (const auto& [split, n] : splits) resolved["gen"]["counts"][split] = n;
  manifest.config("gen", resolved);
  manifest.seed("master", seed);

  const fs::path out(a.out);
  json audits = json::object();
  std::string audit_failure;
  for (const auto& [split, n] : splits) {
    if (n == 0) continue;
    const ecf::TrajectoryDataset ds = ecf::generate_dataset(params, split, n, seed);
    const ecf::ConservationAudit audit = ecf::audit_conservation(ds);
    const json aj = {{"max_relative_drift", audit.max_relative_drift},
                     {"max_flux_residual", audit.max_flux_residual},
                     {"drift_tolerance", audit.drift_tolerance},
                     {"flux_tolerance", audit.flux_tolerance},
                     {"passed", audit.passed()}};
    audits[split] = aj;
    const fs::path file = out / (std::string(ecf::pde::to_string(problem)) + "_" + split + ".ecfd");
    ecf::io::write_dataset(ds, file, precision, {{"audit", aj}});
    manifest.artifact(file);
    manifest.artifact(file.string() + ".json");
    std::printf("%s: %zu samples, drift %.3g, flux residual %.3g (%s)\n", file.c_str(), n,
                audit.max_relative_drift, audit.max_flux_residual,
                audit.passed() ? "audit ok" : "audit FAILED");
    if (!audit.passed() && audit_failure.empty()) audit_failure = split;
  }
  ecf::require(audit_failure.empty(), ecf::ErrorCode::kNumerical,
               "conservation audit failed on split " + audit_failure);
  manifest.extra("audit", audits);
  manifest.write(out / "manifest.json");
  return 0;
}

// ---- train

struct TrainArgs {
  std::string train, valid, mode, config, out, loss = "mae";
  std::size_t epochs = 200, batch = 5, eval_every = 50, layers = 2, width = 16, modes = 8;
  double lr = 1e-3, wd = 1e-4;
  std::uint64_t seed = 0;
  CLI::Option *o_epochs{}, *o_batch{}, *o_eval{}, *o_layers{}, *o_width{}, *o_modes{}, *o_lr{},
      *o_wd{}, *o_seed{}, *o_loss{};
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const json cfg = load_config(a.config);
  const json tsec = section(cfg, "train");
  const json msec = section(cfg, "model");
  ecf::TrainConfig tc;
  tc.mode = ecf::parse_train_mode(a.mode);
  tc.epochs = pick(tsec, "epochs", a.o_epochs, a.epochs, tc.epochs);
  tc.batch_size = pick(tsec, "batch_size", a.o_batch, a.batch, tc.batch_size);
  tc.eval_every = pick(tsec, "eval_every", a.o_eval, a.eval_every, tc.eval_every);
  tc.lr = pick(tsec, "lr", a.o_lr, a.lr, tc.lr);
  tc.weight_decay = pick(tsec, "weight_decay", a.o_wd, a.wd, tc.weight_decay);
  tc.seed = pick(tsec, "seed", a.o_seed, a.seed, tc.seed);
  tc.loss = ecf::nn::parse_loss(pick(tsec, "loss", a.o_loss, a.loss, std::string("mae")));

  const ecf::io::LoadedDataset train = ecf::io::read_dataset(a.train);
  std::optional<ecf::io::LoadedDataset> valid;
  if (!a.valid.empty()) {
    valid = ecf::io::read_dataset(a.valid);
    ecf::require(valid->dataset.params.problem == train.dataset.params.problem &&
                     valid->dataset.grid() == train.dataset.grid(),
                 ecf::ErrorCode::kShapeMismatch, "validation split does not match training split");
  }

  ecf::nn::OperatorConfig mc;
  mc.n_layers = pick(msec, "n_layers", a.o_layers, a.layers, mc.n_layers);
  mc.width = pick(msec, "width", a.o_width, a.width, mc.width);
  mc.modes = pick(msec, "modes", a.o_modes, a.modes, mc.modes);
  mc.channels = train.dataset.channels();
  mc.dims = train.dataset.grid().dims;
  mc.seed = tc.seed;

  const json model_json = {{"n_layers", mc.n_layers}, {"width", mc.width}, {"modes", mc.modes},
                           {"channels", mc.channels}, {"dims", mc.dims}};
  const json train_json = {{"mode", std::string(ecf::to_string(tc.mode))},
                           {"epochs", tc.epochs}, {"batch_size", tc.batch_size},
                           {"eval_every", tc.eval_every}, {"lr", tc.lr},
                           {"weight_decay", tc.weight_decay},
                           {"loss", std::string(ecf::nn::to_string(tc.loss))}, {"seed", tc.seed}};
  Manifest manifest("train", argv);
  manifest.config("model", model_json);
  manifest.config("train", train_json);
  manifest.seed("train", tc.seed);
  manifest.extra("inputs", {{"train", a.train}, {"valid", a.valid}});

  const fs::path out(a.out);
  const fs::path log_path = out / "train_log.ndjson";
  std::string log;
  auto write_log = [&] { ecf::io::write_text_atomic(log_path, log); };
  ecf::TrainResult result;
  try {
    result = ecf::train(train.dataset, valid ? &valid->dataset : nullptr, ecf::nn::init_model(mc), tc,
                        [&](const ecf::LogRecord& r) { log += ecf::to_json_line(r) + "\n"; });
  } catch (...) {
    write_log();
    throw;
  }
  write_log();
  // No mode in the note: baseline and staged checkpoints stay byte-identical.
  const json note = {{"problem", std::string(ecf::pde::to_string(train.dataset.params.problem))},
                     {"seed", tc.seed},
                     {"best_epoch", result.best_epoch}};
  const fs::path ckpt = out / "model.ecfm";
  ecf::nn::write_checkpoint(ckpt, result.model, note.dump());
  manifest.artifact(ckpt);
  manifest.artifact(log_path);
  manifest.extra("best_epoch", result.best_epoch);
  if (valid) manifest.extra("best_val_rmse", result.best_val_rmse);
  manifest.write(out / "manifest.json");
  std::printf("%s: %s, %zu epochs, final loss %.6g, best epoch %zu\n", ckpt.c_str(),
              std::string(ecf::to_string(tc.mode)).c_str(), tc.epochs, result.log.back().loss,
              result.best_epoch);
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string checkpoint, data, correction, variant, out;
  std::uint64_t seed = 0;
  CLI::Option* o_seed{};
};

std::string default_variant(ecf::RolloutCorrection c) {
  switch (c) {
    case ecf::RolloutCorrection::kOff: return "base";
    case ecf::RolloutCorrection::kEveryStepFeedback: return "+ECF_I";
    case ecf::RolloutCorrection::kPostHocPerStep: return "+ECF_S";
  }
  return "base";
}

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const ecf::RolloutCorrection corr = ecf::parse_rollout_correction(a.correction);
  const ecf::nn::Checkpoint ck = ecf::nn::read_checkpoint(a.checkpoint);
  const ecf::io::LoadedDataset data = ecf::io::read_dataset(a.data);
  const ecf::TrajectoryDataset& ds = data.dataset;
  ecf::require(ck.model.config.dims == ds.grid().dims, ecf::ErrorCode::kShapeMismatch,
               "checkpoint is " + std::to_string(ck.model.config.dims) + "-D, dataset is " +
                   std::to_string(ds.grid().dims) + "-D");

  std::uint64_t seed = a.seed;
  if (a.o_seed->count() == 0) {
    const json note = json::parse(ck.note, nullptr, false);
    if (note.is_object() && note.contains("seed")) seed = note.at("seed").get<std::uint64_t>();
  }
  const std::string variant = a.variant.empty() ? default_variant(corr) : a.variant;
  const std::string problem(ecf::pde::to_string(ds.params.problem));

  const auto results = ecf::evaluate(ck.model, ds, corr);
  for (std::size_t s = 0; s < results.size(); ++s)
    for (const auto& w : results[s].warnings)
      std::cerr << "warning: sample " << s << ": " << w << "\n";
  ecf::MetricsRecord rec = ecf::make_record(problem, variant, seed, results);
  rec.scale = ds.params.resolution == ecf::pde::paper_scale(ds.params.problem).resolution
                  ? "paper"
                  : "desk";
  rec.validate();

  const fs::path out(a.out);
  const std::string stem = problem + "_" + ecf::variant_file_tag(variant) + "_s" + std::to_string(seed);
  const fs::path rec_path = out / (stem + ".record.json");
  ecf::io::write_text_atomic(rec_path, ecf::to_json(rec).dump(1) + "\n");

  Manifest manifest("eval", argv);
  manifest.config("eval", {{"correction", std::string(ecf::to_string(corr))}, {"variant", variant}});
  manifest.seed("model", seed);
  manifest.extra("inputs", {{"checkpoint", a.checkpoint}, {"dataset", a.data}});
  manifest.artifact(rec_path);
  manifest.write(out / (stem + ".manifest.json"));
  std::printf("%s %s seed %llu: mean rmse %s, final rmse %s, max conservation error %s\n",
              problem.c_str(), variant.c_str(), static_cast<unsigned long long>(seed),
              ecf::sci(rec.mean_rmse).c_str(), ecf::sci(rec.final_rmse).c_str(),
              ecf::sci(rec.max_conservation).c_str());
  return 0;
}

// ---- verify

int cmd_verify(const std::string& suite_name) {
  const ecf::verify::Suite suite = ecf::verify::parse_suite(suite_name);
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = ecf::verify::run_suite(suite);
  std::size_t passed = 0;
  for (const auto& r : results) {
    std::puts(ecf::verify::format_result(r).c_str());
    passed += r.passed ? 1 : 0;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("verify %s: %zu/%zu properties passed in %.2fs\n", suite_name.c_str(), passed,
              results.size(), secs);
  if (passed != results.size()) {
    for (const auto& r : results)
      if (!r.passed) {
        std::fflush(stdout);
        ecf::fail(ecf::ErrorCode::kNumerical,
                  "property " + r.suite + "/" + r.name + " failed, counterexample seed " +
                      (r.counterexample_seed ? std::to_string(*r.counterexample_seed) : "none"));
      }
  }
  return 0;
}

// ---- report

int cmd_report(const std::string& records_dir, const std::string& format, const std::string& out,
               const std::vector<std::string>& argv) {
  const ecf::ReportFormat fmt = ecf::parse_report_format(format);
  ecf::require(fs::is_directory(records_dir), ecf::ErrorCode::kIo,
               "records directory " + records_dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(records_dir)) {
    const std::string n = e.path().filename().string();
    if (e.is_regular_file() && n.size() > 12 && n.ends_with(".record.json")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ecf::require(!files.empty(), ecf::ErrorCode::kInvalidArgument,
               "no *.record.json files in " + records_dir);
  std::vector<ecf::MetricsRecord> recs;
  for (const auto& f : files) {
    const auto bytes = ecf::io::read_file(f);
    const json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    ecf::require(!j.is_discarded(), ecf::ErrorCode::kFormat, "record " + f.string() + " is not JSON");
    recs.push_back(ecf::record_from_json(j));
  }
  Manifest manifest("report", argv);
  manifest.config("report", {{"format", format}, {"records", records_dir}});
  const auto written = ecf::emit_report(recs, fmt, out);
  for (const auto& p : written) manifest.artifact(p);
  manifest.write(fs::path(out) / "manifest.json");
  std::printf("%zu records -> %zu files in %s\n", recs.size(), written.size(), out.c_str());
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-frequency conservation correction lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  const std::vector<std::string> args(argv, argv + argc);

  GenArgs g;
  auto* gen = app.add_subcommand("gen", "Generate train/valid/test splits with a conservation audit");
  g.o_problem = gen->add_option("--problem", g.problem, "ac_dw|ac_fh|heat|water|diff|cd")
                    ->check(CLI::IsMember({"ac_dw", "ac_fh", "heat", "water", "diff", "cd"}));
  gen->add_option("--config", g.config, "JSON config with problem/gen sections")
      ->check(CLI::ExistingFile);
  g.o_seed = gen->add_option("--seed", g.seed, "master seed");
  g.o_precision = gen->add_option("--precision", g.precision, "f64|f32 storage")
                      ->check(CLI::IsMember({"f64", "f32"}));
  g.o_train = gen->add_option("--n-train", g.n_train, "training samples");
  g.o_valid = gen->add_option("--n-valid", g.n_valid, "validation samples");
  g.o_test = gen->add_option("--n-test", g.n_test, "test samples");
  auto* desk = gen->add_flag("--desk-scale", "32x32 preset (default)");
  auto* paper = gen->add_flag("--paper-scale", g.paper_scale, "full-resolution preset");
  desk->excludes(paper);
  gen->add_option("--out", g.out, "output directory")->required();

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "Train an operator on a generated split");
  tr->add_option("--train", t.train, "training split (.ecfd)")->required()->check(CLI::ExistingFile);
  tr->add_option("--valid", t.valid, "validation split (.ecfd)")->check(CLI::ExistingFile);
  tr->add_option("--mode", t.mode, "baseline|ecf_i|ecf_s")
      ->required()
      ->check(CLI::IsMember({"baseline", "ecf_i", "ecf_s"}));
  tr->add_option("--config", t.config, "JSON config with model/train sections")
      ->check(CLI::ExistingFile);
  t.o_epochs = tr->add_option("--epochs", t.epochs);
  t.o_batch = tr->add_option("--batch-size", t.batch);
  t.o_eval = tr->add_option("--eval-every", t.eval_every);
  t.o_lr = tr->add_option("--lr", t.lr);
  t.o_wd = tr->add_option("--weight-decay", t.wd);
  t.o_seed = tr->add_option("--seed", t.seed);
  t.o_loss = tr->add_option("--loss", t.loss)->check(CLI::IsMember({"mae", "mse"}));
  t.o_layers = tr->add_option("--layers", t.layers);
  t.o_width = tr->add_option("--width", t.width);
  t.o_modes = tr->add_option("--modes", t.modes);
  tr->add_option("--out", t.out, "output directory")->required();

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "Roll out a checkpoint on a test split");
  ev->add_option("--checkpoint", e.checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", e.data, "test split (.ecfd)")->required()->check(CLI::ExistingFile);
  ev->add_option("--correction", e.correction, "off|feedback|posthoc")
      ->required()
      ->check(CLI::IsMember({"off", "feedback", "posthoc"}));
  ev->add_option("--variant", e.variant, "report label (default from correction)")
      ->check(CLI::IsMember({"base", "+ECF_I", "+ECF_S"}));
  e.o_seed = ev->add_option("--seed", e.seed, "seed label (default: from checkpoint)");
  ev->add_option("--out", e.out, "records directory")->required();

  std::string suite = "all";
  auto* ver = app.add_subcommand("verify", "Run randomized property suites");
  ver->add_option("suite", suite, "theorems|solvers|gradients|all")
      ->check(CLI::IsMember({"theorems", "solvers", "gradients", "all"}));

  std::string records, format = "all", report_out;
  auto* rep = app.add_subcommand("report", "Aggregate metrics records into tables and series");
  rep->add_option("--records", records, "directory of *.record.json")->required();
  rep->add_option("--format", format, "csv|markdown|plotdata|all")
      ->check(CLI::IsMember({"csv", "markdown", "plotdata", "all"}));
  rep->add_option("--out", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::fprintf(stderr, "error: usage: %s\n", one_line(ex.what()).c_str());
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(g, args);
    if (tr->parsed()) return cmd_train(t, args);
    if (ev->parsed()) return cmd_eval(e, args);
    if (ver->parsed()) return cmd_verify(suite);
    if (rep->parsed()) return cmd_report(records, format, report_out, args);
  } catch (const ecf::Error& ex) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(ecf::to_string(ex.code())).c_str(),
                 one_line(ex.what()).c_str());
    return 1;
  } catch (const json::exception& ex) {
    std::fprintf(stderr, "error: format: %s\n", one_line(ex.what()).c_str());
    return 1;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: internal: %s\n", one_line(ex.what()).c_str());
    return 1;
  }
  return 2;
}
