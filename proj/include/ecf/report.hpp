#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "ecf/error.hpp"
#include "ecf/io/binary.hpp"
#include "ecf/pde/problem.hpp"
#include "ecf/training.hpp"

namespace ecf {

/// Evaluation summary of one (dataset, variant, seed) run. Per-step series
/// are averaged over the test trajectories.
struct MetricsRecord {
  std::string dataset;
  std::string variant;  // base, +ECF_I, +ECF_S
  std::uint64_t seed = 0;
  std::string scale = "desk";
  std::vector<double> step_rmse;
  std::vector<double> step_conservation;
  double mean_rmse = 0.0;
  double final_rmse = 0.0;
  double mean_conservation = 0.0;
  double max_conservation = 0.0;

  void validate() const {
    require(!step_rmse.empty() && step_rmse.size() == step_conservation.size(),
            ErrorCode::kShapeMismatch, "metrics record step series are inconsistent");
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    bool good = ok(mean_rmse) && ok(final_rmse) && ok(mean_conservation) && ok(max_conservation);
    for (double v : step_rmse) good = good && ok(v);
    for (double v : step_conservation) good = good && ok(v);
    require(good, ErrorCode::kNonFinite,
            "metrics record " + dataset + " " + variant + " has non-finite or negative values");
  }
};

inline MetricsRecord make_record(std::string dataset, std::string variant, std::uint64_t seed,
                                 const std::vector<RolloutResult>& results) {
  require(!results.empty(), ErrorCode::kInvalidArgument, "no rollouts to summarize");
  MetricsRecord r{std::move(dataset), std::move(variant), seed, "desk", {}, {}, 0, 0, 0, 0};
  const std::size_t steps = results[0].rmse.size();
  r.step_rmse.assign(steps, 0.0);
  r.step_conservation.assign(steps, 0.0);
  for (const auto& res : results) {
    require(res.rmse.size() == steps && res.conservation.size() == steps,
            ErrorCode::kShapeMismatch, "rollouts have different step counts");
    for (std::size_t k = 0; k < steps; ++k) {
      r.step_rmse[k] += res.rmse[k];
      r.step_conservation[k] += res.conservation[k];
    }
  }
  const double n = static_cast<double>(results.size());
  for (std::size_t k = 0; k < steps; ++k) {
    r.step_rmse[k] /= n;
    r.step_conservation[k] /= n;
  }
  r.mean_rmse = mean_of(r.step_rmse);
  r.final_rmse = r.step_rmse.back();
  r.mean_conservation = mean_of(r.step_conservation);
  for (const auto& res : results)
    for (double v : res.conservation) r.max_conservation = std::max(r.max_conservation, v);
  return r;
}

inline nlohmann::json to_json(const MetricsRecord& r) {
  return {{"dataset", r.dataset},
          {"variant", r.variant},
          {"seed", r.seed},
          {"scale", r.scale},
          {"step_rmse", r.step_rmse},
          {"step_conservation", r.step_conservation},
          {"mean_rmse", r.mean_rmse},
          {"final_rmse", r.final_rmse},
          {"mean_conservation", r.mean_conservation},
          {"max_conservation", r.max_conservation}};
}

inline MetricsRecord record_from_json(const nlohmann::json& j) {
  try {
    MetricsRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scale = j.value("scale", "desk");
    r.step_rmse = j.at("step_rmse").get<std::vector<double>>();
    r.step_conservation = j.at("step_conservation").get<std::vector<double>>();
    r.mean_rmse = j.at("mean_rmse").get<double>();
    r.final_rmse = j.at("final_rmse").get<double>();
    r.mean_conservation = j.at("mean_conservation").get<double>();
    r.max_conservation = j.at("max_conservation").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad metrics record: ") + e.what());
  }
}

inline const std::vector<std::string>& variant_order() {
  static const std::vector<std::string> v{"base", "+ECF_I", "+ECF_S"};
  return v;
}

inline std::string variant_file_tag(const std::string& v) {
  if (v == "base") return "base";
  if (v == "+ECF_I") return "ecf_i";
  if (v == "+ECF_S") return "ecf_s";
  return v;
}

namespace detail {

inline std::size_t dataset_rank(const std::string& d) {
  for (std::size_t k = 0; k < pde::kAllProblems.size(); ++k)
    if (pde::to_string(pde::kAllProblems[k]) == d) return k;
  return pde::kAllProblems.size();
}

inline std::size_t variant_rank(const std::string& v) {
  const auto& order = variant_order();
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), v) - order.begin());
}

}  // namespace detail

/// Sorts by (dataset, variant, seed).
inline void sort_records(std::vector<MetricsRecord>& recs) {
  std::stable_sort(recs.begin(), recs.end(), [](const MetricsRecord& a, const MetricsRecord& b) {
    return std::make_tuple(detail::dataset_rank(a.dataset), a.dataset,
                           detail::variant_rank(a.variant), a.variant, a.seed) <
           std::make_tuple(detail::dataset_rank(b.dataset), b.dataset,
                           detail::variant_rank(b.variant), b.variant, b.seed);
  });
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2E", v);
  return buf;
}

/// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  out.mean = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(s / static_cast<double>(v.size()));
  return out;
}

/// Seeds of one (dataset, variant) cell, aggregated.
struct CellSummary {
  std::string dataset;
  std::string variant;
  std::size_t seeds = 0;
  MeanStd mean_rmse;
  MeanStd final_rmse;
  MeanStd mean_conservation;
  std::vector<double> step_conservation;  // averaged over seeds
};

inline std::vector<CellSummary> summarize(std::vector<MetricsRecord> recs) {
  sort_records(recs);
  std::vector<CellSummary> cells;
  for (std::size_t a = 0; a < recs.size();) {
    std::size_t b = a;
    while (b < recs.size() && recs[b].dataset == recs[a].dataset &&
           recs[b].variant == recs[a].variant)
      ++b;
    CellSummary c{recs[a].dataset, recs[a].variant, b - a, {}, {}, {}, {}};
    std::vector<double> mr, fr, mc;
    c.step_conservation.assign(recs[a].step_conservation.size(), 0.0);
    for (std::size_t k = a; k < b; ++k) {
      require(recs[k].step_conservation.size() == c.step_conservation.size(),
              ErrorCode::kShapeMismatch,
              "records of " + c.dataset + " " + c.variant + " have different step counts");
      mr.push_back(recs[k].mean_rmse);
      fr.push_back(recs[k].final_rmse);
      mc.push_back(recs[k].mean_conservation);
      for (std::size_t t = 0; t < c.step_conservation.size(); ++t)
        c.step_conservation[t] += recs[k].step_conservation[t] / static_cast<double>(b - a);
    }
    c.mean_rmse = mean_std(mr);
    c.final_rmse = mean_std(fr);
    c.mean_conservation = mean_std(mc);
    cells.push_back(std::move(c));
    a = b;
  }
  return cells;
}

inline std::string records_csv(std::vector<MetricsRecord> recs) {
  sort_records(recs);
  std::string out =
      "dataset,variant,seed,scale,mean_rmse,final_rmse,mean_conservation_error,"
      "max_conservation_error\n";
  for (const auto& r : recs) {
    out += r.dataset + "," + r.variant + "," + std::to_string(r.seed) + "," + r.scale + "," +
           sci(r.mean_rmse) + "," + sci(r.final_rmse) + "," + sci(r.mean_conservation) + "," +
           sci(r.max_conservation) + "\n";
  }
  return out;
}

inline std::string summary_csv(const std::vector<CellSummary>& cells) {
  std::string out =
      "dataset,variant,seeds,mean_rmse,mean_rmse_std,final_rmse,final_rmse_std,"
      "mean_conservation_error,mean_conservation_error_std\n";
  for (const auto& c : cells) {
    out += c.dataset + "," + c.variant + "," + std::to_string(c.seeds) + "," +
           sci(c.mean_rmse.mean) + "," + sci(c.mean_rmse.std) + "," + sci(c.final_rmse.mean) +
           "," + sci(c.final_rmse.std) + "," + sci(c.mean_conservation.mean) + "," +
           sci(c.mean_conservation.std) + "\n";
  }
  return out;
}

/// Dataset x variant table; each cell is "mean ± std" over seeds.
inline std::string markdown_table(const std::vector<CellSummary>& cells, const std::string& title,
                                  MeanStd CellSummary::*field, const std::string& scale) {
  std::vector<std::string> datasets;
  for (const auto& c : cells)
    if (std::find(datasets.begin(), datasets.end(), c.dataset) == datasets.end())
      datasets.push_back(c.dataset);
  std::string out = "# " + title + "\n\n";
  out += "Scale: " + scale +
         ". Values are mean ± population std over seeds; mean over rollout steps.\n\n";
  out += "| dataset |";
  for (const auto& v : variant_order()) out += " " + v + " |";
  out += "\n|---|";
  for (std::size_t k = 0; k < variant_order().size(); ++k) out += "---|";
  out += "\n";
  for (const auto& d : datasets) {
    out += "| " + d + " |";
    for (const auto& v : variant_order()) {
      auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSummary& c) {
        return c.dataset == d && c.variant == v;
      });
      if (it == cells.end())
        out += " - |";
      else
        out += " " + sci(((*it).*field).mean) + " ± " + sci(((*it).*field).std) + " |";
    }
    out += "\n";
  }
  return out;
}

/// (step, Error(t)) series, steps 1 .. snapshots-1, averaged over seeds.
inline std::string plot_series(const CellSummary& c) {
  std::string out = "step\tconservation_error\n";
  char buf[64];
  for (std::size_t t = 0; t < c.step_conservation.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6E\n", t + 1, c.step_conservation[t]);
    out += buf;
  }
  return out;
}

enum class ReportFormat { kCsv, kMarkdown, kPlotdata, kAll };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "markdown") return ReportFormat::kMarkdown;
  if (s == "plotdata") return ReportFormat::kPlotdata;
  if (s == "all") return ReportFormat::kAll;
  fail(ErrorCode::kInvalidArgument,
       "unknown report format '" + std::string(s) + "' (csv|markdown|plotdata|all)");
}

/// Writes the requested outputs into `dir`; returns the files written.
inline std::vector<std::filesystem::path> emit_report(const std::vector<MetricsRecord>& recs,
                                                      ReportFormat format,
                                                      const std::filesystem::path& dir) {
  require(!recs.empty(), ErrorCode::kInvalidArgument, "no metrics records to report");
  for (const auto& r : recs) r.validate();
  const auto cells = summarize(recs);
  std::string scale = recs[0].scale;
  for (const auto& r : recs)
    if (r.scale != scale) scale = "mixed";
  const std::string scale_label =
      scale == "paper" ? "paper" : scale + " (32x32 grids, reduced protocol; not paper scale)";
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    io::write_text_atomic(dir / name, text);
    written.push_back(dir / name);
  };
  const bool all = format == ReportFormat::kAll;
  if (all || format == ReportFormat::kCsv) {
    put("records.csv", records_csv(recs));
    put("summary.csv", summary_csv(cells));
  }
  if (all || format == ReportFormat::kMarkdown) {
    put("table_rmse.md",
        markdown_table(cells, "Rollout RMSE", &CellSummary::mean_rmse, scale_label));
    put("table_conservation.md",
        markdown_table(cells, "Relative conservation error", &CellSummary::mean_conservation,
                       scale_label));
  }
  if (all || format == ReportFormat::kPlotdata) {
    for (const auto& c : cells)
      put("plot_" + c.dataset + "_" + variant_file_tag(c.variant) + ".tsv", plot_series(c));
  }
  return written;
}

}  // namespace ecf
