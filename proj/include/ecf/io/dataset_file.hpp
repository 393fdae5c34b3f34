#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecf/dataset.hpp"
#include "ecf/error.hpp"
#include "ecf/grid.hpp"
#include "ecf/io/binary.hpp"
#include "ecf/pde/problem.hpp"

namespace ecf::io {

// Dataset file, little-endian:
//
//   offset  type      field
//   0       char[4]   "ECFD"
//   4       u32       version (1)
//   8       u32       endian marker 0x01020304
//   12      u32       problem tag (index in kAllProblems)
//   16      u32       dims
//   20      u64 x2    resolution
//   36      f64 x2    lengths
//   52      u32       boundary
//   56      u32       channels
//   60      u64       samples
//   68      u64       snapshots
//   76      u32       bytes per value (4 or 8)
//   80      u32       conservation mask bits
//   84      u64+str   metadata JSON (params, split, seeds, generator)
//   ..      u64       payload bytes
//   ..      payload   values, [sample][snapshot][channel][i][j]
//   ..      u32       crc32 of every preceding byte
inline constexpr std::uint32_t kDatasetVersion = 1;

inline nlohmann::json params_to_json(const pde::ProblemParams& p) {
  return {{"problem", std::string(pde::to_string(p.problem))},
          {"resolution", p.resolution},
          {"length", p.length},
          {"epsilon", p.epsilon},
          {"theta", p.theta},
          {"theta_c", p.theta_c},
          {"fh_ic_amplitude", p.fh_ic_amplitude},
          {"diffusion", p.diffusion},
          {"velocity", {p.velocity[0], p.velocity[1]}},
          {"gravity", p.gravity},
          {"dam_inner_height", p.dam_inner_height},
          {"dam_outer_height", p.dam_outer_height},
          {"dam_radius_min", p.dam_radius_min},
          {"dam_radius_max", p.dam_radius_max},
          {"chebyshev_order", p.chebyshev_order},
          {"grf_tau", p.grf_tau},
          {"grf_alpha", p.grf_alpha},
          {"grf_offset", p.grf_offset},
          {"t_final", p.t_final},
          {"n_steps", p.n_steps},
          {"n_snapshots", p.n_snapshots}};
}

/// Missing keys keep the defaults of `base`, so partial configs work.
inline pde::ProblemParams params_from_json(const nlohmann::json& j,
                                           pde::ProblemParams base = {}) {
  try {
    pde::ProblemParams p = base;
    if (j.contains("problem")) p.problem = pde::parse_problem(j.at("problem").get<std::string>());
    auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("resolution", p.resolution);
    opt("length", p.length);
    opt("epsilon", p.epsilon);
    opt("theta", p.theta);
    opt("theta_c", p.theta_c);
    opt("fh_ic_amplitude", p.fh_ic_amplitude);
    opt("diffusion", p.diffusion);
    if (j.contains("velocity")) {
      p.velocity[0] = j.at("velocity").at(0).get<double>();
      p.velocity[1] = j.at("velocity").at(1).get<double>();
    }
    opt("gravity", p.gravity);
    opt("dam_inner_height", p.dam_inner_height);
    opt("dam_outer_height", p.dam_outer_height);
    opt("dam_radius_min", p.dam_radius_min);
    opt("dam_radius_max", p.dam_radius_max);
    opt("chebyshev_order", p.chebyshev_order);
    opt("grf_tau", p.grf_tau);
    opt("grf_alpha", p.grf_alpha);
    opt("grf_offset", p.grf_offset);
    opt("t_final", p.t_final);
    opt("n_steps", p.n_steps);
    opt("n_snapshots", p.n_snapshots);
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad problem parameters: ") + e.what());
  }
}

inline nlohmann::json dataset_metadata(const TrajectoryDataset& ds) {
  return {{"params", params_to_json(ds.params)},
          {"split", ds.split},
          {"master_seed", ds.master_seed},
          {"sample_seeds", ds.sample_seeds},
          {"generator_version", ds.generator_version}};
}

inline std::uint32_t problem_tag(pde::Problem p) {
  for (std::size_t k = 0; k < pde::kAllProblems.size(); ++k)
    if (pde::kAllProblems[k] == p) return static_cast<std::uint32_t>(k);
  return 0xffffffffu;
}

/// Writes `ds` atomically, values stored at `precision`, plus a pretty JSON
/// sidecar "<path>.json" holding the metadata and `extra_sidecar` keys.
inline void write_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path,
                          Precision precision,
                          const nlohmann::json& extra_sidecar = nlohmann::json::object()) {
  require(ds.size() >= 1 && ds.snapshots() >= 1, ErrorCode::kInvalidArgument,
          "write_dataset: empty dataset");
  const GridSpec grid = ds.grid();
  const std::size_t per_frame = ds.channels() * grid.points();
  const std::size_t bytes_per = precision == Precision::kF32 ? 4 : 8;

  ByteWriter w;
  w.put_bytes("ECFD", 4);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(kEndianMarker);
  w.put<std::uint32_t>(problem_tag(ds.params.problem));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.dims));
  w.put<std::uint64_t>(grid.resolution[0]);
  w.put<std::uint64_t>(grid.resolution[1]);
  w.put<double>(grid.lengths[0]);
  w.put<double>(grid.lengths[1]);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.boundary));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.channels()));
  w.put<std::uint64_t>(ds.size());
  w.put<std::uint64_t>(ds.snapshots());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(bytes_per));
  w.put<std::uint32_t>(ds.mask().bits());
  w.put_string(dataset_metadata(ds).dump());
  w.put<std::uint64_t>(ds.size() * ds.snapshots() * per_frame * bytes_per);
  for (std::size_t s = 0; s < ds.size(); ++s) {
    require(ds.samples[s].size() == ds.snapshots(), ErrorCode::kShapeMismatch,
            "write_dataset: sample " + std::to_string(s) + " has a different snapshot count");
    for (const GridField& f : ds.samples[s]) {
      require(f.grid() == grid && f.channels() == ds.channels(), ErrorCode::kShapeMismatch,
              "write_dataset: frame shape mismatch in sample " + std::to_string(s));
      f.check_finite("write_dataset sample " + std::to_string(s));
      if (precision == Precision::kF64) {
        w.put_bytes(f.values().data(), per_frame * 8);
      } else {
        for (double v : f.values()) w.put<float>(static_cast<float>(v));
      }
    }
  }
  w.put<std::uint32_t>(crc32_of(w.bytes().data(), w.bytes().size()));
  write_file_atomic(path, w.bytes().data(), w.bytes().size());

  nlohmann::json side = dataset_metadata(ds);
  side["precision"] = std::string(to_string(precision));
  side["format"] = {{"magic", "ECFD"}, {"version", kDatasetVersion}, {"endian", "little"}};
  side["flux_balance_tolerance"] = pde::flux_balance_tolerance(ds.params.problem);
  side["conservation_mask"] = ds.mask().bits();
  for (auto it = extra_sidecar.begin(); it != extra_sidecar.end(); ++it) side[it.key()] = it.value();
  write_text_atomic(path.string() + ".json", side.dump(2) + "\n");
}

struct LoadedDataset {
  TrajectoryDataset dataset;
  Precision precision = Precision::kF64;
};

inline LoadedDataset read_dataset(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string ctx = "dataset " + path.string();
  ByteReader r(bytes, ctx);
  char magic[4];
  r.get_bytes(magic, 4);
  require(std::string(magic, 4) == "ECFD", ErrorCode::kFormat, ctx + ": bad magic");
  const auto version = r.get<std::uint32_t>();
  require(version == kDatasetVersion, ErrorCode::kFormat,
          ctx + ": unsupported version " + std::to_string(version));
  const auto marker = r.get<std::uint32_t>();
  require(marker == kEndianMarker, ErrorCode::kFormat,
          ctx + (marker == 0x04030201u ? ": big-endian payload not supported"
                                       : ": bad endian marker"));
  const auto tag = r.get<std::uint32_t>();
  require(tag < pde::kAllProblems.size(), ErrorCode::kFormat, ctx + ": unknown problem tag");
  GridSpec grid;
  grid.dims = static_cast<int>(r.get<std::uint32_t>());
  grid.resolution[0] = r.get<std::uint64_t>();
  grid.resolution[1] = r.get<std::uint64_t>();
  grid.lengths[0] = r.get<double>();
  grid.lengths[1] = r.get<double>();
  grid.boundary = static_cast<Boundary>(r.get<std::uint32_t>());
  const auto channels = r.get<std::uint32_t>();
  const auto samples = r.get<std::uint64_t>();
  const auto snapshots = r.get<std::uint64_t>();
  const auto bytes_per = r.get<std::uint32_t>();
  const auto mask_bits = r.get<std::uint32_t>();
  require(bytes_per == 4 || bytes_per == 8, ErrorCode::kFormat, ctx + ": bad value width");
  const std::string meta_text = r.get_string();
  const auto payload = r.get<std::uint64_t>();
  const std::uint64_t per_frame = channels * grid.resolution[0] * grid.resolution[1];
  require(payload == samples * snapshots * per_frame * bytes_per &&
              r.remaining() == payload + sizeof(std::uint32_t),
          ErrorCode::kFormat, ctx + ": payload size mismatch");
  const std::size_t payload_at = r.position();
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + payload_at + payload, sizeof stored);
  require(stored == crc32_of(bytes.data(), payload_at + payload), ErrorCode::kFormat,
          ctx + ": checksum mismatch");

  LoadedDataset out;
  out.precision = bytes_per == 4 ? Precision::kF32 : Precision::kF64;
  TrajectoryDataset& ds = out.dataset;
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    ds.params = params_from_json(meta.at("params"));
    ds.split = meta.at("split").get<std::string>();
    ds.master_seed = meta.at("master_seed").get<std::uint64_t>();
    ds.sample_seeds = meta.at("sample_seeds").get<std::vector<std::uint64_t>>();
    ds.generator_version = meta.at("generator_version").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, ctx + ": bad metadata: " + e.what());
  }
  require(ds.params.problem == pde::kAllProblems[tag] && ds.grid() == grid &&
              ds.channels() == channels && ds.mask().bits() == mask_bits,
          ErrorCode::kFormat, ctx + ": header disagrees with metadata");

  ds.samples.resize(samples);
  const std::uint8_t* p = bytes.data() + payload_at;
  for (auto& traj : ds.samples) {
    traj.reserve(snapshots);
    for (std::uint64_t t = 0; t < snapshots; ++t) {
      std::vector<double> values(per_frame);
      if (bytes_per == 8) {
        std::memcpy(values.data(), p, per_frame * 8);
      } else {
        for (std::uint64_t k = 0; k < per_frame; ++k) {
          float f;
          std::memcpy(&f, p + 4 * k, 4);
          values[k] = f;
        }
      }
      p += per_frame * bytes_per;
      traj.emplace_back(grid, channels, std::move(values), out.precision);
    }
  }
  return out;
}

}  // namespace ecf::io
