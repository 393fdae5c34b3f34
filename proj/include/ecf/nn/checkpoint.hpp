#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ecf/error.hpp"
#include "ecf/io/binary.hpp"
#include "ecf/nn/model.hpp"

namespace ecf::nn {

// Layout (little-endian):
//   "ECFM" u32 version u32 endian-marker
//   u64 n_layers u64 width u64 modes u64 channels i32 dims u64 seed
//   string note (u64 length + bytes)
//   u64 n_params f64[n_params]
//   u32 crc32 of everything before it
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  OperatorModel model;
  std::string note;  // free-form metadata, e.g. JSON describing the run
};

inline void write_checkpoint(const std::filesystem::path& path, const OperatorModel& model,
                             const std::string& note = {}) {
  const OperatorConfig& c = model.config;
  io::ByteWriter w;
  w.put_bytes("ECFM", 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(io::kEndianMarker);
  w.put<std::uint64_t>(c.n_layers);
  w.put<std::uint64_t>(c.width);
  w.put<std::uint64_t>(c.modes);
  w.put<std::uint64_t>(c.channels);
  w.put<std::int32_t>(c.dims);
  w.put<std::uint64_t>(c.seed);
  w.put_string(note);
  w.put<std::uint64_t>(model.params.size());
  w.put_bytes(model.params.data(), model.params.size() * sizeof(double));
  w.put<std::uint32_t>(io::crc32_of(w.bytes().data(), w.bytes().size()));
  io::write_file_atomic(path, w.bytes().data(), w.bytes().size());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  const std::string ctx = "checkpoint " + path.string();
  io::ByteReader r(bytes, ctx);
  char magic[4];
  r.get_bytes(magic, 4);
  require(std::string(magic, 4) == "ECFM", ErrorCode::kFormat, ctx + ": bad magic");
  const auto version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorCode::kFormat,
          ctx + ": unsupported version " + std::to_string(version));
  require(r.get<std::uint32_t>() == io::kEndianMarker, ErrorCode::kFormat,
          ctx + ": big-endian payload not supported");
  Checkpoint out;
  OperatorConfig& c = out.model.config;
  c.n_layers = r.get<std::uint64_t>();
  c.width = r.get<std::uint64_t>();
  c.modes = r.get<std::uint64_t>();
  c.channels = r.get<std::uint64_t>();
  c.dims = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  out.note = r.get_string();
  const auto n = r.get<std::uint64_t>();
  require(r.remaining() == n * sizeof(double) + sizeof(std::uint32_t), ErrorCode::kFormat,
          ctx + ": payload size mismatch");
  c.validate();
  require(n == ParamLayout(c).total(), ErrorCode::kFormat,
          ctx + ": parameter count does not match the stored config");
  out.model.params.resize(n);
  r.get_bytes(out.model.params.data(), n * sizeof(double));
  const std::size_t body = r.position();
  const auto stored = r.get<std::uint32_t>();
  require(stored == io::crc32_of(bytes.data(), body), ErrorCode::kFormat,
          ctx + ": checksum mismatch");
  return out;
}

}  // namespace ecf::nn
