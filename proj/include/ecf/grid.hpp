#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecf/error.hpp"

namespace ecf {

enum class Boundary { kPeriodic, kNeumann, kWall };
enum class Precision { kF32, kF64 };

inline std::string_view to_string(Boundary b) {
  switch (b) {
    case Boundary::kPeriodic: return "periodic";
    case Boundary::kNeumann: return "neumann";
    case Boundary::kWall: return "wall";
  }
  return "?";
}

inline std::string_view to_string(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

inline Precision parse_precision(std::string_view s) {
  if (s == "f32" || s == "F32") return Precision::kF32;
  if (s == "f64" || s == "F64") return Precision::kF64;
  fail(ErrorCode::kInvalidArgument, "unknown precision '" + std::string(s) + "'");
}

/// Uniform rectangular grid on [0, L_x] x [0, L_y] (or [0, L] in 1-D).
///
/// Axis 0 is the slowest-varying index in every flattened array. Periodic
/// grids sample at x_j = j h; Neumann and wall grids are cell centred,
/// x_j = (j + 1/2) h. Unused trailing axes have resolution 1 and length 1.
struct GridSpec {
  int dims = 2;
  std::array<double, 2> lengths{1.0, 1.0};
  std::array<std::size_t, 2> resolution{1, 1};
  Boundary boundary = Boundary::kPeriodic;

  static GridSpec line(std::size_t n, double length = 1.0,
                       Boundary boundary = Boundary::kPeriodic) {
    GridSpec g;
    g.dims = 1;
    g.lengths = {length, 1.0};
    g.resolution = {n, 1};
    g.boundary = boundary;
    g.validate();
    return g;
  }

  static GridSpec square(std::size_t n, double length = 1.0,
                         Boundary boundary = Boundary::kPeriodic) {
    return rect(n, n, length, length, boundary);
  }

  static GridSpec rect(std::size_t nx, std::size_t ny, double lx, double ly,
                       Boundary boundary = Boundary::kPeriodic) {
    GridSpec g;
    g.dims = 2;
    g.lengths = {lx, ly};
    g.resolution = {nx, ny};
    g.boundary = boundary;
    g.validate();
    return g;
  }

  void validate() const {
    require(dims == 1 || dims == 2, ErrorCode::kUnsupported,
            "grid dimension must be 1 or 2, got " + std::to_string(dims));
    for (int a = 0; a < 2; ++a) {
      require(resolution[a] >= 1, ErrorCode::kInvalidArgument,
              "grid resolution must be positive");
      require(std::isfinite(lengths[a]) && lengths[a] > 0.0,
              ErrorCode::kInvalidArgument, "grid lengths must be positive");
    }
    if (dims == 1) {
      require(resolution[1] == 1, ErrorCode::kInvalidArgument,
              "1-D grid must have unit second axis");
    }
  }

  std::size_t points() const { return resolution[0] * resolution[1]; }
  double spacing(int axis) const {
    return lengths[axis] / static_cast<double>(resolution[axis]);
  }
  double cell_volume() const {
    double v = spacing(0);
    if (dims == 2) v *= spacing(1);
    return v;
  }
  /// |Omega| = L^m.
  double domain_volume() const {
    return dims == 2 ? lengths[0] * lengths[1] : lengths[0];
  }
  double coordinate(int axis, std::size_t j) const {
    const double offset = boundary == Boundary::kPeriodic ? 0.0 : 0.5;
    return (static_cast<double>(j) + offset) * spacing(axis);
  }
  std::size_t index(std::size_t i, std::size_t j) const {
    return i * resolution[1] + j;
  }

  bool operator==(const GridSpec&) const = default;

  std::string describe() const {
    std::string s = std::to_string(resolution[0]);
    if (dims == 2) s += "x" + std::to_string(resolution[1]);
    s += " " + std::string(to_string(boundary));
    return s;
  }
};

/// Multi-channel real field on a grid. Values are always held in double;
/// `precision` records the storage precision the values are representable in.
class GridField {
 public:
  GridField() = default;
  GridField(GridSpec grid, std::size_t channels,
            Precision precision = Precision::kF64)
      : grid_(grid),
        channels_(channels),
        values_(channels * grid.points(), 0.0),
        precision_(precision) {
    grid_.validate();
    require(channels >= 1, ErrorCode::kInvalidArgument,
            "field needs at least one channel");
  }
  GridField(GridSpec grid, std::size_t channels, std::vector<double> values,
            Precision precision = Precision::kF64)
      : grid_(grid),
        channels_(channels),
        values_(std::move(values)),
        precision_(precision) {
    grid_.validate();
    require(channels >= 1, ErrorCode::kInvalidArgument,
            "field needs at least one channel");
    require(values_.size() == channels * grid.points(),
            ErrorCode::kShapeMismatch,
            "field values do not match grid x channels (" +
                std::to_string(values_.size()) + " vs " +
                std::to_string(channels * grid.points()) + ")");
  }

  static GridField constant(GridSpec grid, std::size_t channels, double value) {
    GridField f(grid, channels);
    std::fill(f.values_.begin(), f.values_.end(), value);
    return f;
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t channels() const { return channels_; }
  std::size_t points() const { return grid_.points(); }
  Precision precision() const { return precision_; }
  void set_precision(Precision p) { precision_ = p; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> channel(std::size_t c) {
    return std::span<double>(values_).subspan(c * points(), points());
  }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(values_).subspan(c * points(), points());
  }
  double& at(std::size_t c, std::size_t i, std::size_t j = 0) {
    return values_[c * points() + grid_.index(i, j)];
  }
  double at(std::size_t c, std::size_t i, std::size_t j = 0) const {
    return values_[c * points() + grid_.index(i, j)];
  }

  /// Throws kNonFinite naming the first offending (channel, i, j).
  void check_finite(std::string_view what = "field") const {
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        const std::size_t c = k / points();
        const std::size_t p = k % points();
        const std::size_t i = p / grid_.resolution[1];
        const std::size_t j = p % grid_.resolution[1];
        fail(ErrorCode::kNonFinite,
             std::string(what) + " has non-finite value at channel " +
                 std::to_string(c) + " index (" + std::to_string(i) + ", " +
                 std::to_string(j) + ")");
      }
    }
  }

  bool same_shape(const GridField& other) const {
    return grid_ == other.grid_ && channels_ == other.channels_;
  }

  /// Rounds every value to the nearest float and tags the field F32.
  GridField rounded_to_f32() const {
    GridField out = *this;
    for (double& v : out.values_) v = static_cast<double>(static_cast<float>(v));
    out.precision_ = Precision::kF32;
    return out;
  }

  bool operator==(const GridField& o) const {
    return grid_ == o.grid_ && channels_ == o.channels_ && values_ == o.values_;
  }

 private:
  GridSpec grid_{};
  std::size_t channels_ = 0;
  std::vector<double> values_;
  Precision precision_ = Precision::kF64;
};

inline void require_same_shape(const GridField& a, const GridField& b,
                               std::string_view context) {
  require(a.grid() == b.grid(), ErrorCode::kShapeMismatch,
          std::string(context) + ": grid mismatch (" + a.grid().describe() +
              " vs " + b.grid().describe() + ")");
  require(a.channels() == b.channels(), ErrorCode::kShapeMismatch,
          std::string(context) + ": channel count mismatch");
}

/// Arithmetic mean of one channel, summed in index order.
inline double channel_mean(const GridField& f, std::size_t c) {
  double s = 0.0;
  for (double v : f.channel(c)) s += v;
  return s / static_cast<double>(f.points());
}

/// Rectangle-rule integral of one channel: cell_volume * sum.
inline double channel_integral(const GridField& f, std::size_t c) {
  double s = 0.0;
  for (double v : f.channel(c)) s += v;
  return s * f.grid().cell_volume();
}

}  // namespace ecf
