#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ecf/fft.hpp"
#include "ecf/grid.hpp"
#include "oracles.hpp"

namespace ecf {
namespace {

using testing::brute_force_dft;
using testing::random_field;

TEST(GridSpecTest, CellVolumeAndValidation) {
  const GridSpec g = GridSpec::rect(4, 8, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.5 * 0.125);
  EXPECT_DOUBLE_EQ(g.domain_volume(), 2.0);
  EXPECT_THROW(GridSpec::rect(4, 4, -1.0, 1.0), Error);
  EXPECT_THROW(GridSpec::rect(0, 4, 1.0, 1.0), Error);
}

TEST(GridFieldTest, RejectsWrongShape) {
  EXPECT_THROW(GridField(GridSpec::square(4), 1, std::vector<double>(15)), Error);
}

TEST(GridFieldTest, CheckFiniteNamesFirstBadIndex) {
  GridField f(GridSpec::square(4), 2);
  f.at(1, 2, 3) = std::nan("");
  try {
    f.check_finite();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
    EXPECT_NE(std::string(e.what()).find("channel 1 index (2, 3)"), std::string::npos);
  }
}

TEST(FftForwardTest, ConstantField) {
  const auto f = GridField::constant(GridSpec::square(4), 1, 0.7);
  const Spectrum s = fft_forward(f);
  EXPECT_NEAR(s.zero_mode(0).real(), 0.7, 1e-15);
  for (std::size_t k = 1; k < s.points(); ++k) EXPECT_NEAR(std::abs(s.channel(0)[k]), 0.0, 1e-15);
}

TEST(FftForwardTest, CosineHasHalfAmplitudeAtPlusMinusOne) {
  const GridSpec g = GridSpec::line(8);
  GridField f(g, 1);
  for (std::size_t i = 0; i < 8; ++i) f.at(0, i) = std::cos(2 * std::numbers::pi * g.coordinate(0, i));
  const Spectrum s = fft_forward(f);
  const auto oracle = brute_force_dft(f);
  for (std::size_t k = 0; k < 8; ++k) {
    const double expected = (k == 1 || k == 7) ? 0.5 : 0.0;
    EXPECT_NEAR(std::abs(oracle[k] - expected), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s.channel(0)[k] - expected), 0.0, 1e-15);
  }
  EXPECT_NEAR(s.coeff(0, {{-1, 0}}).real(), 0.5, 1e-15);
}

TEST(FftForwardTest, MatchesBruteForceOnEveryGridUpTo16) {
  std::mt19937_64 rng(11);
  for (std::size_t nx = 1; nx <= 16; ++nx) {
    for (std::size_t ny = 1; ny <= 16; ++ny) {
      const GridField f = random_field(GridSpec::rect(nx, ny, 1.0, 1.0), 1, rng);
      const Spectrum s = fft_forward(f);
      const auto oracle = brute_force_dft(f);
      for (std::size_t k = 0; k < oracle.size(); ++k)
        ASSERT_NEAR(std::abs(s.channel(0)[k] - oracle[k]), 0.0, 1e-12) << nx << "x" << ny;
    }
  }
}

TEST(FftForwardTest, ZeroModeIsRealMeanAndSpectrumIsConjugateSymmetric) {
  std::mt19937_64 rng(3);
  const GridField f = random_field(GridSpec::rect(16, 12, 1.0, 2.0), 2, rng);
  const Spectrum s = fft_forward(f);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(s.zero_mode(c).imag(), 0.0);
    EXPECT_NEAR(s.zero_mode(c).real(), channel_mean(f, c), 1e-15);
  }
  EXPECT_LT(conjugate_symmetry_defect(s), 1e-14);
}

TEST(FftForwardTest, RejectsNonFinite) {
  GridField f(GridSpec::square(4), 1);
  f.at(0, 1, 1) = INFINITY;
  EXPECT_THROW(fft_forward(f), Error);
}

TEST(FftForwardTest, Linearity) {
  std::mt19937_64 rng(5);
  const GridSpec g = GridSpec::square(32);
  for (int trial = 0; trial < 10; ++trial) {
    const GridField f = random_field(g, 1, rng);
    const GridField h = random_field(g, 1, rng);
    const double a = 0.3 + trial, b = -1.7;
    GridField combo(g, 1);
    for (std::size_t k = 0; k < g.points(); ++k)
      combo.values()[k] = a * f.values()[k] + b * h.values()[k];
    const Spectrum sf = fft_forward(f), sh = fft_forward(h), sc = fft_forward(combo);
    for (std::size_t k = 0; k < g.points(); ++k)
      ASSERT_NEAR(std::abs(sc.channel(0)[k] - (a * sf.channel(0)[k] + b * sh.channel(0)[k])),
                  0.0, 1e-12);
  }
}

TEST(FftInverseTest, ZeroModeOnlyGivesConstant) {
  Spectrum s(GridSpec::square(6), 1);
  s.coeff(0, ModeIndex::zero()) = 2.5;
  const GridField f = fft_inverse(s);
  for (double v : f.values()) EXPECT_NEAR(v, 2.5, 1e-15);
}

TEST(FftInverseTest, RoundTrip32) {
  std::mt19937_64 rng(7);
  const GridField f = random_field(GridSpec::square(32), 1, rng);
  EXPECT_LT(testing::max_abs_diff(fft_inverse(fft_forward(f)), f), 1e-12);
}

TEST(FftInverseTest, RecoversCosineSamples) {
  const GridSpec g = GridSpec::line(8);
  Spectrum s(g, 1);
  s.coeff(0, {{1, 0}}) = 0.5;
  s.coeff(0, {{-1, 0}}) = 0.5;
  const GridField f = fft_inverse(s);
  for (std::size_t i = 0; i < 8; ++i)
    EXPECT_NEAR(f.at(0, i), std::cos(2 * std::numbers::pi * g.coordinate(0, i)), 1e-12);
}

TEST(FftInverseTest, RejectsAsymmetricSpectrum) {
  Spectrum s(GridSpec::square(8), 1);
  s.coeff(0, {{1, 2}}) = Complex(1.0, 1.0);
  EXPECT_THROW(fft_inverse(s), Error);
}

TEST(L2NormTest, ZeroConstantAndParseval) {
  const GridSpec unit = GridSpec::square(8);
  EXPECT_EQ(l2_norm(GridField(unit, 1))[0], 0.0);
  EXPECT_NEAR(l2_norm(GridField::constant(unit, 1, -0.4))[0], 0.4, 1e-15);

  std::mt19937_64 rng(9);
  const GridField f = random_field(GridSpec::rect(16, 24, 2.0, 0.5), 1, rng);
  const double direct = l2_norm(f)[0];
  const double spectral = spectral_energy(fft_forward(f))[0];
  EXPECT_NEAR(direct * direct, spectral, 1e-12 * spectral);
}

// Parseval on differences of 100 random 32x32 pairs.
TEST(ParsevalProperty, DifferenceNormMatchesCoefficientErrors) {
  std::mt19937_64 rng(2024);
  const GridSpec g = GridSpec::square(32);
  for (int trial = 0; trial < 100; ++trial) {
    const GridField v = random_field(g, 1, rng);
    const GridField w = random_field(g, 1, rng);
    const double direct = testing::direct_l2_squared(v, w);
    const Spectrum sv = fft_forward(v), sw = fft_forward(w);
    double coeff = 0.0;
    for (std::size_t k = 0; k < g.points(); ++k) coeff += std::norm(sv.channel(0)[k] - sw.channel(0)[k]);
    coeff *= g.domain_volume();
    ASSERT_LT(std::abs(direct - coeff) / direct, 1e-12) << "trial " << trial;
  }
}

}  // namespace
}  // namespace ecf
