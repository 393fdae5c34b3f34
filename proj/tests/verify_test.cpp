#include <string>

#include <gtest/gtest.h>

#include "ecf/verify.hpp"

namespace ecf::verify {
namespace {

const PropertyResult& find(const std::vector<PropertyResult>& rs, const std::string& name) {
  for (const auto& r : rs)
    if (r.name == name) return r;
  throw std::runtime_error("missing property " + name);
}

TEST(VerifySuite, TheoremsPassOnCleanBuild) {
  const auto rs = run_suite(Suite::kTheorems);
  for (const auto& r : rs) EXPECT_TRUE(r.passed) << format_result(r);
  EXPECT_EQ(find(rs, "parseval").trials, 100u);
  EXPECT_EQ(find(rs, "error_reduction").trials, 1000u);
  double total = 0.0;
  for (const auto& r : rs) total += r.seconds;
  EXPECT_LT(total, 60.0);
}

TEST(VerifySuite, GradientsPass) {
  for (const auto& r : run_suite(Suite::kGradients)) EXPECT_TRUE(r.passed) << format_result(r);
}

TEST(VerifySuite, SolversPass) {
  for (const auto& r : run_suite(Suite::kSolvers)) EXPECT_TRUE(r.passed) << format_result(r);
}

// Mutation: the zero mode keeps its imaginary part.
Spectrum skip_imaginary_zeroing(const Spectrum& pred, const ConservedQuantity& target,
                                const ConservationMask& mask) {
  Spectrum out = pred;
  for (std::size_t c = 0; c < pred.channels(); ++c)
    if (mask[c]) out.channel(c)[0] = Complex(target.zero_mode[c], pred.channel(c)[0].imag());
  return out;
}

TEST(VerifySuite, MutatedCorrectionFailsNonInterferenceWithSeed) {
  VerifyOptions opt;
  opt.correction = skip_imaginary_zeroing;
  const auto rs = run_suite(Suite::kTheorems, opt);
  const PropertyResult& r = find(rs, "non_interference");
  EXPECT_FALSE(r.passed);
  ASSERT_TRUE(r.counterexample_seed.has_value());
  const std::string line = format_result(r);
  EXPECT_NE(line.find("FAIL theorems/non_interference"), std::string::npos) << line;
  EXPECT_NE(line.find("counterexample seed " + std::to_string(*r.counterexample_seed)),
            std::string::npos);
  EXPECT_EQ(r.trials, 1u);
}

TEST(VerifySuite, FailureFromExceptionCarriesSeed) {
  VerifyOptions opt;
  opt.correction = [](const Spectrum&, const ConservedQuantity&, const ConservationMask&) -> Spectrum {
    fail(ErrorCode::kNumerical, "boom");
  };
  const auto rs = run_suite(Suite::kTheorems, opt);
  EXPECT_FALSE(find(rs, "idempotence").passed);
  EXPECT_EQ(find(rs, "idempotence").detail, "boom");
  EXPECT_TRUE(find(rs, "parseval").passed);
}

TEST(VerifySuite, SuiteNames) {
  EXPECT_EQ(parse_suite("all"), Suite::kAll);
  EXPECT_THROW(parse_suite("everything"), Error);
}

}  // namespace
}  // namespace ecf::verify
