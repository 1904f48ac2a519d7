#include <gtest/gtest.h>

#include "uampmf/oracle/suites.hpp"

using namespace uampmf;

namespace {

void expect_all_pass(const oracle::Report& r) {
  for (const oracle::Check& c : r.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  EXPECT_FALSE(r.checks.empty());
}

}  // namespace

TEST(OracleSuites, Denoisers) { expect_all_pass(oracle::denoiser_suite()); }

TEST(OracleSuites, Messages) { expect_all_pass(oracle::message_suite(50, 20000)); }

TEST(OracleSuites, Metrics) { expect_all_pass(oracle::metric_suite(30)); }
