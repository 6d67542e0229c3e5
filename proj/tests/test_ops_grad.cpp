#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"

// Every registered op must pass a central finite-difference check at 64-bit
// on three shape variants, relative error < 1e-4.
TEST_CASE("finite-difference oracle covers the whole op registry") {
  const auto cases = gradcheck::build_cases();
  const auto missing = gradcheck::uncovered_ops(cases);
  for (const auto& op : missing) {
    FAIL_CHECK("op '" << op << "' has no gradient-check case");
  }
  CHECK(missing.empty());
}

TEST_CASE("all ops pass the finite-difference gradient check") {
  for (const auto& c : gradcheck::build_cases()) {
    INFO(c.op << " (" << c.detail << ")");
    const auto result = gradcheck::run_case(c);
    CHECK(result.checked > 0);
    CHECK(result.max_rel_err < 1e-4);
  }
}
