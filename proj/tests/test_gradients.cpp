#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cce/gradcheck.hpp"
#include "gradcheck_suites.hpp"

using namespace cce;
using namespace cce_test;

TEST_CASE("check_gradients on closed forms") {
  // f(x) = x^2 at x = 3: analytic 6 vs central difference
  num::Param<double> x({1});
  x.value[0] = 3.0;
  num::ParamMap<double> params{{"x", &x}};
  const auto report = num::check_gradients<double>(
      [&]() { return x.value[0] * x.value[0]; },
      [&]() {
        x.zero_grad();
        x.grad[0] = 2.0 * x.value[0];
      },
      params, 1e-5);
  CHECK(report.max_rel_error < 1e-8);

  // constant function: both gradients are zero
  const auto report2 = num::check_gradients<double>(
      [&]() { return 4.2; }, [&]() { x.zero_grad(); }, params, 1e-5);
  CHECK(report2.max_rel_error == 0.0);
}

TEST_CASE("check_gradients rejects non-finite losses") {
  num::Param<double> x({1});
  num::ParamMap<double> params{{"x", &x}};
  CHECK_THROWS_AS(num::check_gradients<double>(
                      [&]() { return std::numeric_limits<double>::infinity(); },
                      [&]() { x.zero_grad(); }, params, 1e-5),
                  NumericError);
}

TEST_CASE("affine gradients") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(affine_gradcheck(seed) < 1e-4);
  }
}

TEST_CASE("lstm gradients, both directions") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(lstm_gradcheck(seed, num::Direction::kForward) < 1e-4);
    CHECK(lstm_gradcheck(seed, num::Direction::kBackward) < 1e-4);
  }
}

TEST_CASE("char-cnn gradients (max-over-time routing, padding)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(conv_gradcheck(seed) < 1e-4);
  }
}

TEST_CASE("highway gradients") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(highway_gradcheck(seed) < 1e-4);
  }
}

TEST_CASE("softmax cross-entropy gradients") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(softmax_xent_gradcheck(seed) < 1e-4);
  }
}

TEST_CASE("scalar mix gradients (gamma and logits)") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(scalar_mix_gradcheck(seed) < 1e-4);
  }
}

TEST_CASE("crf negative log-likelihood gradients") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CHECK(crf_nll_gradcheck(seed, 4, false) < 1e-4);
    CHECK(crf_nll_gradcheck(seed, 4, true) < 1e-4);
  }
}
