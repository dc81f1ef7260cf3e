#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <numeric>
#include <vector>

#include "lbbsp/coordination.hpp"
#include "lbbsp/rng.hpp"
#include "lbbsp/sgd.hpp"

using namespace lbbsp;

TEST_CASE("aggregate_naive is the plain mean and ignores batch sizes") {
  const std::vector<Gradient> same = {{{2.0}, 1}, {{2.0}, 5}};
  const Gradient g = aggregate_naive(same);
  CHECK(g.values[0] == doctest::Approx(2.0));
  CHECK(g.batch_size == 6);

  const std::vector<Gradient> mixed = {{{2.0}, 1}, {{0.0}, 3}};
  CHECK(aggregate_naive(mixed).values[0] == doctest::Approx(1.0));
}

TEST_CASE("aggregate_weighted follows batch sizes") {
  const std::vector<Gradient> grads = {{{4.0}, 1}, {{8.0}, 3}};
  const Gradient g = aggregate_weighted(grads);
  CHECK(g.values[0] == doctest::Approx((1.0 * 4.0 + 3.0 * 8.0) / 4.0));
  CHECK(g.batch_size == 4);

  // equal sizes cancel the weights
  const std::vector<Gradient> equal = {{{4.0, 1.0}, 2}, {{8.0, 3.0}, 2}};
  const Gradient w = aggregate_weighted(equal);
  const Gradient n = aggregate_naive(equal);
  for (std::size_t d = 0; d < 2; ++d)
    CHECK(std::fabs(w.values[d] - n.values[d]) < 1e-12);
}

TEST_CASE("aggregate rejects dimension mismatches and empty input") {
  const std::vector<Gradient> bad = {{{1.0}, 1}, {{1.0, 2.0}, 1}};
  CHECK_THROWS_AS(aggregate_naive(bad), std::invalid_argument);
  CHECK_THROWS_AS(aggregate_weighted(bad), std::invalid_argument);
  const std::vector<Gradient> none;
  CHECK_THROWS_AS(aggregate_naive(none), std::invalid_argument);
}

TEST_CASE("aggregate_weighted equals the union gradient over disjoint partitions") {
  const Dataset data = generate_dataset(31, 200, 6);
  ModelState m;
  m.params = {0.2, -0.1, 0.4, 0.0, -0.3, 0.25};
  Rng rng(555);
  for (int trial = 0; trial < 25; ++trial) {
    const int workers = rng.uniform_int(2, 6);
    std::vector<int> stream;
    std::vector<Gradient> parts;
    for (int w = 0; w < workers; ++w) {
      const int size = rng.uniform_int(1, 12);
      std::vector<int> chunk;
      for (int i = 0; i < size; ++i) chunk.push_back(rng.uniform_int(0, 199));
      stream.insert(stream.end(), chunk.begin(), chunk.end());
      parts.push_back(batch_gradient(m, data, chunk));
    }
    const Gradient whole = batch_gradient(m, data, stream);
    const Gradient agg = aggregate_weighted(parts);
    for (std::size_t d = 0; d < 6; ++d)
      CHECK(std::fabs(agg.values[d] - whole.values[d]) <=
            1e-12 * std::max(1.0, std::fabs(whole.values[d])));
  }
}

TEST_CASE("aggregate_weighted is permutation invariant") {
  std::vector<Gradient> grads = {{{1.0, 2.0}, 2}, {{-3.0, 0.5}, 7}, {{0.25, 4.0}, 1}};
  const Gradient before = aggregate_weighted(grads);
  std::reverse(grads.begin(), grads.end());
  const Gradient after = aggregate_weighted(grads);
  for (std::size_t d = 0; d < 2; ++d)
    CHECK(std::fabs(before.values[d] - after.values[d]) < 1e-15);
}

TEST_CASE("ssp_gate boundary") {
  CHECK(ssp_gate(10, 10, 0));
  CHECK(ssp_gate(20, 10, 10));
  CHECK_FALSE(ssp_gate(21, 10, 10));
}

TEST_CASE("ps_step composition per scheme") {
  ModelState m;
  m.params = {0.0};
  m.learning_rate = 1.0;

  SUBCASE("lb-bsp applies the weighted aggregate") {
    const std::vector<PendingUpdate> ready = {{0, {{2.0}, 1}, 1}, {1, {{6.0}, 3}, 1}};
    SchemeConfig scheme{SchemeKind::LbBsp, 0, 4};
    const ModelState next = ps_step(scheme, 2, m, ready);
    CHECK(next.params[0] == doctest::Approx(-(2.0 + 3.0 * 6.0) / 4.0));
    CHECK(next.clock == 1);
  }

  SUBCASE("bsp with equal sizes matches lb-bsp with equal sizes") {
    const std::vector<PendingUpdate> ready = {{0, {{2.0}, 2}, 1}, {1, {{6.0}, 2}, 1}};
    const ModelState b = ps_step({SchemeKind::Bsp, 0, 4}, 2, m, ready);
    const ModelState l = ps_step({SchemeKind::LbBsp, 0, 4}, 2, m, ready);
    CHECK(b.params[0] == doctest::Approx(l.params[0]));
  }

  SUBCASE("asp applies each update alone") {
    const std::vector<PendingUpdate> ready = {{1, {{4.0}, 2}, 3}};
    const ModelState next = ps_step({SchemeKind::Asp, 0, 4}, 2, m, ready);
    CHECK(next.params[0] == doctest::Approx(-4.0));
    CHECK(next.clock == 1);

    const std::vector<PendingUpdate> two = {{0, {{1.0}, 2}, 3}, {1, {{2.0}, 2}, 3}};
    const ModelState after = ps_step({SchemeKind::Asp, 0, 4}, 2, m, two);
    CHECK(after.clock == 2);
    CHECK(after.params[0] == doctest::Approx(-3.0));
  }

  SUBCASE("bsp rejects missing or duplicate workers") {
    const std::vector<PendingUpdate> missing = {{0, {{1.0}, 1}, 1}};
    CHECK_THROWS_AS(ps_step({SchemeKind::Bsp, 0, 2}, 2, m, missing), std::invalid_argument);
    const std::vector<PendingUpdate> dup = {{0, {{1.0}, 1}, 1}, {0, {{1.0}, 1}, 1}};
    CHECK_THROWS_AS(ps_step({SchemeKind::LbBsp, 0, 2}, 2, m, dup), std::invalid_argument);
  }
}

TEST_CASE("scheme name round trip") {
  for (const SchemeKind k :
       {SchemeKind::Bsp, SchemeKind::Asp, SchemeKind::Ssp, SchemeKind::LbBsp})
    CHECK(scheme_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(scheme_from_string("bulk"), std::invalid_argument);
}
