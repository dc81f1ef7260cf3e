#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numeric>
#include <vector>

#include "lbbsp/rng.hpp"
#include "lbbsp/sgd.hpp"

using namespace lbbsp;

namespace {

std::vector<int> all_indices(const Dataset& data) {
  std::vector<int> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// plain textbook formulation, independent of the library's stable one
double naive_loss(const ModelState& m, const Dataset& data) {
  double total = 0.0;
  for (const auto& s : data.samples) {
    double z = 0.0;
    for (std::size_t j = 0; j < m.params.size(); ++j) z += m.params[j] * s.features[j];
    const double p = 1.0 / (1.0 + std::exp(-z));
    total += -(s.label * std::log(p) + (1.0 - s.label) * std::log(1.0 - p));
  }
  return total / static_cast<double>(data.size());
}

double rel_diff(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-30});
  return std::fabs(a - b) / scale;
}

}  // namespace

TEST_CASE("generate_dataset is a deterministic function of the seed") {
  const Dataset a = generate_dataset(1, 4, 2);
  const Dataset b = generate_dataset(1, 4, 2);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].label == b.samples[i].label);
    CHECK(a.samples[i].features == b.samples[i].features);
  }

  const Dataset c = generate_dataset(2, 4, 2);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.samples[i].features != c.samples[i].features) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("generate_dataset rejects bad shapes") {
  CHECK_THROWS_AS(generate_dataset(1, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(1, 2, 0), std::invalid_argument);
}

TEST_CASE("full-batch descent decreases loss monotonically on seed 7") {
  const Dataset data = generate_dataset(7, 1000, 10);
  ModelState m;
  m.params.assign(10, 0.0);
  m.learning_rate = 0.5;
  double prev = loss(m, data);
  const auto idx = all_indices(data);
  for (int step = 0; step < 50; ++step) {
    m = apply_update(std::move(m), batch_gradient(m, data, idx));
    const double cur = loss(m, data);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK(prev < 0.5);  // well below log(2) at the origin
}

TEST_CASE("descent holds for learning rates below the stability threshold") {
  const Dataset data = generate_dataset(3, 400, 6);
  const auto idx = all_indices(data);
  // crude line search for the largest stable rate among a descending ladder
  double stable = 0.0;
  for (const double eta : {8.0, 4.0, 2.0, 1.0, 0.5}) {
    ModelState m;
    m.params.assign(6, 0.0);
    m.learning_rate = eta;
    bool monotone = true;
    double prev = loss(m, data);
    for (int step = 0; step < 40 && monotone; ++step) {
      m = apply_update(std::move(m), batch_gradient(m, data, idx));
      const double cur = loss(m, data);
      if (cur > prev + 1e-12) monotone = false;
      prev = cur;
    }
    if (monotone) {
      stable = eta;
      break;
    }
  }
  REQUIRE(stable > 0.0);

  // any rate below the found threshold must also descend
  ModelState m;
  m.params.assign(6, 0.0);
  m.learning_rate = stable / 2.0;
  double prev = loss(m, data);
  for (int step = 0; step < 40; ++step) {
    m = apply_update(std::move(m), batch_gradient(m, data, idx));
    const double cur = loss(m, data);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("batch_gradient of a singleton equals the per-sample gradient") {
  const Dataset data = generate_dataset(11, 20, 3);
  ModelState m;
  m.params = {0.3, -0.2, 0.7};
  const int j = 5;
  const std::vector<int> single = {j};
  const Gradient g = batch_gradient(m, data, single);
  CHECK(g.batch_size == 1);

  const std::vector<int> pair = {5, 9};
  const Gradient g2 = batch_gradient(m, data, pair);
  const std::vector<int> other = {9};
  const Gradient g9 = batch_gradient(m, data, other);
  for (std::size_t d = 0; d < 3; ++d)
    CHECK(rel_diff(g2.values[d], 0.5 * (g.values[d] + g9.values[d])) < 1e-12);
}

TEST_CASE("batch_gradient rejects bad indices") {
  const Dataset data = generate_dataset(11, 20, 3);
  ModelState m;
  m.params = {0.0, 0.0, 0.0};
  const std::vector<int> bad = {20};
  CHECK_THROWS_AS(batch_gradient(m, data, bad), std::out_of_range);
  const std::vector<int> empty;
  CHECK_THROWS_AS(batch_gradient(m, data, empty), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences at 100 random points") {
  const Dataset data = generate_dataset(13, 100, 4);
  Rng rng(99);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    ModelState m;
    m.params.resize(4);
    for (auto& p : m.params) p = rng.uniform(-2.0, 2.0);
    const int idx = rng.uniform_int(0, 99);
    const std::vector<int> batch = {idx};
    const Gradient g = batch_gradient(m, data, batch);
    for (int d = 0; d < 4; ++d) {
      ModelState lo = m, hi = m;
      lo.params[static_cast<std::size_t>(d)] -= h;
      hi.params[static_cast<std::size_t>(d)] += h;
      const double fd = (sample_loss(hi.params, data.samples[static_cast<std::size_t>(idx)]) -
                         sample_loss(lo.params, data.samples[static_cast<std::size_t>(idx)])) /
                        (2.0 * h);
      const double gd = g.values[static_cast<std::size_t>(d)];
      if (std::fabs(fd) > 1e-8) CHECK(rel_diff(gd, fd) < 1e-4);
    }
  }
}

TEST_CASE("disjoint-union gradient equals the batch-size-weighted mean of parts") {
  const Dataset data = generate_dataset(17, 60, 5);
  ModelState m;
  m.params = {0.1, 0.2, -0.3, 0.4, -0.5};
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    const int na = rng.uniform_int(1, 30);
    const int nb = rng.uniform_int(1, 29);
    std::vector<int> a, b, both;
    for (int i = 0; i < na; ++i) a.push_back(rng.uniform_int(0, 29));
    for (int i = 0; i < nb; ++i) b.push_back(rng.uniform_int(30, 59));
    both = a;
    both.insert(both.end(), b.begin(), b.end());
    const Gradient ga = batch_gradient(m, data, a);
    const Gradient gb = batch_gradient(m, data, b);
    const Gradient gu = batch_gradient(m, data, both);
    const double wa = static_cast<double>(na) / (na + nb);
    for (std::size_t d = 0; d < 5; ++d)
      CHECK(rel_diff(gu.values[d], wa * ga.values[d] + (1.0 - wa) * gb.values[d]) < 1e-12);
  }
}

TEST_CASE("loss basics") {
  const Dataset clean = generate_dataset(23, 300, 4, 0.0);
  ModelState at_truth;
  at_truth.params = separator_params(23, 4);
  ModelState at_zero;
  at_zero.params.assign(4, 0.0);
  CHECK(loss(at_truth, clean) < loss(at_zero, clean));

  Dataset doubled = clean;
  doubled.samples.insert(doubled.samples.end(), clean.samples.begin(), clean.samples.end());
  CHECK(loss(at_truth, doubled) == doctest::Approx(loss(at_truth, clean)).epsilon(1e-12));

  CHECK(rel_diff(loss(at_truth, clean), naive_loss(at_truth, clean)) < 1e-12);
}

TEST_CASE("apply_update arithmetic and clock") {
  ModelState m;
  m.params = {1.0, 1.0};
  m.learning_rate = 0.1;
  Gradient zero{{0.0, 0.0}, 1};
  const ModelState m1 = apply_update(m, zero);
  CHECK(m1.params == std::vector<double>{1.0, 1.0});
  CHECK(m1.clock == 1);

  Gradient g{{10.0, 0.0}, 1};
  const ModelState m2 = apply_update(m, g);
  CHECK(m2.params[0] == doctest::Approx(0.0));
  CHECK(m2.params[1] == doctest::Approx(1.0));

  Gradient wrong{{1.0, 2.0, 3.0}, 1};
  CHECK_THROWS_AS(apply_update(m, wrong), std::invalid_argument);
}
