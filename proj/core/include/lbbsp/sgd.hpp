#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lbbsp {

/// One labelled training sample for binary logistic regression; label is 0 or 1.
struct Sample {
  std::vector<double> features;
  double label = 0.0;
};

/// Synthetic training set. Generated once from a seed, then immutable.
struct Dataset {
  std::vector<Sample> samples;
  int dim = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
};

struct ModelState {
  std::vector<double> params;
  double learning_rate = 0.1;
  std::int64_t clock = 0;  // number of applied updates
};

struct Gradient {
  std::vector<double> values;
  int batch_size = 0;  // number of samples this gradient was averaged over
};

/// The ground-truth separator generate_dataset labels against for a given seed.
std::vector<double> separator_params(std::uint64_t seed, int dim);

/// Deterministic dataset: features uniform in [-1,1], labels from the seed's
/// ground-truth separator with bounded uniform label noise on the margin.
Dataset generate_dataset(std::uint64_t seed, int n, int d, double noise_amplitude = 0.2);

double sample_loss(const std::vector<double>& params, const Sample& s);

/// Mean per-sample logistic loss over the whole dataset.
double loss(const ModelState& model, const Dataset& data);

/// Mean of per-sample gradients over the given index set.
Gradient batch_gradient(const ModelState& model, const Dataset& data,
                        std::span<const int> indices);

/// params <- params - learning_rate * g, clock + 1.
ModelState apply_update(ModelState model, const Gradient& g);

}  // namespace lbbsp
