// Copyright 2026 The dpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal differentiable models with exact per-sample gradients and the two
// optimizers used by the simulator. No ML framework: the analytic gradients
// are what the per-sample clipping machinery consumes, and they are checked
// against finite differences in the tests.

#ifndef DPFL_MODEL_HPP_
#define DPFL_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dpfl/rng.hpp"

namespace dpfl {

/// Ordered layer layout backing a flat parameter vector.
struct LayerShape {
  std::string name;
  std::vector<std::size_t> dims;

  std::size_t count() const {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
  }
};

class ShapeDescriptor {
 public:
  explicit ShapeDescriptor(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
    total_ = 0;
    for (const auto& l : layers_) total_ += l.count();
  }

  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t total() const { return total_; }

 private:
  std::vector<LayerShape> layers_;
  std::size_t total_ = 0;
};

/// Flat vector of model parameters or gradients plus its layer layout.
/// The descriptor is shared: gradients of one model all point at one layout.
struct ParamVector {
  std::vector<double> values;
  std::shared_ptr<const ShapeDescriptor> shape;

  std::size_t size() const { return values.size(); }
};

ParamVector zeros(const std::shared_ptr<const ShapeDescriptor>& shape);

/// One training example: feature vector (pixels scaled to [0,1] for image
/// data) and an integer class id.
struct Example {
  std::vector<double> features;
  int label = 0;
};

struct Prediction {
  double loss = 0.0;
  int predicted = 0;  // argmax class, lowest id wins ties
};

/// A differentiable classifier with softmax cross-entropy loss. Stateless
/// and const, so one instance serves any number of concurrent clients.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t class_count() const = 0;
  virtual const std::shared_ptr<const ShapeDescriptor>& shape() const = 0;
  std::size_t param_count() const { return shape()->total(); }

  /// Exact analytic gradient of this single example's cross-entropy loss,
  /// written into grad_out (param_count entries). Returns the example loss.
  /// Throws std::invalid_argument on dimension mismatch and
  /// std::runtime_error if activations go non-finite (divergence upstream).
  virtual double per_example_gradient(std::span<const double> params, const Example& ex,
                                      std::span<double> grad_out) const = 0;

  /// Loss and argmax prediction for one example.
  virtual Prediction forward(std::span<const double> params, const Example& ex) const = 0;

  /// Deterministic initial parameters (may consume the stream).
  virtual ParamVector init_params(RngStream& rng) const = 0;
};

/// Multinomial logistic regression: weight matrix (classes x input) plus
/// bias. init_params is all zeros.
std::unique_ptr<Model> make_logistic(std::size_t input_dim, std::size_t classes);

/// One-hidden-layer ReLU MLP. init_params draws uniform(-r, r) weights with
/// r = 1/sqrt(fan_in) and zero biases.
std::unique_ptr<Model> make_mlp(std::size_t input_dim, std::size_t hidden, std::size_t classes);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { kSgd, kAdam };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;
};

class OptimizerState {
 public:
  static OptimizerState sgd(double learning_rate);
  static OptimizerState adam(double learning_rate, std::size_t dim, AdamConfig cfg = {});

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return learning_rate_; }
  std::int64_t step() const { return step_; }

  friend void apply_update(ParamVector& params, OptimizerState& opt, const ParamVector& gradient);

 private:
  OptimizerKind kind_ = OptimizerKind::kSgd;
  double learning_rate_ = 0.0;
  std::int64_t step_ = 0;
  AdamConfig adam_;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// In-place parameter update. Plain SGD is exactly params -= lr * gradient;
/// Adam is the standard first/second-moment update with bias correction.
void apply_update(ParamVector& params, OptimizerState& opt, const ParamVector& gradient);

// ---------------------------------------------------------------------------
// Batch kernels. The OpenMP versions are the production path; the _serial
// twins are the reference the tests compare against bit for bit. Each
// example's gradient is written to its own slot, so outputs are identical
// for any thread count.

struct PerSampleBatch {
  std::vector<ParamVector> gradients;  // one exact gradient per example
  std::vector<double> losses;          // aligned per-example losses
};

PerSampleBatch per_sample_gradients(const Model& model, const ParamVector& params,
                                    std::span<const Example> batch);
PerSampleBatch per_sample_gradients_serial(const Model& model, const ParamVector& params,
                                           std::span<const Example> batch);

struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// Mean cross-entropy and top-1 accuracy over a slice (ties predict the
/// lowest class id). Throws std::invalid_argument on an empty slice.
EvalResult evaluate(const Model& model, const ParamVector& params,
                    std::span<const Example> examples, std::span<const std::uint32_t> indices);
EvalResult evaluate_serial(const Model& model, const ParamVector& params,
                           std::span<const Example> examples,
                           std::span<const std::uint32_t> indices);

/// Convenience: evaluate every example in the slice.
EvalResult evaluate(const Model& model, const ParamVector& params,
                    std::span<const Example> examples);

}  // namespace dpfl

#endif  // DPFL_MODEL_HPP_
