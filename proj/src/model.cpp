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

#include "dpfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpfl {
namespace {

void check_dims(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch, got " +
                                std::to_string(got) + ", expected " + std::to_string(want));
  }
}

// Max-shifted softmax with cross-entropy. probs receives the softmax; the
// return value is the loss for `label`. Throws if the logits are non-finite.
double softmax_xent(std::span<const double> logits, int label, std::span<double> probs) {
  double max_z = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::runtime_error("model: non-finite activation");
    max_z = std::max(max_z, z);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - max_z);
    sum += probs[j];
  }
  for (std::size_t j = 0; j < logits.size(); ++j) probs[j] /= sum;
  return std::log(sum) - (logits[static_cast<std::size_t>(label)] - max_z);
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = static_cast<int>(j);  // strict: lowest id wins ties
  }
  return best;
}

void check_example(const Example& ex, std::size_t input_dim, std::size_t classes) {
  check_dims(ex.features.size(), input_dim, "model");
  if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes) {
    throw std::invalid_argument("model: label " + std::to_string(ex.label) +
                                " outside class count " + std::to_string(classes));
  }
}

class LogisticModel final : public Model {
 public:
  LogisticModel(std::size_t input_dim, std::size_t classes)
      : input_dim_(input_dim), classes_(classes) {
    shape_ = std::make_shared<const ShapeDescriptor>(std::vector<LayerShape>{
        {"weight", {classes, input_dim}},
        {"bias", {classes}},
    });
  }

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t class_count() const override { return classes_; }
  const std::shared_ptr<const ShapeDescriptor>& shape() const override { return shape_; }

  double per_example_gradient(std::span<const double> params, const Example& ex,
                              std::span<double> grad_out) const override {
    check_example(ex, input_dim_, classes_);
    check_dims(params.size(), shape_->total(), "logistic params");
    check_dims(grad_out.size(), shape_->total(), "logistic grad");

    std::vector<double> logits(classes_);
    logits_at(params, ex.features, logits);
    std::vector<double> probs(classes_);
    const double loss = softmax_xent(logits, ex.label, probs);

    // d loss / d logit_j = p_j - [j == label]
    const std::size_t bias_off = classes_ * input_dim_;
    for (std::size_t j = 0; j < classes_; ++j) {
      const double dz = probs[j] - (static_cast<int>(j) == ex.label ? 1.0 : 0.0);
      double* row = grad_out.data() + j * input_dim_;
      for (std::size_t i = 0; i < input_dim_; ++i) row[i] = dz * ex.features[i];
      grad_out[bias_off + j] = dz;
    }
    return loss;
  }

  Prediction forward(std::span<const double> params, const Example& ex) const override {
    check_example(ex, input_dim_, classes_);
    std::vector<double> logits(classes_);
    logits_at(params, ex.features, logits);
    std::vector<double> probs(classes_);
    const double loss = softmax_xent(logits, ex.label, probs);
    return Prediction{loss, argmax_lowest(logits)};
  }

  ParamVector init_params(RngStream&) const override { return zeros(shape_); }

 private:
  void logits_at(std::span<const double> params, std::span<const double> x,
                 std::span<double> logits) const {
    const std::size_t bias_off = classes_ * input_dim_;
    for (std::size_t j = 0; j < classes_; ++j) {
      const double* row = params.data() + j * input_dim_;
      double z = params[bias_off + j];
      for (std::size_t i = 0; i < input_dim_; ++i) z += row[i] * x[i];
      logits[j] = z;
    }
  }

  std::size_t input_dim_;
  std::size_t classes_;
  std::shared_ptr<const ShapeDescriptor> shape_;
};

class MlpModel final : public Model {
 public:
  MlpModel(std::size_t input_dim, std::size_t hidden, std::size_t classes)
      : input_dim_(input_dim), hidden_(hidden), classes_(classes) {
    shape_ = std::make_shared<const ShapeDescriptor>(std::vector<LayerShape>{
        {"hidden_weight", {hidden, input_dim}},
        {"hidden_bias", {hidden}},
        {"output_weight", {classes, hidden}},
        {"output_bias", {classes}},
    });
  }

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t class_count() const override { return classes_; }
  const std::shared_ptr<const ShapeDescriptor>& shape() const override { return shape_; }

  double per_example_gradient(std::span<const double> params, const Example& ex,
                              std::span<double> grad_out) const override {
    check_example(ex, input_dim_, classes_);
    check_dims(params.size(), shape_->total(), "mlp params");
    check_dims(grad_out.size(), shape_->total(), "mlp grad");

    const Slices<const double> s(*this, params.data());
    std::vector<double> pre(hidden_), act(hidden_), logits(classes_), probs(classes_);
    forward_pass(s, ex.features, pre, act, logits);
    const double loss = softmax_xent(logits, ex.label, probs);

    const Slices<double> g(*this, grad_out.data());
    // output layer: dz_j = p_j - y_j
    std::vector<double> dz(classes_);
    for (std::size_t j = 0; j < classes_; ++j) {
      dz[j] = probs[j] - (static_cast<int>(j) == ex.label ? 1.0 : 0.0);
      double* row = g.w2 + j * hidden_;
      for (std::size_t h = 0; h < hidden_; ++h) row[h] = dz[j] * act[h];
      g.b2[j] = dz[j];
    }
    // hidden layer: dh = W2^T dz, masked by the ReLU gate
    for (std::size_t h = 0; h < hidden_; ++h) {
      double dh = 0.0;
      for (std::size_t j = 0; j < classes_; ++j) dh += s.w2[j * hidden_ + h] * dz[j];
      const double dpre = pre[h] > 0.0 ? dh : 0.0;
      double* row = g.w1 + h * input_dim_;
      for (std::size_t i = 0; i < input_dim_; ++i) row[i] = dpre * ex.features[i];
      g.b1[h] = dpre;
    }
    return loss;
  }

  Prediction forward(std::span<const double> params, const Example& ex) const override {
    check_example(ex, input_dim_, classes_);
    const Slices<const double> s(*this, params.data());
    std::vector<double> pre(hidden_), act(hidden_), logits(classes_), probs(classes_);
    forward_pass(s, ex.features, pre, act, logits);
    const double loss = softmax_xent(logits, ex.label, probs);
    return Prediction{loss, argmax_lowest(logits)};
  }

  ParamVector init_params(RngStream& rng) const override {
    ParamVector p = zeros(shape_);
    const Slices<double> s(*this, p.values.data());
    const double r1 = 1.0 / std::sqrt(static_cast<double>(input_dim_));
    for (std::size_t i = 0; i < hidden_ * input_dim_; ++i) {
      s.w1[i] = (2.0 * rng.uniform() - 1.0) * r1;
    }
    const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t i = 0; i < classes_ * hidden_; ++i) {
      s.w2[i] = (2.0 * rng.uniform() - 1.0) * r2;
    }
    return p;
  }

 private:
  template <typename T>
  struct Slices {
    T* w1;
    T* b1;
    T* w2;
    T* b2;
    Slices(const MlpModel& m, T* base) {
      w1 = base;
      b1 = w1 + m.hidden_ * m.input_dim_;
      w2 = b1 + m.hidden_;
      b2 = w2 + m.classes_ * m.hidden_;
    }
  };

  void forward_pass(const Slices<const double>& s, std::span<const double> x,
                    std::span<double> pre, std::span<double> act,
                    std::span<double> logits) const {
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double* row = s.w1 + h * input_dim_;
      double z = s.b1[h];
      for (std::size_t i = 0; i < input_dim_; ++i) z += row[i] * x[i];
      pre[h] = z;
      act[h] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t j = 0; j < classes_; ++j) {
      const double* row = s.w2 + j * hidden_;
      double z = s.b2[j];
      for (std::size_t h = 0; h < hidden_; ++h) z += row[h] * act[h];
      logits[j] = z;
    }
  }

  std::size_t input_dim_;
  std::size_t hidden_;
  std::size_t classes_;
  std::shared_ptr<const ShapeDescriptor> shape_;
};

}  // namespace

ParamVector zeros(const std::shared_ptr<const ShapeDescriptor>& shape) {
  return ParamVector{std::vector<double>(shape->total(), 0.0), shape};
}

std::unique_ptr<Model> make_logistic(std::size_t input_dim, std::size_t classes) {
  if (input_dim == 0 || classes < 2) {
    throw std::invalid_argument("make_logistic: need input_dim >= 1 and classes >= 2");
  }
  return std::make_unique<LogisticModel>(input_dim, classes);
}

std::unique_ptr<Model> make_mlp(std::size_t input_dim, std::size_t hidden, std::size_t classes) {
  if (input_dim == 0 || hidden == 0 || classes < 2) {
    throw std::invalid_argument("make_mlp: need input_dim, hidden >= 1 and classes >= 2");
  }
  return std::make_unique<MlpModel>(input_dim, hidden, classes);
}

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind_ = OptimizerKind::kSgd;
  s.learning_rate_ = learning_rate;
  return s;
}

OptimizerState OptimizerState::adam(double learning_rate, std::size_t dim, AdamConfig cfg) {
  OptimizerState s;
  s.kind_ = OptimizerKind::kAdam;
  s.learning_rate_ = learning_rate;
  s.adam_ = cfg;
  s.m_.assign(dim, 0.0);
  s.v_.assign(dim, 0.0);
  return s;
}

void apply_update(ParamVector& params, OptimizerState& opt, const ParamVector& gradient) {
  check_dims(gradient.size(), params.size(), "apply_update");
  const std::size_t n = params.size();
  double* w = params.values.data();
  const double* g = gradient.values.data();
  const double lr = opt.learning_rate_;

  opt.step_ += 1;
  if (opt.kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < n; ++i) w[i] -= lr * g[i];
    return;
  }

  check_dims(opt.m_.size(), n, "apply_update (adam moments)");
  const double b1 = opt.adam_.beta1;
  const double b2 = opt.adam_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step_));
  for (std::size_t i = 0; i < n; ++i) {
    opt.m_[i] = b1 * opt.m_[i] + (1.0 - b1) * g[i];
    opt.v_[i] = b2 * opt.v_[i] + (1.0 - b2) * g[i] * g[i];
    const double m_hat = opt.m_[i] / bc1;
    const double v_hat = opt.v_[i] / bc2;
    w[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.adam_.epsilon_hat);
  }
}

PerSampleBatch per_sample_gradients_serial(const Model& model, const ParamVector& params,
                                           std::span<const Example> batch) {
  PerSampleBatch out;
  out.gradients.reserve(batch.size());
  out.losses.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.gradients.push_back(zeros(model.shape()));
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.losses[i] = model.per_example_gradient(params.values, batch[i], out.gradients[i].values);
  }
  return out;
}

PerSampleBatch per_sample_gradients(const Model& model, const ParamVector& params,
                                    std::span<const Example> batch) {
  PerSampleBatch out;
  out.gradients.reserve(batch.size());
  out.losses.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.gradients.push_back(zeros(model.shape()));
  }
  const std::int64_t n = static_cast<std::int64_t>(batch.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out.losses[i] = model.per_example_gradient(params.values, batch[i], out.gradients[i].values);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

EvalResult evaluate_serial(const Model& model, const ParamVector& params,
                           std::span<const Example> examples,
                           std::span<const std::uint32_t> indices) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty slice");
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (std::uint32_t idx : indices) {
    const Example& ex = examples[idx];
    const Prediction p = model.forward(params.values, ex);
    loss_sum += p.loss;
    correct += p.predicted == ex.label ? 1 : 0;
  }
  const double n = static_cast<double>(indices.size());
  return EvalResult{loss_sum / n, static_cast<double>(correct) / n};
}

EvalResult evaluate(const Model& model, const ParamVector& params,
                    std::span<const Example> examples, std::span<const std::uint32_t> indices) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty slice");
  // Per-example results land in slots; the reduction below is serial so the
  // result is bit-identical for any thread count.
  std::vector<double> losses(indices.size());
  std::vector<unsigned char> correct(indices.size());
  const std::int64_t n = static_cast<std::int64_t>(indices.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const Example& ex = examples[indices[i]];
      const Prediction p = model.forward(params.values, ex);
      losses[i] = p.loss;
      correct[i] = p.predicted == ex.label ? 1 : 0;
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  double loss_sum = 0.0;
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    loss_sum += losses[i];
    hits += correct[i];
  }
  return EvalResult{loss_sum / static_cast<double>(n), static_cast<double>(hits) / static_cast<double>(n)};
}

EvalResult evaluate(const Model& model, const ParamVector& params,
                    std::span<const Example> examples) {
  std::vector<std::uint32_t> all(examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  return evaluate(model, params, examples, all);
}

}  // namespace dpfl
