#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "t3ar/numerics.hpp"

namespace t3ar {

/// Fully connected layer, weight is out x in.
template <typename T>
struct Linear {
  Matrix<T> weight;
  std::vector<T> bias;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  bool operator==(const Linear&) const = default;
};

/// Encoder g (linear layers with ReLU between them, none after the last)
/// followed by a linear classifier head on the raw encoder output.
template <typename T>
struct Network {
  std::vector<Linear<T>> encoder;
  Linear<T> head;

  std::size_t input_dim() const { return encoder.front().in_dim(); }
  std::size_t feature_dim() const { return encoder.back().out_dim(); }
  std::size_t num_classes() const { return head.out_dim(); }

  /// Same shapes, all zeros.
  Network zeros_like() const;

  template <typename U>
  Network<U> cast() const;

  /// Applies fn(span<T>) to every parameter buffer (weights then bias, per
  /// layer, encoder first).
  template <typename Fn>
  void for_each_buffer(Fn&& fn);

  bool operator==(const Network&) const = default;
};

/// Gradients share the parameter layout.
template <typename T>
using Grads = Network<T>;

/// Trainable parameters plus SGD momentum buffers.
template <typename T>
struct ModelParams {
  Network<T> net;
  Network<T> velocity;

  template <typename U>
  ModelParams<U> cast() const {
    return {net.template cast<U>(), velocity.template cast<U>()};
  }
  bool operator==(const ModelParams&) const = default;
};

struct Architecture {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden = {64};
  std::size_t feature_dim = 16;
  std::size_t num_classes = 6;
};

/// Glorot-uniform weights, zero biases, zero momentum; deterministic in seed.
ModelParams<float> init_params(const Architecture& arch, std::uint64_t seed);

template <typename T>
struct ForwardCache {
  std::vector<std::vector<T>> inputs;  // input to each encoder layer
  std::vector<std::vector<T>> pre;     // pre-activation of each encoder layer
  std::vector<T> raw_feature;          // encoder output before normalization
  double raw_norm = 0.0;
  bool normalized = false;
};

template <typename T>
struct ForwardResult {
  std::vector<T> feature;  // normalized iff requested
  std::vector<T> logits;
  ForwardCache<T> cache;
};

template <typename T>
ForwardResult<T> forward(const Network<T>& net, std::span<const T> x,
                         bool normalize_features);

/// Logits only, no cache.
template <typename T>
std::vector<T> predict_logits(const Network<T>& net, std::span<const T> x);

struct BackwardOptions {
  /// When false the classification gradient stops at the head and leaves
  /// the encoder untouched.
  bool logits_reach_encoder = true;
};

/// Adds the parameter gradients for upstream gradients (grad_feature,
/// grad_logits) into `grads`. grad_feature is with respect to the feature
/// returned by forward (normalized or not); it only reaches encoder
/// parameters. Either upstream span may be empty, meaning zero.
template <typename T>
void accumulate_backward(const Network<T>& net, const ForwardCache<T>& cache,
                         std::span<const T> grad_feature,
                         std::span<const T> grad_logits, Grads<T>& grads,
                         BackwardOptions options = {});

template <typename T>
Grads<T> backward(const Network<T>& net, const ForwardCache<T>& cache,
                  std::span<const T> grad_feature, std::span<const T> grad_logits,
                  BackwardOptions options = {});

/// v <- momentum*v + g + weight_decay*w (weights only); w <- w - lr*v.
template <typename T>
void sgd_step(ModelParams<T>& params, const Grads<T>& grads, double lr,
              double momentum, double weight_decay);

/// Linear warmup from start_lr to base_lr, then cosine decay to min_lr on
/// the last step.
struct LrSchedule {
  double start_lr = 1e-5;
  double base_lr = 0.1;
  double min_lr = 1e-6;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;

  void validate() const;
};

double lr_at(const LrSchedule& schedule, std::size_t step);

// ---------------------------------------------------------------------------

template <typename T>
Network<T> Network<T>::zeros_like() const {
  Network out;
  for (const auto& layer : encoder) {
    out.encoder.push_back(
        {Matrix<T>(layer.out_dim(), layer.in_dim()), std::vector<T>(layer.out_dim())});
  }
  out.head = {Matrix<T>(head.out_dim(), head.in_dim()), std::vector<T>(head.out_dim())};
  return out;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out;
  for (const auto& layer : encoder) {
    out.encoder.push_back({layer.weight.template cast<U>(),
                           std::vector<U>(layer.bias.begin(), layer.bias.end())});
  }
  out.head = {head.weight.template cast<U>(),
              std::vector<U>(head.bias.begin(), head.bias.end())};
  return out;
}

template <typename T>
template <typename Fn>
void Network<T>::for_each_buffer(Fn&& fn) {
  for (auto& layer : encoder) {
    fn(layer.weight.values());
    fn(std::span<T>(layer.bias));
  }
  fn(head.weight.values());
  fn(std::span<T>(head.bias));
}

}  // namespace t3ar
