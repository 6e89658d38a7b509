#include "t3ar/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "t3ar/rng.hpp"

namespace t3ar {
namespace {

template <typename T>
Linear<T> glorot_layer(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Linear<T> layer{Matrix<T>(out, in), std::vector<T>(out, T{0})};
  for (auto& w : layer.weight.values()) {
    w = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  }
  return layer;
}

// y = W x + b, accumulated in double.
template <typename T>
std::vector<T> affine(const Linear<T>& layer, std::span<const T> x) {
  std::vector<T> y(layer.out_dim());
  for (std::size_t o = 0; o < layer.out_dim(); ++o) {
    y[o] = static_cast<T>(dot(layer.weight.row(o), x) + static_cast<double>(layer.bias[o]));
  }
  return y;
}

template <typename T>
void check_finite(std::span<const T> v) {
  if (!all_finite(v)) throw Error("numerical blowup");
}

template <typename T>
bool layer_finite(const Linear<T>& layer) {
  return all_finite(layer.weight.values()) && all_finite(std::span<const T>(layer.bias));
}

template <typename T>
void require_grads_finite(const Grads<T>& grads) {
  bool ok = layer_finite(grads.head);
  for (const auto& layer : grads.encoder) ok = ok && layer_finite(layer);
  if (!ok) throw Error("non-finite gradient");
}

}  // namespace

ModelParams<float> init_params(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim == 0 || arch.feature_dim == 0 || arch.num_classes == 0) {
    throw ConfigError("architecture dimensions must be >= 1");
  }
  Rng rng = Rng::derive(seed, {0x1417});
  Network<float> net;
  std::size_t in = arch.input_dim;
  for (std::size_t h : arch.hidden) {
    if (h == 0) throw ConfigError("hidden width must be >= 1");
    net.encoder.push_back(glorot_layer<float>(in, h, rng));
    in = h;
  }
  net.encoder.push_back(glorot_layer<float>(in, arch.feature_dim, rng));
  net.head = glorot_layer<float>(arch.feature_dim, arch.num_classes, rng);
  ModelParams<float> params{net, net.zeros_like()};
  return params;
}

template <typename T>
ForwardResult<T> forward(const Network<T>& net, std::span<const T> x,
                         bool normalize_features) {
  if (x.size() != net.input_dim()) {
    throw Error("input has " + std::to_string(x.size()) + " dims, expected " +
                std::to_string(net.input_dim()));
  }
  ForwardResult<T> out;
  auto& cache = out.cache;
  std::vector<T> h(x.begin(), x.end());
  for (std::size_t l = 0; l < net.encoder.size(); ++l) {
    cache.inputs.push_back(h);
    std::vector<T> z = affine(net.encoder[l], std::span<const T>(h));
    check_finite(std::span<const T>(z));
    cache.pre.push_back(z);
    if (l + 1 < net.encoder.size()) {
      for (auto& v : z) v = v > T{0} ? v : T{0};
    }
    h = std::move(z);
  }
  cache.raw_feature = h;
  cache.raw_norm = l2_norm(std::span<const T>(h));
  cache.normalized = normalize_features;
  out.logits = affine(net.head, std::span<const T>(h));
  check_finite(std::span<const T>(out.logits));
  if (normalize_features) {
    if (!(cache.raw_norm > kDegenerateNorm)) throw Error("degenerate embedding");
    out.feature.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      out.feature[i] = static_cast<T>(static_cast<double>(h[i]) / cache.raw_norm);
    }
  } else {
    out.feature = std::move(h);
  }
  return out;
}

template <typename T>
std::vector<T> predict_logits(const Network<T>& net, std::span<const T> x) {
  if (x.size() != net.input_dim()) throw Error("input dimension mismatch");
  std::vector<T> h(x.begin(), x.end());
  for (std::size_t l = 0; l < net.encoder.size(); ++l) {
    std::vector<T> z = affine(net.encoder[l], std::span<const T>(h));
    if (l + 1 < net.encoder.size()) {
      for (auto& v : z) v = v > T{0} ? v : T{0};
    }
    h = std::move(z);
  }
  auto logits = affine(net.head, std::span<const T>(h));
  check_finite(std::span<const T>(logits));
  return logits;
}

template <typename T>
void accumulate_backward(const Network<T>& net, const ForwardCache<T>& cache,
                         std::span<const T> grad_feature,
                         std::span<const T> grad_logits, Grads<T>& grads,
                         BackwardOptions options) {
  const std::size_t d = net.feature_dim();
  const std::size_t c = net.num_classes();
  if (cache.inputs.size() != net.encoder.size()) throw Error("cache does not match network");
  if (!grad_feature.empty() && grad_feature.size() != d) {
    throw Error("grad_feature shape mismatch");
  }
  if (!grad_logits.empty() && grad_logits.size() != c) {
    throw Error("grad_logits shape mismatch");
  }

  // Gradient with respect to the raw (unnormalized) encoder output.
  std::vector<double> g_raw(d, 0.0);
  if (!grad_feature.empty()) {
    if (cache.normalized) {
      // d(z/|z|)/dz = (I - u u^T) / |z| with u = z/|z|
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        proj += static_cast<double>(grad_feature[i]) *
                static_cast<double>(cache.raw_feature[i]) / cache.raw_norm;
      }
      for (std::size_t i = 0; i < d; ++i) {
        const double u = static_cast<double>(cache.raw_feature[i]) / cache.raw_norm;
        g_raw[i] = (static_cast<double>(grad_feature[i]) - proj * u) / cache.raw_norm;
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) g_raw[i] = grad_feature[i];
    }
  }

  if (!grad_logits.empty()) {
    for (std::size_t o = 0; o < c; ++o) {
      const double go = grad_logits[o];
      if (go == 0.0) continue;
      auto gw = grads.head.weight.row(o);
      for (std::size_t i = 0; i < d; ++i) {
        gw[i] = static_cast<T>(gw[i] + go * static_cast<double>(cache.raw_feature[i]));
      }
      grads.head.bias[o] = static_cast<T>(grads.head.bias[o] + go);
    }
    if (options.logits_reach_encoder) {
      for (std::size_t o = 0; o < c; ++o) {
        const double go = grad_logits[o];
        if (go == 0.0) continue;
        auto w = net.head.weight.row(o);
        for (std::size_t i = 0; i < d; ++i) g_raw[i] += go * static_cast<double>(w[i]);
      }
    }
  }

  std::vector<double> g_out = std::move(g_raw);
  for (std::size_t l = net.encoder.size(); l-- > 0;) {
    const auto& layer = net.encoder[l];
    auto& glayer = grads.encoder[l];
    if (l + 1 < net.encoder.size()) {
      for (std::size_t o = 0; o < g_out.size(); ++o) {
        if (!(cache.pre[l][o] > T{0})) g_out[o] = 0.0;
      }
    }
    const auto& in = cache.inputs[l];
    std::vector<double> g_in(layer.in_dim(), 0.0);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      const double go = g_out[o];
      if (go == 0.0) continue;
      auto gw = glayer.weight.row(o);
      auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        gw[i] = static_cast<T>(gw[i] + go * static_cast<double>(in[i]));
        g_in[i] += go * static_cast<double>(w[i]);
      }
      glayer.bias[o] = static_cast<T>(glayer.bias[o] + go);
    }
    g_out = std::move(g_in);
  }
}

template <typename T>
Grads<T> backward(const Network<T>& net, const ForwardCache<T>& cache,
                  std::span<const T> grad_feature, std::span<const T> grad_logits,
                  BackwardOptions options) {
  Grads<T> grads = net.zeros_like();
  accumulate_backward(net, cache, grad_feature, grad_logits, grads, options);
  return grads;
}

template <typename T>
void sgd_step(ModelParams<T>& params, const Grads<T>& grads, double lr,
              double momentum, double weight_decay) {
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  require_grads_finite(grads);

  auto update = [&](std::span<T> w, std::span<T> v, std::span<const T> gr, bool decay) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      double vi = momentum * static_cast<double>(v[i]) + static_cast<double>(gr[i]);
      if (decay) vi += weight_decay * static_cast<double>(w[i]);
      v[i] = static_cast<T>(vi);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * vi);
    }
  };
  auto layer_update = [&](Linear<T>& p, Linear<T>& v, const Linear<T>& gr) {
    update(p.weight.values(), v.weight.values(), gr.weight.values(), true);
    update(std::span<T>(p.bias), std::span<T>(v.bias), std::span<const T>(gr.bias), false);
  };
  for (std::size_t l = 0; l < params.net.encoder.size(); ++l) {
    layer_update(params.net.encoder[l], params.velocity.encoder[l], grads.encoder[l]);
  }
  layer_update(params.net.head, params.velocity.head, grads.head);
}

void LrSchedule::validate() const {
  if (!(start_lr <= base_lr) || !(min_lr <= base_lr) || !(min_lr >= 0.0) ||
      !(start_lr >= 0.0)) {
    throw ConfigError("lr schedule requires start_lr <= base_lr and 0 <= min_lr <= base_lr");
  }
  if (total_steps == 0 || warmup_steps >= total_steps) {
    throw ConfigError("lr schedule requires warmup_steps < total_steps");
  }
}

double lr_at(const LrSchedule& s, std::size_t step) {
  s.validate();
  if (step >= s.total_steps) {
    throw Error("step " + std::to_string(step) + " out of range");
  }
  if (step < s.warmup_steps) {
    return s.start_lr + (s.base_lr - s.start_lr) * static_cast<double>(step) /
                            static_cast<double>(s.warmup_steps);
  }
  const std::size_t span = s.total_steps - 1 - s.warmup_steps;
  if (span == 0) return s.base_lr;
  const double progress =
      static_cast<double>(step - s.warmup_steps) / static_cast<double>(span);
  return s.min_lr +
         (s.base_lr - s.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

#define T3AR_INSTANTIATE_MODEL(T)                                                    \
  template ForwardResult<T> forward<T>(const Network<T>&, std::span<const T>, bool); \
  template std::vector<T> predict_logits<T>(const Network<T>&, std::span<const T>);  \
  template void accumulate_backward<T>(const Network<T>&, const ForwardCache<T>&,    \
                                       std::span<const T>, std::span<const T>,       \
                                       Grads<T>&, BackwardOptions);                  \
  template Grads<T> backward<T>(const Network<T>&, const ForwardCache<T>&,           \
                                std::span<const T>, std::span<const T>,              \
                                BackwardOptions);                                    \
  template void sgd_step<T>(ModelParams<T>&, const Grads<T>&, double, double, double);

T3AR_INSTANTIATE_MODEL(float)
T3AR_INSTANTIATE_MODEL(double)

#undef T3AR_INSTANTIATE_MODEL

}  // namespace t3ar
