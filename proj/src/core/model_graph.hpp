#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "core/layers.hpp"
#include "core/model.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace scnn {

// A ModelSpec instantiated with parameter tensors. Conv/dense weights are
// Kaiming-uniform, biases zero, batch-norm scale one / shift zero; each
// node's initializer draws from its own (seed, init, node index) stream so a
// node's weights do not depend on the layers around it.
//
// Train-mode forward stores per-node caches consumed by exactly one backward;
// eval-mode forward leaves no state behind and is a pure function. A dropout
// node draws its mask from (seed, dropout, node index, ticket), so a repeated
// forward with the same ticket reproduces the same mask.
template <typename T>
class ModelGraph {
public:
  struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
  };

  struct BackwardResult {
    std::vector<Tensor<T>> param_grads; // aligned with params()
    Tensor<T> dx;
  };

  ModelGraph() = default;

  ModelGraph(ModelSpec spec, uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    validate_spec(spec_);
    build();
  }

  const ModelSpec& spec() const { return spec_; }
  uint64_t seed() const { return seed_; }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (auto& node : nodes_) {
      std::visit(
          [&out](auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ConvNode> || std::is_same_v<N, DenseNode>) {
              out.push_back({n.name + ".weight", &n.w});
              out.push_back({n.name + ".bias", &n.b});
            } else if constexpr (std::is_same_v<N, BnNode>) {
              out.push_back({n.name + ".gamma", &n.state.gamma});
              out.push_back({n.name + ".beta", &n.state.beta});
            }
          },
          node);
    }
    return out;
  }

  // Trainable parameters plus batch-norm running statistics; everything a
  // checkpoint must carry to reproduce eval-mode forward.
  std::vector<ParamRef> state_tensors() {
    std::vector<ParamRef> out;
    for (auto& node : nodes_) {
      std::visit(
          [&out](auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ConvNode> || std::is_same_v<N, DenseNode>) {
              out.push_back({n.name + ".weight", &n.w});
              out.push_back({n.name + ".bias", &n.b});
            } else if constexpr (std::is_same_v<N, BnNode>) {
              out.push_back({n.name + ".gamma", &n.state.gamma});
              out.push_back({n.name + ".beta", &n.state.beta});
              out.push_back({n.name + ".running_mean", &n.state.running_mean});
              out.push_back({n.name + ".running_var", &n.state.running_var});
            }
          },
          node);
    }
    return out;
  }

  int64_t param_count() {
    int64_t total = 0;
    for (const ParamRef& p : params()) total += p.tensor->numel();
    return total;
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, uint64_t ticket = 0) {
    if (input.ndim() != 4 || input.dim(1) != spec_.in_channels || input.dim(2) != spec_.in_h ||
        input.dim(3) != spec_.in_w)
      raise(ErrorCode::shape, "forward: expected N x " + std::to_string(spec_.in_channels) + " x " +
                                  std::to_string(spec_.in_h) + " x " + std::to_string(spec_.in_w) +
                                  " input, got " + shape_str(input.shape()));
    Tensor<T> x = input;
    Rng root(seed_);
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const bool cache = mode == Mode::train;
      std::visit(
          [&](auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ConvNode>) {
              auto [y, c] = conv2d_forward(x, n.w, n.b);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            } else if constexpr (std::is_same_v<N, BnNode>) {
              auto [y, c] = batchnorm2d_forward(x, n.state, mode);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            } else if constexpr (std::is_same_v<N, ReluNode>) {
              auto [y, c] = relu_forward(x);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            } else if constexpr (std::is_same_v<N, PoolNode>) {
              auto [y, c] = maxpool2d_forward(x);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            } else if constexpr (std::is_same_v<N, AdaptNode>) {
              auto [y, c] = adaptive_avgpool2d_forward(x, n.out_h, n.out_w);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            } else if constexpr (std::is_same_v<N, DropNode>) {
              Rng stream = root.child(rng_label::dropout, static_cast<uint64_t>(i), ticket);
              auto [y, c] = dropout_forward(x, n.p, mode, stream);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            } else if constexpr (std::is_same_v<N, FlattenNode>) {
              if (cache) n.in_shape = x.shape();
              x = x.reshape({x.dim(0), x.numel() / x.dim(0)});
            } else if constexpr (std::is_same_v<N, DenseNode>) {
              auto [y, c] = dense_forward(x, n.w, n.b);
              x = std::move(y);
              if (cache) n.cache = std::move(c);
            }
          },
          nodes_[i]);
    }
    has_cache_ = mode == Mode::train;
    return x;
  }

  BackwardResult backward(const Tensor<T>& dlogits) {
    if (!has_cache_) raise(ErrorCode::state, "backward: no cached train-mode forward");
    has_cache_ = false;
    std::vector<Tensor<T>> rev_grads; // per parameter, collected in reverse node order
    Tensor<T> dy = dlogits;
    for (size_t i = nodes_.size(); i-- > 0;) {
      std::visit(
          [&](auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ConvNode>) {
              Conv2dGrads<T> g = conv2d_backward(n.cache, n.w, dy);
              rev_grads.push_back(std::move(g.db));
              rev_grads.push_back(std::move(g.dw));
              dy = std::move(g.dx);
              n.cache = Conv2dCache<T>{};
            } else if constexpr (std::is_same_v<N, BnNode>) {
              BatchNormGrads<T> g = batchnorm2d_backward(n.cache, n.state, dy);
              rev_grads.push_back(std::move(g.dbeta));
              rev_grads.push_back(std::move(g.dgamma));
              dy = std::move(g.dx);
              n.cache = BatchNormCache<T>{};
            } else if constexpr (std::is_same_v<N, ReluNode>) {
              dy = relu_backward(n.cache, dy);
              n.cache = ReluCache<T>{};
            } else if constexpr (std::is_same_v<N, PoolNode>) {
              dy = maxpool2d_backward(n.cache, dy);
              n.cache = MaxPoolCache<T>{};
            } else if constexpr (std::is_same_v<N, AdaptNode>) {
              dy = adaptive_avgpool2d_backward(n.cache, dy);
              n.cache = AdaptiveAvgPoolCache<T>{};
            } else if constexpr (std::is_same_v<N, DropNode>) {
              dy = dropout_backward(n.cache, dy);
              n.cache = DropoutCache<T>{};
            } else if constexpr (std::is_same_v<N, FlattenNode>) {
              dy = dy.reshape(n.in_shape);
            } else if constexpr (std::is_same_v<N, DenseNode>) {
              DenseGrads<T> g = dense_backward(n.cache, n.w, dy);
              rev_grads.push_back(std::move(g.db));
              rev_grads.push_back(std::move(g.dw));
              dy = std::move(g.dx);
              n.cache = DenseCache<T>{};
            }
          },
          nodes_[i]);
    }
    BackwardResult out;
    out.param_grads.assign(std::make_move_iterator(rev_grads.rbegin()),
                           std::make_move_iterator(rev_grads.rend()));
    out.dx = std::move(dy);
    return out;
  }

  template <typename U>
  ModelGraph<U> cast() const {
    ModelGraph<U> out(spec_, seed_);
    auto src = const_cast<ModelGraph*>(this)->state_tensors();
    auto dst = out.state_tensors();
    for (size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
    return out;
  }

private:
  struct ConvNode {
    std::string name;
    Tensor<T> w, b;
    Conv2dCache<T> cache;
  };
  struct BnNode {
    std::string name;
    BatchNormState<T> state;
    BatchNormCache<T> cache;
  };
  struct ReluNode {
    ReluCache<T> cache;
  };
  struct PoolNode {
    MaxPoolCache<T> cache;
  };
  struct AdaptNode {
    int64_t out_h, out_w;
    AdaptiveAvgPoolCache<T> cache;
  };
  struct DropNode {
    double p;
    DropoutCache<T> cache;
  };
  struct FlattenNode {
    Shape in_shape;
  };
  struct DenseNode {
    std::string name;
    Tensor<T> w, b;
    DenseCache<T> cache;
  };
  using Node = std::variant<ConvNode, BnNode, ReluNode, PoolNode, AdaptNode, DropNode, FlattenNode, DenseNode>;

  void build() {
    Rng root(seed_);
    int64_t cin = spec_.in_channels;
    bool flat = false;
    int conv_idx = 0, dense_idx = 0;
    for (size_t li = 0; li < spec_.layers.size(); ++li) {
      const LayerDesc& d = spec_.layers[li];
      const bool is_last = li + 1 == spec_.layers.size();
      switch (d.kind) {
        case LayerKind::conv: {
          ++conv_idx;
          ConvNode node;
          node.name = "conv" + std::to_string(conv_idx);
          Rng stream = root.child(rng_label::init, static_cast<uint64_t>(nodes_.size()));
          node.w = kaiming_uniform_init<T>({d.out_channels, cin, 3, 3}, cin * 9, stream);
          node.b = Tensor<T>({d.out_channels});
          nodes_.push_back(std::move(node));
          if (d.batchnorm)
            nodes_.push_back(BnNode{"bn" + std::to_string(conv_idx), BatchNormState<T>::make(d.out_channels), {}});
          nodes_.push_back(ReluNode{});
          if (d.conv_dropout > 0) nodes_.push_back(DropNode{d.conv_dropout, {}});
          cin = d.out_channels;
          break;
        }
        case LayerKind::maxpool:
          nodes_.push_back(PoolNode{});
          break;
        case LayerKind::adaptive_avgpool:
          nodes_.push_back(AdaptNode{d.out_h, d.out_w, {}});
          break;
        case LayerKind::dropout:
          nodes_.push_back(DropNode{d.p, {}});
          break;
        case LayerKind::dense: {
          const auto trace = trace_shapes(spec_);
          int64_t f_in;
          if (!flat) {
            // features entering the first dense layer = C*H*W before it
            if (li == 0)
              f_in = spec_.in_channels * spec_.in_h * spec_.in_w;
            else {
              const TraceEntry& prev = trace[li - 1];
              f_in = prev.flat ? prev.f : prev.c * prev.h * prev.w;
            }
            nodes_.push_back(FlattenNode{});
            flat = true;
          } else {
            f_in = trace[li - 1].f;
          }
          ++dense_idx;
          DenseNode node;
          node.name = "fc" + std::to_string(dense_idx);
          Rng stream = root.child(rng_label::init, static_cast<uint64_t>(nodes_.size()));
          node.w = kaiming_uniform_init<T>({f_in, d.out_features}, f_in, stream);
          node.b = Tensor<T>({d.out_features});
          nodes_.push_back(std::move(node));
          if (!is_last) nodes_.push_back(ReluNode{});
          break;
        }
      }
    }
  }

  ModelSpec spec_;
  uint64_t seed_{0};
  std::vector<Node> nodes_;
  bool has_cache_{false};
};

} // namespace scnn
