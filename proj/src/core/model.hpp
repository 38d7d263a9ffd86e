#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/tensor.hpp"

namespace scnn {

enum class LayerKind { conv, maxpool, adaptive_avgpool, dropout, dense };

// One layer descriptor. A conv entry expands to conv -> (batchnorm) -> relu
// -> (dropout); a dense entry that is not the final layer gets a ReLU after
// it. maxpool is always the 2x2/stride-2 pool.
struct LayerDesc {
  LayerKind kind{LayerKind::conv};
  int64_t out_channels{0}; // conv
  bool batchnorm{false};   // conv
  double conv_dropout{0};  // conv; 0 means none
  int64_t out_h{0}, out_w{0}; // adaptive_avgpool
  double p{0};                // dropout
  int64_t out_features{0};    // dense

  static LayerDesc Conv(int64_t oc, bool bn, double drop = 0);
  static LayerDesc MaxPool();
  static LayerDesc AdaptiveAvgPool(int64_t h, int64_t w);
  static LayerDesc Dropout(double p);
  static LayerDesc Dense(int64_t out);
};

struct ModelSpec {
  int64_t in_channels{3}, in_h{224}, in_w{224};
  int64_t classes{11};
  std::vector<LayerDesc> layers;
};

// Shape of the value flowing between layers: spatial (C,H,W) until the first
// dense layer flattens it to F features.
struct TraceEntry {
  size_t layer{0};
  LayerKind kind{LayerKind::conv};
  bool flat{false};
  int64_t c{0}, h{0}, w{0}; // when !flat
  int64_t f{0};             // when flat
};

// Validates the spec invariants and layer-to-layer shape compatibility;
// throws a shape/config error naming the offending layer otherwise.
std::vector<TraceEntry> trace_shapes(const ModelSpec& spec);

void validate_spec(const ModelSpec& spec);

// conv (9*Cin + 1)*Cout, batchnorm 2*C, dense (F + 1)*C; pooling and dropout
// carry no parameters.
int64_t count_params(const ModelSpec& spec);

struct ParamCount {
  std::string name;
  int64_t count{0};
};
std::vector<ParamCount> param_breakdown(const ModelSpec& spec);

// The six-conv architecture: channels [16,32,32,64,128,128], each conv with
// optional batch-norm + ReLU + 2x2 maxpool, dropout 0.2 after blocks 2, 4
// and 6, adaptive average pool, dropout 0.2, dense to 11 classes.
ModelSpec preset_proposed(int64_t pool_h = 5, int64_t pool_w = 5, bool with_batchnorm = true,
                          bool conv_dropout = true);

// Standard VGG16 (13 conv, 5 pool, 3 dense, 1000 classes). Constructible and
// countable; not meant to be trained here.
ModelSpec preset_vgg16();

// Two-conv miniature with the same block structure as the proposed net,
// sized for f64 finite-difference verification (3x8x8 input, 2 classes).
ModelSpec preset_proposed_tiny();

// Known preset names -> spec. pool/batchnorm/dropout options apply to the
// "proposed" preset only.
ModelSpec preset_by_name(const std::string& name, int64_t pool_h = 5, int64_t pool_w = 5,
                         bool with_batchnorm = true, bool conv_dropout = true);

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

} // namespace scnn
