#pragma once

#include <cstdint>
#include <string>

#include "core/model_graph.hpp"

namespace scnn {

struct CheckpointMeta {
  int64_t epoch{0};
  double best_val_accuracy{0};
  uint64_t seed{0};
};

// Binary layout, little-endian throughout:
//   "SCNN" | u16 version | u32 metadata length | metadata JSON
//   | u32 tensor count | per tensor: u16 name length, name, u8 ndim,
//     u32 dims..., raw f32 data
// The metadata JSON echoes the model spec, the training metadata and the
// initialization scheme. Loading rebuilds the graph from the spec echo and
// fills every named tensor; the round trip reproduces eval-mode forward
// bit-exactly.
inline constexpr uint16_t kCheckpointVersion = 1;

void save_checkpoint(ModelGraph<float>& graph, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
  ModelGraph<float> graph;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace scnn
