#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/augment.hpp"
#include "core/image.hpp"
#include "core/tensor.hpp"

namespace scnn {

enum class Split { train, valid };

// The eleven preparation-state classes; label = index in this table.
const std::array<std::string, 11>& class_names();
int class_index(const std::string& name); // -1 when unknown

struct ManifestRecord {
  std::string path;
  int label{0};
  Split split{Split::train};
};

struct Manifest {
  std::string root;
  std::vector<ManifestRecord> records;
  std::vector<std::string> warnings; // e.g. empty class directories

  std::vector<int64_t> split_indices(Split split) const;
  int64_t count(Split split) const;
  int64_t count(Split split, int label) const;
  std::string summary() const;
};

// Expects <root>/{train,valid}/<class>/<file>.{png,jpg,jpeg}. Unknown class
// directories are an error naming the offender; empty class directories
// produce a warning in the manifest.
Manifest scan_dataset(const std::string& root);

struct ChannelStats {
  std::array<double, 3> mean{0, 0, 0};
  std::array<double, 3> std{1, 1, 1};
};

// Per-channel mean and population standard deviation over all post-resize/
// crop pixels of the given split, in manifest order.
ChannelStats compute_stats(const Manifest& manifest, Split split);

std::string stats_to_json(const ChannelStats& stats);
ChannelStats stats_from_json(const std::string& text);

// (img - mean) / std per channel, interleaved -> channel-major 3x224x224.
Tensor<float> normalize(const Image& img, const ChannelStats& stats);

struct SampleBatch {
  Tensor<float> x; // N x 3 x H x W
  std::vector<int64_t> labels;
  std::vector<int64_t> indices; // manifest indices, for provenance
};

// Deterministic batching: the epoch's permutation comes from (seed, shuffle,
// epoch); each sample's augmentation stream from (seed, augment, epoch,
// manifest index). The trailing short batch is kept. Samples inside a batch
// are decoded/augmented on a worker pool; each sample writes only its own
// slice, so results do not depend on the worker count.
class Batcher {
public:
  Batcher(const Manifest& manifest, Split split, int64_t batch_size, bool shuffle, uint64_t seed,
          int64_t epoch, const ChannelStats& stats, const AugConfig* aug /* null = eval pipeline */);

  int64_t batch_count() const { return static_cast<int64_t>(batches_.size()); }
  int64_t sample_count() const { return static_cast<int64_t>(order_.size()); }
  SampleBatch load(int64_t batch_index) const;

private:
  const Manifest& manifest_;
  uint64_t seed_;
  int64_t epoch_;
  ChannelStats stats_;
  const AugConfig* aug_;
  std::vector<int64_t> order_;
  std::vector<std::pair<int64_t, int64_t>> batches_; // [begin, end) into order_
};

// Full per-sample pipeline: decode, resize/crop, augment (train only),
// normalize. Exposed for the determinism tests.
Tensor<float> load_sample(const std::string& path, const ChannelStats& stats, const AugConfig* aug,
                          uint64_t seed, int64_t epoch, int64_t manifest_index);

} // namespace scnn
