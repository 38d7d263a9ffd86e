#include "core/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "core/error.hpp"
#include "core/io.hpp"
#include "core/parallel.hpp"

namespace scnn {

namespace fs = std::filesystem;
using nlohmann::json;

const std::array<std::string, 11>& class_names() {
  static const std::array<std::string, 11> names = {"creamy_paste", "diced",  "floured", "grated",
                                                    "juiced",       "julienne", "mixed",   "other",
                                                    "peeled",       "sliced",  "whole"};
  return names;
}

int class_index(const std::string& name) {
  const auto& names = class_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<int64_t> Manifest::split_indices(Split split) const {
  std::vector<int64_t> out;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(static_cast<int64_t>(i));
  return out;
}

int64_t Manifest::count(Split split) const { return static_cast<int64_t>(split_indices(split).size()); }

int64_t Manifest::count(Split split, int label) const {
  int64_t n = 0;
  for (const ManifestRecord& r : records)
    if (r.split == split && r.label == label) ++n;
  return n;
}

std::string Manifest::summary() const {
  std::ostringstream os;
  os << "train " << count(Split::train) << " / valid " << count(Split::valid) << "\n";
  for (size_t i = 0; i < class_names().size(); ++i)
    os << "  " << class_names()[i] << ": train " << count(Split::train, static_cast<int>(i)) << ", valid "
       << count(Split::valid, static_cast<int>(i)) << "\n";
  for (const std::string& w : warnings) os << "  warning: " << w << "\n";
  return os.str();
}

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

} // namespace

Manifest scan_dataset(const std::string& root) {
  if (!fs::is_directory(root)) raise(ErrorCode::data, "dataset root '" + root + "' is not a directory");
  Manifest manifest;
  manifest.root = root;
  for (const auto& [split, split_name] : {std::pair{Split::train, "train"}, {Split::valid, "valid"}}) {
    const fs::path split_dir = fs::path(root) / split_name;
    if (!fs::is_directory(split_dir))
      raise(ErrorCode::data, "dataset root '" + root + "' is missing the '" + split_name + "' directory");
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(split_dir))
      if (entry.is_directory()) class_dirs.push_back(entry.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const fs::path& dir : class_dirs) {
      const std::string cname = dir.filename().string();
      const int label = class_index(cname);
      if (label < 0)
        raise(ErrorCode::data, "unknown class directory '" + cname + "' under " +
                                   (fs::path(root) / split_name).string());
      std::vector<std::string> files;
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_extension(entry.path()))
          files.push_back(entry.path().string());
      std::sort(files.begin(), files.end());
      if (files.empty())
        manifest.warnings.push_back("class '" + cname + "' in split '" + std::string(split_name) +
                                    "' has no images");
      for (std::string& f : files) manifest.records.push_back({std::move(f), label, split});
    }
  }
  // files are unique by construction (one path visit each); keep the
  // invariant checked anyway
  std::vector<std::string> paths;
  paths.reserve(manifest.records.size());
  for (const auto& r : manifest.records) paths.push_back(r.path);
  std::sort(paths.begin(), paths.end());
  if (std::adjacent_find(paths.begin(), paths.end()) != paths.end())
    raise(ErrorCode::data, "dataset scan produced duplicate paths");
  return manifest;
}

ChannelStats compute_stats(const Manifest& manifest, Split split) {
  const std::vector<int64_t> idx = manifest.split_indices(split);
  if (idx.empty()) raise(ErrorCode::data, "compute_stats: split has no images");
  std::array<double, 3> sum{0, 0, 0}, sumsq{0, 0, 0};
  int64_t pixels = 0;
  for (int64_t i : idx) {
    const Image img = resize_center_crop(decode_image_file(manifest.records[static_cast<size_t>(i)].path));
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          const double v = img.at(y, x, c);
          sum[static_cast<size_t>(c)] += v;
          sumsq[static_cast<size_t>(c)] += v * v;
        }
    pixels += img.height * img.width;
  }
  ChannelStats stats;
  for (size_t c = 0; c < 3; ++c) {
    const double mean = sum[c] / static_cast<double>(pixels);
    const double var = std::max(0.0, sumsq[c] / static_cast<double>(pixels) - mean * mean);
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(var);
  }
  return stats;
}

std::string stats_to_json(const ChannelStats& stats) {
  json j;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  return j.dump(2);
}

ChannelStats stats_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("mean") || !j.contains("std"))
    raise(ErrorCode::config, "stats document must be an object with 'mean' and 'std' arrays");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "mean" && it.key() != "std")
      raise(ErrorCode::config, "stats document: unknown key '" + it.key() + "'");
  ChannelStats stats;
  if (!j["mean"].is_array() || j["mean"].size() != 3 || !j["std"].is_array() || j["std"].size() != 3)
    raise(ErrorCode::config, "stats document: 'mean' and 'std' must have 3 entries");
  for (size_t c = 0; c < 3; ++c) {
    stats.mean[c] = j["mean"][c].get<double>();
    stats.std[c] = j["std"][c].get<double>();
  }
  return stats;
}

Tensor<float> normalize(const Image& img, const ChannelStats& stats) {
  for (size_t c = 0; c < 3; ++c)
    if (!(stats.std[c] > 0))
      raise(ErrorCode::config,
            "normalize: channel " + std::to_string(c) +
                " has zero standard deviation; override the stats (constant training data?)");
  Tensor<float> out({3, img.height, img.width});
  for (int64_t c = 0; c < 3; ++c) {
    const float mean = static_cast<float>(stats.mean[static_cast<size_t>(c)]);
    const float inv = static_cast<float>(1.0 / stats.std[static_cast<size_t>(c)]);
    float* plane = out.data() + c * img.height * img.width;
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) plane[y * img.width + x] = (img.at(y, x, c) - mean) * inv;
  }
  return out;
}

Tensor<float> load_sample(const std::string& path, const ChannelStats& stats, const AugConfig* aug,
                          uint64_t seed, int64_t epoch, int64_t manifest_index) {
  Image img = resize_center_crop(decode_image_file(path));
  if (aug) {
    Rng stream = Rng(seed).child(rng_label::augment, static_cast<uint64_t>(epoch),
                                 static_cast<uint64_t>(manifest_index));
    img = augment(img, *aug, stream);
  }
  return normalize(img, stats);
}

Batcher::Batcher(const Manifest& manifest, Split split, int64_t batch_size, bool shuffle, uint64_t seed,
                 int64_t epoch, const ChannelStats& stats, const AugConfig* aug)
    : manifest_(manifest), seed_(seed), epoch_(epoch), stats_(stats), aug_(aug) {
  if (batch_size < 1) raise(ErrorCode::config, "batch size must be >= 1");
  order_ = manifest.split_indices(split);
  if (shuffle) {
    Rng rng = Rng(seed).child(rng_label::shuffle, static_cast<uint64_t>(epoch));
    for (int64_t i = static_cast<int64_t>(order_.size()) - 1; i > 0; --i) {
      const int64_t j = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(i + 1)));
      std::swap(order_[static_cast<size_t>(i)], order_[static_cast<size_t>(j)]);
    }
  }
  for (int64_t begin = 0; begin < static_cast<int64_t>(order_.size()); begin += batch_size)
    batches_.emplace_back(begin, std::min<int64_t>(begin + batch_size, static_cast<int64_t>(order_.size())));
}

SampleBatch Batcher::load(int64_t batch_index) const {
  if (batch_index < 0 || batch_index >= batch_count())
    raise(ErrorCode::state, "batch index out of range");
  const auto [begin, end] = batches_[static_cast<size_t>(batch_index)];
  const int64_t n = end - begin;
  SampleBatch batch;
  batch.labels.resize(static_cast<size_t>(n));
  batch.indices.resize(static_cast<size_t>(n));

  // Probe the first sample for the spatial size, then fill slices in parallel.
  const int64_t first_idx = order_[static_cast<size_t>(begin)];
  Tensor<float> first = load_sample(manifest_.records[static_cast<size_t>(first_idx)].path, stats_, aug_,
                                    seed_, epoch_, first_idx);
  const int64_t h = first.dim(1), w = first.dim(2);
  batch.x = Tensor<float>({n, 3, h, w});
  std::copy(first.data(), first.data() + first.numel(), batch.x.data());
  batch.labels[0] = manifest_.records[static_cast<size_t>(first_idx)].label;
  batch.indices[0] = first_idx;

  parallel_for(n - 1, [&](int64_t k) {
    const int64_t pos = begin + 1 + k;
    const int64_t mi = order_[static_cast<size_t>(pos)];
    const ManifestRecord& rec = manifest_.records[static_cast<size_t>(mi)];
    Tensor<float> sample = load_sample(rec.path, stats_, aug_, seed_, epoch_, mi);
    if (sample.dim(1) != h || sample.dim(2) != w)
      raise(ErrorCode::shape, "batch: sample spatial sizes disagree");
    std::copy(sample.data(), sample.data() + sample.numel(),
              batch.x.data() + (k + 1) * sample.numel());
    batch.labels[static_cast<size_t>(k + 1)] = rec.label;
    batch.indices[static_cast<size_t>(k + 1)] = mi;
  });
  return batch;
}

} // namespace scnn
