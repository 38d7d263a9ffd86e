#include "core/checkpoint.hpp"

#include <cstring>
#include <json.hpp>

#include "core/io.hpp"

namespace scnn {

using nlohmann::json;

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
public:
  Reader(const std::vector<uint8_t>& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  size_t offset() const { return pos_; }

  const uint8_t* take(size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      raise(ErrorCode::format, "checkpoint '" + path_ + "': truncated while reading " + what +
                                   " at offset " + std::to_string(pos_));
    const uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  uint16_t u16(const char* what) {
    const uint8_t* p = take(2, what);
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
  }

  uint32_t u32(const char* what) {
    const uint8_t* p = take(4, what);
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }

  bool at_end() const { return pos_ == bytes_.size(); }

private:
  const std::vector<uint8_t>& bytes_;
  std::string path_;
  size_t pos_{0};
};

} // namespace

void save_checkpoint(ModelGraph<float>& graph, const CheckpointMeta& meta, const std::string& path) {
  json mj;
  mj["spec"] = json::parse(spec_to_json(graph.spec()));
  mj["epoch"] = meta.epoch;
  mj["best_val_accuracy"] = meta.best_val_accuracy;
  mj["seed"] = meta.seed;
  mj["init"] = "kaiming-uniform";
  const std::string meta_text = mj.dump();

  std::vector<uint8_t> out;
  out.insert(out.end(), {'S', 'C', 'N', 'N'});
  put_u16(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(meta_text.size()));
  out.insert(out.end(), meta_text.begin(), meta_text.end());

  auto tensors = graph.state_tensors();
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& entry : tensors) {
    put_u16(out, static_cast<uint16_t>(entry.name.size()));
    out.insert(out.end(), entry.name.begin(), entry.name.end());
    out.push_back(static_cast<uint8_t>(entry.tensor->ndim()));
    for (int64_t d : entry.tensor->shape()) put_u32(out, static_cast<uint32_t>(d));
    for (int64_t i = 0; i < entry.tensor->numel(); ++i) put_f32(out, (*entry.tensor)[i]);
  }
  write_binary_file_atomic(path, out.data(), out.size());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::vector<uint8_t> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const Error& e) {
    raise(ErrorCode::format, e.what());
  }
  Reader r(bytes, path);

  const uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, "SCNN", 4) != 0)
    raise(ErrorCode::format, "checkpoint '" + path + "': bad magic at offset 0");
  const uint16_t version = r.u16("version");
  if (version != kCheckpointVersion)
    raise(ErrorCode::format, "checkpoint '" + path + "': unsupported version " + std::to_string(version) +
                                 " (expected " + std::to_string(kCheckpointVersion) + ")");

  const uint32_t meta_len = r.u32("metadata length");
  const uint8_t* meta_bytes = r.take(meta_len, "metadata");
  json mj = json::parse(meta_bytes, meta_bytes + meta_len, nullptr, false);
  if (mj.is_discarded() || !mj.is_object() || !mj.contains("spec"))
    raise(ErrorCode::format, "checkpoint '" + path + "': malformed metadata block");

  CheckpointMeta meta;
  meta.epoch = mj.value("epoch", int64_t{0});
  meta.best_val_accuracy = mj.value("best_val_accuracy", 0.0);
  meta.seed = mj.value("seed", uint64_t{0});

  ModelSpec spec;
  try {
    spec = spec_from_json(mj["spec"].dump());
  } catch (const Error& e) {
    raise(ErrorCode::format, "checkpoint '" + path + "': invalid spec echo: " + e.what());
  }
  ModelGraph<float> graph(spec, meta.seed);

  auto tensors = graph.state_tensors();
  const uint32_t count = r.u32("tensor count");
  if (count != tensors.size())
    raise(ErrorCode::format, "checkpoint '" + path + "': carries " + std::to_string(count) +
                                 " tensors, the spec needs " + std::to_string(tensors.size()));
  for (uint32_t ti = 0; ti < count; ++ti) {
    const uint16_t name_len = r.u16("tensor name length");
    const uint8_t* name_bytes = r.take(name_len, "tensor name");
    const std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    if (name != tensors[ti].name)
      raise(ErrorCode::format, "checkpoint '" + path + "': tensor " + std::to_string(ti) + " is named '" +
                                   name + "', expected '" + tensors[ti].name + "'");
    const uint8_t ndim = *r.take(1, "tensor rank");
    Shape shape;
    for (uint8_t d = 0; d < ndim; ++d) shape.push_back(r.u32("tensor dimension"));
    if (shape != tensors[ti].tensor->shape())
      raise(ErrorCode::format,
            "checkpoint '" + path + "': tensor '" + name + "' has shape " + shape_str(shape) +
                ", expected " + shape_str(tensors[ti].tensor->shape()));
    const int64_t numel = tensors[ti].tensor->numel();
    const uint8_t* data = r.take(static_cast<size_t>(numel) * 4, "tensor data");
    for (int64_t i = 0; i < numel; ++i) {
      uint32_t bits = static_cast<uint32_t>(data[4 * i]) | (static_cast<uint32_t>(data[4 * i + 1]) << 8) |
                      (static_cast<uint32_t>(data[4 * i + 2]) << 16) |
                      (static_cast<uint32_t>(data[4 * i + 3]) << 24);
      float v;
      std::memcpy(&v, &bits, 4);
      (*tensors[ti].tensor)[i] = v;
    }
  }
  if (!r.at_end())
    raise(ErrorCode::format, "checkpoint '" + path + "': " +
                                 std::to_string(bytes.size() - r.offset()) + " trailing bytes at offset " +
                                 std::to_string(r.offset()));
  return {std::move(graph), meta};
}

} // namespace scnn
