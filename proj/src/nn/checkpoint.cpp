#include "gfm/nn/checkpoint.hpp"

#include <cstring>

#include "gfm/common/binary_io.hpp"

namespace gfm::nn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "gfm-ckpt";
constexpr int kVersion = 1;

void append(std::vector<std::byte>& out, const Tensor<float>& t) {
  const auto* p = reinterpret_cast<const std::byte*>(t.data());
  out.insert(out.end(), p, p + t.size() * sizeof(float));
}

Tensor<float> slice(std::span<const std::byte> bin, std::size_t offset, const Shape& shape) {
  const std::size_t n = shape_count(shape);
  if ((offset + n) * sizeof(float) > bin.size()) {
    throw CorruptionError("checkpoint: ckpt.bin is shorter than ckpt.json declares");
  }
  std::vector<float> values(n);
  std::memcpy(values.data(), bin.data() + offset * sizeof(float), n * sizeof(float));
  return Tensor<float>(shape, std::move(values));
}

void write_atomic(const fs::path& path, std::span<const std::byte> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  fs::rename(tmp, path);
}

}  // namespace

void save_checkpoint(const ParamStore<float>& params, const fs::path& dir,
                     const nlohmann::json& meta, bool optimizer_state) {
  fs::create_directories(dir);
  std::vector<std::byte> bin;
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, p] : params.entries()) {
    const bool moments = optimizer_state && p.m.shape() == p.value.shape() && !p.value.empty();
    tensors.push_back({{"name", name},
                       {"shape", p.value.shape()},
                       {"offset", offset},
                       {"step", p.step},
                       {"moments", moments}});
    append(bin, p.value);
    offset += p.value.size();
    if (moments) {
      append(bin, p.m);
      append(bin, p.v);
      offset += 2 * p.value.size();
    }
  }
  nlohmann::json doc = {{"format", kFormat},
                        {"version", kVersion},
                        {"dtype", "<f4"},
                        {"tensors", tensors},
                        {"meta", meta}};
  write_atomic(dir / "ckpt.bin", bin);
  const std::string text = doc.dump(2) + "\n";
  write_atomic(dir / "ckpt.json",
               std::span(reinterpret_cast<const std::byte*>(text.data()), text.size()));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "ckpt.json")) throw IoError("checkpoint not found: " + dir.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(dir / "ckpt.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: ckpt.json is not valid JSON: " + std::string(e.what()));
  }
  if (doc.value("format", "") != kFormat || doc.value("version", 0) != kVersion) {
    throw FormatError("checkpoint: unsupported format in " + dir.string());
  }
  const auto bin = read_file(dir / "ckpt.bin");
  Checkpoint ckpt;
  ckpt.meta = doc.value("meta", nlohmann::json::object());
  std::size_t expected = 0;
  try {
    for (const auto& t : doc.at("tensors")) {
      CheckpointEntry e;
      const auto shape = t.at("shape").get<Shape>();
      std::size_t offset = t.at("offset").get<std::size_t>();
      const std::size_t n = shape_count(shape);
      e.value = slice(bin, offset, shape);
      e.step = t.value("step", std::uint64_t{0});
      std::size_t used = n;
      if (t.value("moments", false)) {
        e.m = slice(bin, offset + n, shape);
        e.v = slice(bin, offset + 2 * n, shape);
        used = 3 * n;
      }
      expected = std::max(expected, offset + used);
      ckpt.entries.emplace(t.at("name").get<std::string>(), std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: malformed tensor table: " + std::string(e.what()));
  }
  if (expected * sizeof(float) != bin.size()) {
    throw CorruptionError("checkpoint: ckpt.bin has " + std::to_string(bin.size()) +
                          " bytes, expected " + std::to_string(expected * sizeof(float)));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParamStore<float>& params,
                      const std::function<bool(const std::string&)>& select,
                      bool optimizer_state) {
  std::size_t applied = 0;
  for (auto& [name, p] : params.entries()) {
    if (select && !select(name)) continue;
    auto it = ckpt.entries.find(name);
    if (it == ckpt.entries.end()) {
      throw CompatibilityError("checkpoint has no parameter " + name);
    }
    if (it->second.value.shape() != p.value.shape()) {
      throw CompatibilityError("parameter " + name + ": checkpoint shape " +
                               shape_str(it->second.value.shape()) + " vs model shape " +
                               shape_str(p.value.shape()));
    }
    p.value = it->second.value;
    if (optimizer_state && !it->second.m.empty()) {
      p.m = it->second.m;
      p.v = it->second.v;
      p.step = it->second.step;
    }
    ++applied;
  }
  if (applied == 0) throw CompatibilityError("checkpoint: no parameters selected");
}

}  // namespace gfm::nn
