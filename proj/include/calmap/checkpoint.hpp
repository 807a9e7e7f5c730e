#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "calmap/errors.hpp"

namespace calmap {

// Checkpoint container: "CALCKPT1\n", a little-endian u64 header length, a JSON
// header (metadata plus a tensor directory of name/dtype/shape/offset/bytes),
// then the raw tensor payload in directory order. Writing the same state twice
// produces identical bytes; no timestamps or other volatile fields are stored.

namespace detail {

inline const char* dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    case torch::kInt32: return "i32";
    case torch::kUInt8: return "u8";
    default: throw std::invalid_argument("checkpoint: unsupported tensor dtype");
  }
}

inline torch::ScalarType dtype_from_name(const std::string& name) {
  if (name == "f32") return torch::kFloat32;
  if (name == "f64") return torch::kFloat64;
  if (name == "i64") return torch::kInt64;
  if (name == "i32") return torch::kInt32;
  if (name == "u8") return torch::kUInt8;
  throw ParseError("checkpoint: unknown dtype '" + name + "'");
}

}  // namespace detail

class ArchiveWriter {
 public:
  nlohmann::ordered_json& meta() { return meta_; }

  void add_tensor(const std::string& name, const torch::Tensor& tensor) {
    torch::Tensor t = tensor.detach().to(torch::kCPU).contiguous();
    Entry entry;
    entry.name = name;
    entry.dtype = detail::dtype_name(t.scalar_type());
    for (std::int64_t d : t.sizes()) entry.shape.push_back(d);
    entry.bytes.resize(t.numel() * t.element_size());
    std::memcpy(entry.bytes.data(), t.data_ptr(), entry.bytes.size());
    entries_.push_back(std::move(entry));
  }

  void write(const std::filesystem::path& path) const {
    nlohmann::ordered_json header = meta_;
    header["format"] = "CALCKPT1";
    nlohmann::ordered_json directory = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (const Entry& e : entries_) {
      nlohmann::ordered_json d;
      d["name"] = e.name;
      d["dtype"] = e.dtype;
      d["shape"] = e.shape;
      d["offset"] = offset;
      d["bytes"] = e.bytes.size();
      directory.push_back(std::move(d));
      offset += e.bytes.size();
    }
    header["tensors"] = std::move(directory);
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("ArchiveWriter: cannot open " + path.string());
    out << "CALCKPT1\n";
    std::uint64_t len = header_str.size();
    char len_le[8];
    for (int i = 0; i < 8; ++i) len_le[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(len_le, 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const Entry& e : entries_) {
      out.write(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()));
    }
    if (!out) throw std::runtime_error("ArchiveWriter: write failed for " + path.string());
  }

 private:
  struct Entry {
    std::string name;
    std::string dtype;
    std::vector<std::int64_t> shape;
    std::vector<char> bytes;
  };
  nlohmann::ordered_json meta_ = nlohmann::ordered_json::object();
  std::vector<Entry> entries_;
};

class Archive {
 public:
  static Archive read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("Archive: cannot open " + path.string());
    std::string magic(9, '\0');
    in.read(magic.data(), 9);
    if (in.gcount() != 9 || magic != "CALCKPT1\n") {
      throw ParseError("Archive: bad magic in " + path.string());
    }
    char len_le[8];
    in.read(len_le, 8);
    if (in.gcount() != 8) throw ParseError("Archive: truncated header length in " + path.string());
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) {
      len |= static_cast<std::uint64_t>(static_cast<unsigned char>(len_le[i])) << (8 * i);
    }
    if (len > (1ULL << 30)) throw ParseError("Archive: implausible header size in " + path.string());
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(in.gcount()) != len) {
      throw ParseError("Archive: truncated header in " + path.string());
    }

    Archive archive;
    try {
      archive.meta_ = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("Archive: bad header JSON in " + path.string() + ": " + e.what());
    }
    if (archive.meta_.value("format", std::string{}) != "CALCKPT1") {
      throw ParseError("Archive: not a CALCKPT1 file: " + path.string());
    }
    for (const auto& d : archive.meta_.value("tensors", nlohmann::json::array())) {
      const std::string name = d.at("name").get<std::string>();
      const torch::ScalarType dtype = detail::dtype_from_name(d.at("dtype").get<std::string>());
      std::vector<std::int64_t> shape = d.at("shape").get<std::vector<std::int64_t>>();
      const std::uint64_t bytes = d.at("bytes").get<std::uint64_t>();
      torch::Tensor t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
      if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != bytes) {
        throw ParseError("Archive: byte count mismatch for tensor '" + name + "'");
      }
      in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
      if (static_cast<std::uint64_t>(in.gcount()) != bytes) {
        throw ParseError("Archive: truncated payload for tensor '" + name + "'");
      }
      archive.tensors_.emplace(name, std::move(t));
    }
    return archive;
  }

  const nlohmann::json& meta() const { return meta_; }

  bool has_tensor(const std::string& name) const { return tensors_.count(name) != 0; }

  torch::Tensor tensor(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ParseError("Archive: missing tensor '" + name + "'");
    return it->second;
  }

 private:
  nlohmann::json meta_;
  std::map<std::string, torch::Tensor> tensors_;
};

inline void write_module_tensors(ArchiveWriter& writer, const std::string& prefix,
                                 const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters()) {
    writer.add_tensor(prefix + "/" + p.key(), p.value());
  }
  for (const auto& b : module.named_buffers()) {
    writer.add_tensor(prefix + "/" + b.key(), b.value());
  }
}

inline void read_module_tensors(const Archive& archive, const std::string& prefix,
                                torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto p : module.named_parameters()) {
    torch::Tensor stored = archive.tensor(prefix + "/" + p.key());
    if (stored.sizes() != p.value().sizes()) {
      throw ShapeMismatch("checkpoint: tensor '" + prefix + "/" + p.key() + "' has shape " +
                          c10::str(stored.sizes()) + ", expected " + c10::str(p.value().sizes()));
    }
    p.value().copy_(stored);
  }
  for (auto b : module.named_buffers()) {
    torch::Tensor stored = archive.tensor(prefix + "/" + b.key());
    if (stored.sizes() != b.value().sizes()) {
      throw ShapeMismatch("checkpoint: buffer '" + prefix + "/" + b.key() + "' has shape " +
                          c10::str(stored.sizes()) + ", expected " + c10::str(b.value().sizes()));
    }
    b.value().copy_(stored);
  }
}

/// FNV-1a over the raw bytes of all parameters and buffers, in registration
/// order. Used to verify a module was left untouched.
inline std::uint64_t parameter_fingerprint(const torch::nn::Module& module) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const torch::Tensor& t) {
    torch::Tensor c = t.detach().to(torch::kCPU).contiguous();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const std::size_t n = c.numel() * c.element_size();
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : module.named_parameters()) mix(p.value());
  for (const auto& b : module.named_buffers()) mix(b.value());
  return h;
}

}  // namespace calmap
