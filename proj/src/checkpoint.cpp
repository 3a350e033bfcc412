#include "vrsa/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "text_util.hpp"
#include "vrsa/errors.hpp"

namespace vrsa {
namespace {

static_assert(std::endian::native == std::endian::little,
              "VRSK I/O assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n, "tensor name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void get_doubles(std::vector<double>& out, std::size_t n) {
    need(n * sizeof(double), "tensor payload");
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("truncated checkpoint: ") + what + " at offset " +
                            std::to_string(pos_) + " needs " + std::to_string(n) + " bytes, " +
                            std::to_string(bytes_.size() - pos_) + " left");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_header(std::vector<std::uint8_t>& out, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + name.substr(0, 32));
  if (t.dims.size() > 0xFF) throw CheckpointError("tensor '" + name + "' has too many dimensions");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put<std::uint32_t>(out, d);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ParamSet& params) {
  std::vector<std::uint8_t> out = {'V', 'R', 'S', 'K'};
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    if (t.data.size() != t.element_count()) {
      throw CheckpointError("tensor '" + name + "' payload does not match its dims");
    }
    put_header(out, name, t);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.data.size() * sizeof(double));
  }
  return out;
}

ParamSet parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "VRSK", 4) != 0) {
    throw CheckpointError("bad checkpoint magic at offset 0 (expected \"VRSK\")");
  }
  Reader r(bytes, 4);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version mismatch: file has version " + std::to_string(version) +
                          ", reader supports " + std::to_string(kCheckpointVersion));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  ParamSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    auto name = r.get_string(name_len);
    Tensor t;
    const auto rank = r.get<std::uint8_t>("rank");
    for (std::uint8_t d = 0; d < rank; ++d) t.dims.push_back(r.get<std::uint32_t>("dims"));
    r.get_doubles(t.data, t.element_count());
    if (!params.emplace(name, std::move(t)).second) {
      throw CheckpointError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (!r.done()) {
    throw CheckpointError("trailing bytes after last tensor at offset " +
                          std::to_string(r.offset()));
  }
  return params;
}

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(params);
  detail::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(detail::read_binary_file(path));
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string checkpoint_digest(const ParamSet& params) {
  return fnv1a_hex(serialize_checkpoint(params));
}

}  // namespace vrsa
