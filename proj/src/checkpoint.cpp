#include "tskd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "tskd/dataset.hpp"
#include "tskd/rng.hpp"

namespace tskd {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{bytes_[pos_ + i]} << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw TruncatedError(std::string("checkpoint truncated while reading ") + what + " (need " +
                           std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left)");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamSet<float>& tensors) {
  std::set<std::string> names;
  for (const auto& t : tensors) {
    if (t.name.empty()) throw ContractError("checkpoint tensor names must be non-empty");
    if (t.name.size() > 0xffff) throw ContractError("checkpoint tensor name too long: " + t.name.substr(0, 32));
    if (!names.insert(t.name).second) throw DuplicateNameError("duplicate checkpoint tensor name '" + t.name + "'");
    if (t.tensor.rank() > 0xff) throw ContractError("checkpoint tensor rank exceeds 255");
  }
  std::vector<std::uint8_t> out{'T', 'S', 'K', 'D'};
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.tensor.rank()));
    for (auto e : t.tensor.shape()) put_le<std::uint64_t>(out, e);
    for (float v : t.tensor.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ParamSet<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), "TSKD", 4) != 0) throw FormatError("not a checkpoint: bad magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = in.get<std::uint32_t>("tensor count");
  ParamSet<float> out;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint16_t>("name length");
    if (len == 0) throw FormatError("checkpoint tensor " + std::to_string(i) + " has an empty name");
    auto raw = in.take(len, "name");
    std::string name(raw.begin(), raw.end());
    if (!names.insert(name).second) throw DuplicateNameError("duplicate checkpoint tensor name '" + name + "'");
    const auto rank = in.get<std::uint8_t>("rank");
    if (rank == 0) throw FormatError("checkpoint tensor '" + name + "' has rank 0");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto e = in.get<std::uint64_t>("extent");
      if (e == 0) throw FormatError("checkpoint tensor '" + name + "' has a zero extent");
      if (e > in.remaining() / 4 || numel > in.remaining() / 4 / e) {
        throw TruncatedError("checkpoint tensor '" + name + "' announces more data than the file holds");
      }
      numel *= static_cast<std::size_t>(e);
      shape.push_back(static_cast<std::size_t>(e));
    }
    auto body = in.take(numel * 4, "tensor data");
    std::vector<float> values(numel);
    for (std::size_t j = 0; j < numel; ++j) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= std::uint32_t{body[j * 4 + static_cast<std::size_t>(b)]} << (8 * b);
      values[j] = std::bit_cast<float>(u);
    }
    out.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(values))});
  }
  if (in.remaining() != 0) {
    throw FormatError("checkpoint has " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return out;
}

void save_checkpoint(const ParamSet<float>& tensors, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(tensors);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

ParamSet<float> load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

std::uint64_t checkpoint_hash(const ParamSet<float>& tensors) {
  const auto bytes = encode_checkpoint(tensors);
  return fnv1a(bytes.data(), bytes.size());
}

}  // namespace tskd
