#include "vitnerf/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vitnerf/core/errors.hpp"

namespace vitnerf {
namespace {

constexpr char kMagic[8] = {'V', 'I', 'T', 'N', 'E', 'R', 'F', '\0'};

template <typename U>
void put(std::vector<char>& out, U v) {
  static_assert(std::is_integral_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_str(std::vector<char>& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::vector<char>& b, std::string origin) : bytes_(b), origin_(std::move(origin)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw LoadError(origin_ + ": truncated checkpoint at byte " + std::to_string(pos_));
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> serialize_archive(const Archive& a) {
  if (a.element_bytes != 4 && a.element_bytes != 8)
    throw ArgumentError("checkpoint element width must be 4 or 8 bytes");
  std::vector<char> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, a.element_bytes);
  put<std::uint64_t>(out, a.step);
  put_str(out, a.rng_state);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.metadata.size()));
  for (const auto& [k, v] : a.metadata) {
    put_str(out, k);
    put_str(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.entries.size()));
  for (const auto& [name, e] : a.entries) {
    if (shape_numel(e.shape) != e.values.size())
      throw ShapeError("checkpoint entry '" + name + "' has " + std::to_string(e.values.size()) +
                       " values for shape " + shape_str(e.shape));
    put_str(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) put<std::uint64_t>(out, d);
    for (double v : e.values) {
      if (a.element_bytes == 4)
        put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      else
        put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

Archive deserialize_archive(const std::vector<char>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  r.need(8);
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw LoadError(origin + ": not a checkpoint file (bad magic)");
  for (int i = 0; i < 8; ++i) r.get<std::uint8_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw LoadError(origin + ": checkpoint format version " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion));
  Archive a;
  a.element_bytes = r.get<std::uint32_t>();
  if (a.element_bytes != 4 && a.element_bytes != 8)
    throw LoadError(origin + ": unsupported element width " + std::to_string(a.element_bytes));
  a.step = r.get<std::uint64_t>();
  a.rng_state = r.str();
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    a.metadata[k] = r.str();
  }
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    ArchiveEntry e;
    const std::string name = r.str();
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.get<std::uint64_t>());
    const std::size_t count = shape_numel(e.shape);
    r.need(count * a.element_bytes);
    e.values.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
      if (a.element_bytes == 4)
        e.values[j] = std::bit_cast<float>(r.get<std::uint32_t>());
      else
        e.values[j] = std::bit_cast<double>(r.get<std::uint64_t>());
    }
    if (!a.entries.emplace(name, std::move(e)).second)
      throw LoadError(origin + ": duplicate entry '" + name + "'");
  }
  if (!r.done()) throw LoadError(origin + ": trailing bytes after last entry");
  return a;
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  const auto bytes = serialize_archive(archive);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw LoadError("failed writing '" + path.string() + "'");
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_archive(bytes, path.string());
}

}  // namespace vitnerf
