#include "rfdn/weight_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace rfdn {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError("truncated weight file");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint16_t>(
                           static_cast<std::uint8_t>(buf[pos + 1]))
                       << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_weight_file(const WeightStore& store, const std::string& path) {
  std::string out;
  out += "RFDW";
  put_u32(out, kWeightFileVersion);
  if (store.size() > std::numeric_limits<std::uint32_t>::max())
    throw FormatError("too many tensors");
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store) {  // map iterates lexicographically
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw FormatError("tensor name too long: " + name);
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(4);  // rank
    put_u32(out, static_cast<std::uint32_t>(t.n()));
    put_u32(out, static_cast<std::uint32_t>(t.c()));
    put_u32(out, static_cast<std::uint32_t>(t.h()));
    put_u32(out, static_cast<std::uint32_t>(t.w()));
    for (index_t i = 0; i < t.numel(); ++i) put_f32(out, t[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

WeightStore read_weight_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Reader r{buf};
  if (r.bytes(4) != "RFDW")
    throw FormatError("bad magic bytes in '" + path + "'");
  const std::uint32_t version = r.u32();
  if (version != kWeightFileVersion)
    throw FormatError("unsupported weight file version " +
                      std::to_string(version));
  const std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.bytes(name_len);
    const std::uint8_t rank = r.u8();
    if (rank != 4)
      throw FormatError("unsupported tensor rank " + std::to_string(rank) +
                        " for " + name);
    Shape s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    Tensor<float> t(s);
    for (index_t j = 0; j < t.numel(); ++j) t[j] = r.f32();
    if (!store.emplace(std::move(name), std::move(t)).second)
      throw FormatError("duplicate tensor name in '" + path + "'");
  }
  if (r.pos != buf.size())
    throw FormatError("trailing bytes in '" + path + "'");
  return store;
}

}  // namespace rfdn
