#include "t3ar/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace t3ar {
namespace {

constexpr char kMagic[4] = {'T', '3', 'A', 'R'};

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error("truncated T3AR file");
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  void magic() {
    need(4);
    if (std::memcmp(in_.data() + pos_, kMagic, 4) != 0) throw Error("bad magic: not a T3AR file");
    pos_ += 4;
  }
  void finish() const {
    if (pos_ != in_.size()) throw Error("trailing bytes after T3AR payload");
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_layer(ByteWriter& w, const Linear<float>& layer) {
  w.uint(static_cast<std::uint32_t>(layer.out_dim()));
  w.uint(static_cast<std::uint32_t>(layer.in_dim()));
  for (float v : layer.weight.values()) w.f32(v);
  for (float v : layer.bias) w.f32(v);
}

Linear<float> read_layer(ByteReader& r) {
  const auto out = r.uint<std::uint32_t>();
  const auto in = r.uint<std::uint32_t>();
  r.need((static_cast<std::size_t>(out) * in + out) * 4);
  Linear<float> layer{Matrix<float>(out, in), std::vector<float>(out)};
  for (auto& v : layer.weight.values()) v = r.f32();
  for (auto& v : layer.bias) v = r.f32();
  return layer;
}

}  // namespace

std::vector<std::uint8_t> encode_container(const Container& c) {
  const std::size_t n = c.values.rows();
  if (c.ids.size() != n || c.tags.size() != n || c.labels.size() != n) {
    throw Error("container field lengths disagree");
  }
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.uint(kContainerVersion);
  w.uint(static_cast<std::uint32_t>(n));
  w.uint(static_cast<std::uint32_t>(c.values.cols()));
  for (float v : c.values.values()) w.f32(v);
  for (auto v : c.ids) w.uint(v);
  for (auto v : c.tags) w.uint(v);
  for (auto v : c.labels) w.uint(v);
  return w.take();
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic();
  const auto version = r.uint<std::uint16_t>();
  if (version != kContainerVersion) {
    throw Error("unsupported T3AR container version " + std::to_string(version));
  }
  const std::size_t n = r.uint<std::uint32_t>();
  const std::size_t d = r.uint<std::uint32_t>();
  // Validate the full payload length before allocating.
  const std::size_t expected = n * d * 4 + n * (8 + 2 + 4);
  r.need(expected);
  Container c;
  c.values = Matrix<float>(n, d);
  for (auto& v : c.values.values()) v = r.f32();
  c.ids.resize(n);
  for (auto& v : c.ids) v = r.uint<std::uint64_t>();
  c.tags.resize(n);
  for (auto& v : c.tags) v = r.uint<std::uint16_t>();
  c.labels.resize(n);
  for (auto& v : c.labels) v = r.uint<std::uint32_t>();
  r.finish();
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.uint(kCheckpointVersion);
  w.uint(static_cast<std::uint32_t>(net.encoder.size()));
  for (const auto& layer : net.encoder) write_layer(w, layer);
  write_layer(w, net.head);
  return w.take();
}

Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic();
  const auto version = r.uint<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw Error("not a T3AR checkpoint (version " + std::to_string(version) + ")");
  }
  const auto layers = r.uint<std::uint32_t>();
  if (layers == 0) throw Error("checkpoint has no encoder layers");
  Network<float> net;
  for (std::uint32_t l = 0; l < layers; ++l) net.encoder.push_back(read_layer(r));
  net.head = read_layer(r);
  r.finish();
  for (std::size_t l = 1; l < net.encoder.size(); ++l) {
    if (net.encoder[l].in_dim() != net.encoder[l - 1].out_dim()) {
      throw Error("checkpoint layer shapes are inconsistent");
    }
  }
  if (net.head.in_dim() != net.encoder.back().out_dim()) {
    throw Error("checkpoint head shape is inconsistent");
  }
  return net;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(net));
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace t3ar
