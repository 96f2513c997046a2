#include "t2/harness/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "t2/data/checksum.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace t2 {

namespace {

constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 4);
}

void put_i32(std::string& buf, int32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 4);
}

void put_str(std::string& buf, const std::string& s) {
  put_u32(buf, static_cast<uint32_t>(s.size()));
  buf.append(s);
}

void put_tensor(std::string& buf, const Tensor<float>& t) {
  put_i32(buf, t.n);
  put_i32(buf, t.c);
  put_i32(buf, t.h);
  put_i32(buf, t.w);
  buf.append(reinterpret_cast<const char*>(t.m.data()),
             static_cast<size_t>(t.m.size()) * sizeof(float));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) {
    if (pos + n > buf.size()) throw ValidationError("truncated checkpoint: " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void tensor_into(Tensor<float>& t, const std::string& name) {
    const int n = i32(), c = i32(), h = i32(), w = i32();
    require(n == t.n && c == t.c && h == t.h && w == t.w,
            "checkpoint entry '" + name + "' has shape (" + std::to_string(n) +
                "," + std::to_string(c) + "," + std::to_string(h) + "," +
                std::to_string(w) + "), model expects " + t.shape_str());
    const size_t bytes = static_cast<size_t>(t.m.size()) * sizeof(float);
    need(bytes);
    std::memcpy(t.m.data(), buf.data() + pos, bytes);
    pos += bytes;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  return buf;
}

std::string checked_payload(const std::string& path, const std::string& raw) {
  if (raw.size() < 12 || raw.compare(0, 4, "T2CK") != 0)
    throw ValidationError("not a checkpoint file: " + path);
  uint32_t stored;
  std::memcpy(&stored, raw.data() + raw.size() - 4, 4);
  const uint32_t actual = crc32_bytes(raw.data(), raw.size() - 4);
  require(stored == actual, "checkpoint checksum mismatch: " + path);
  return raw.substr(4, raw.size() - 8);
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model,
                     const CheckpointMeta& meta) {
  std::string buf = "T2CK";
  put_u32(buf, kVersion);
  put_str(buf, meta.config_echo);
  put_i32(buf, meta.epoch);

  put_u32(buf, static_cast<uint32_t>(model.params.items.size()));
  for (const auto* p : model.params.items) {
    put_str(buf, p->name);
    put_tensor(buf, p->value);
    put_tensor(buf, p->momentum);
  }
  const auto buffers = model.buffers();
  put_u32(buf, static_cast<uint32_t>(buffers.size()));
  for (const auto& [name, t] : buffers) {
    put_str(buf, name);
    put_tensor(buf, *t);
  }
  put_u32(buf, crc32_bytes(buf.data(), buf.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("short checkpoint write: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, Model<float>& model) {
  const std::string raw = read_file(path);
  const std::string payload = checked_payload(path, raw);
  Reader r{payload, 0, path};

  require(r.u32() == kVersion, "unsupported checkpoint version in " + path);
  CheckpointMeta meta;
  meta.config_echo = r.str();
  meta.epoch = r.i32();

  const uint32_t np = r.u32();
  require(np == model.params.items.size(),
          "checkpoint holds " + std::to_string(np) + " parameters, model has " +
              std::to_string(model.params.items.size()));
  for (auto* p : model.params.items) {
    const std::string name = r.str();
    require(name == p->name, "checkpoint parameter '" + name +
                                 "' does not match model parameter '" +
                                 p->name + "'");
    r.tensor_into(p->value, name);
    r.tensor_into(p->momentum, name);
  }
  auto buffers = model.buffers();
  const uint32_t nb = r.u32();
  require(nb == buffers.size(), "checkpoint holds " + std::to_string(nb) +
                                    " buffers, model has " +
                                    std::to_string(buffers.size()));
  for (auto& [name, t] : buffers) {
    const std::string got = r.str();
    require(got == name, "checkpoint buffer '" + got +
                             "' does not match model buffer '" + name + "'");
    r.tensor_into(*t, got);
  }
  return meta;
}

std::string peek_checkpoint_config(const std::string& path) {
  const std::string raw = read_file(path);
  const std::string payload = checked_payload(path, raw);
  Reader r{payload, 0, path};
  require(r.u32() == kVersion, "unsupported checkpoint version in " + path);
  return r.str();
}

}  // namespace t2
