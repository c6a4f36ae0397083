#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mvf/mtf.hpp"

namespace mvf {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (auto d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : p.value.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ParameterSet decode_checkpoint(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw CheckpointError("checkpoint truncated");
  };
  auto u32 = [&] {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  pos = 4;
  if (const auto version = u32(); version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ParameterSet out;
  while (pos < bytes.size()) {
    const auto name_len = u32();
    need(name_len);
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    const auto rank = u32();
    Shape shape(rank);
    for (auto& d : shape) d = u32();
    const std::size_t n = numel(shape);
    need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(u32());
    try {
      out.add(std::move(name), TensorF32(std::move(shape), std::move(data)));
    } catch (const std::exception& e) {
      throw CheckpointError(std::string("malformed checkpoint entry: ") + e.what());
    }
  }
  return out;
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void assign_parameters(ParameterSet& target, const ParameterSet& loaded) {
  for (const auto& p : target) {
    if (loaded.find(p.name) == loaded.size()) {
      throw CheckpointError("incompatible checkpoint: missing parameter '" + p.name + "'");
    }
  }
  for (const auto& p : loaded) {
    const auto idx = target.find(p.name);
    if (idx == target.size()) {
      throw CheckpointError("incompatible checkpoint: unexpected parameter '" + p.name + "'");
    }
    if (target[idx].value.shape != p.value.shape) {
      throw CheckpointError("incompatible checkpoint: parameter '" + p.name + "' has shape " +
                            shape_str(p.value.shape) + ", model expects " +
                            shape_str(target[idx].value.shape));
    }
  }
  for (auto& p : target) p.value.data = loaded[loaded.find(p.name)].value.data;
}

}  // namespace mvf
