#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mvf/features.hpp"

namespace mvf {

static_assert(std::endian::native == std::endian::little,
              "MVFF encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'V', 'F', 'F'};
constexpr std::size_t kHeaderBytes = 24;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw MvffError(MvffError::Kind::truncated,
                      std::string("MVFF truncated while reading ") + what);
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_mvff(const VideoFeatures& features) {
  features.validate();
  for (std::size_t t = 0; t < features.num_frames; ++t) {
    if (features.timestamps[t] != std::int64_t(t)) {
      throw std::invalid_argument("MVFF v1 stores implicit timestamps 0..T-1 only");
    }
  }
  std::vector<std::uint8_t> out;
  const std::size_t payload = features.data.size() * 4;
  out.reserve(kHeaderBytes + payload + 1 + features.num_frames * 8);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kMvffVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(features.num_frames));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(features.num_layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(features.num_tokens));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(features.channels));
  for (float v : features.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  put<std::uint8_t>(out, features.annotations ? 1 : 0);
  if (features.annotations) {
    for (auto l : features.annotations->labels) put<std::uint32_t>(out, l);
    for (float p : features.annotations->progression) {
      put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(p));
    }
  }
  return out;
}

VideoFeatures decode_mvff(std::span<const std::uint8_t> bytes, std::string video_id) {
  Reader in(bytes);
  in.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw MvffError(MvffError::Kind::bad_magic, "not an MVFF file (bad magic)");
  }
  in.get<std::uint32_t>("magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kMvffVersion) {
    throw MvffError(MvffError::Kind::version_mismatch,
                    "unsupported MVFF version " + std::to_string(version));
  }
  VideoFeatures f;
  f.video_id = std::move(video_id);
  f.num_frames = in.get<std::uint32_t>("T");
  f.num_layers = in.get<std::uint32_t>("L");
  f.num_tokens = in.get<std::uint32_t>("S");
  f.channels = in.get<std::uint32_t>("D");
  if (f.num_frames == 0 || f.num_layers == 0 || f.num_tokens == 0 || f.channels == 0) {
    throw MvffError(MvffError::Kind::malformed, "MVFF header has a zero dimension");
  }
  const std::size_t count = f.num_frames * f.num_layers * f.num_tokens * f.channels;
  in.need(count * 4, "feature payload");
  f.data.resize(count);
  for (auto& v : f.data) v = std::bit_cast<float>(in.get<std::uint32_t>("feature payload"));
  const auto flag = in.get<std::uint8_t>("label flag");
  if (flag > 1) throw MvffError(MvffError::Kind::malformed, "MVFF label flag must be 0 or 1");
  if (flag == 1) {
    in.need(f.num_frames * 8, "label block");
    PhaseAnnotations ann;
    ann.labels.resize(f.num_frames);
    ann.progression.resize(f.num_frames);
    for (auto& l : ann.labels) l = in.get<std::uint32_t>("labels");
    for (auto& p : ann.progression) p = std::bit_cast<float>(in.get<std::uint32_t>("progression"));
    f.annotations = std::move(ann);
  }
  if (in.remaining() != 0) {
    throw MvffError(MvffError::Kind::malformed, "MVFF has trailing bytes");
  }
  f.timestamps.resize(f.num_frames);
  for (std::size_t t = 0; t < f.num_frames; ++t) f.timestamps[t] = std::int64_t(t);
  return f;
}

void write_mvff(const VideoFeatures& features, const std::filesystem::path& path) {
  const auto bytes = encode_mvff(features);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MvffError(MvffError::Kind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw MvffError(MvffError::Kind::io, "write failed for " + path.string());
}

VideoFeatures load_mvff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MvffError(MvffError::Kind::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_mvff(bytes, path.stem().string());
}

}  // namespace mvf
