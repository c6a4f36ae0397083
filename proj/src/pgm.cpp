#include <algorithm>
#include <cmath>
#include <fstream>

#include "mvf/lstp.hpp"

namespace mvf {

std::vector<std::uint8_t> encode_pgm(const AttentionMap& map) {
  const std::size_t n = map.grid_side * map.grid_side;
  if (map.grid_side == 0 || map.values.size() != n) {
    throw DimensionError("attention map needs grid_side^2 values");
  }
  double total = 0;
  for (float v : map.values) {
    if (!(v >= 0.0f)) throw std::invalid_argument("attention map has a negative or NaN value");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-5) {
    throw std::invalid_argument("attention map does not sum to 1");
  }
  const std::string header =
      "P5\n" + std::to_string(map.grid_side) + " " + std::to_string(map.grid_side) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const float min = *lo, max = *hi;
  for (float v : map.values) {
    if (max == min) {
      out.push_back(128);
    } else {
      const double scaled = 255.0 * (double(v) - min) / (double(max) - min);
      out.push_back(static_cast<std::uint8_t>(std::lround(scaled)));
    }
  }
  return out;
}

void export_attention(const AttentionMap& map, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(map);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string attention_file_name(const std::string& video_id, std::size_t frame,
                                std::size_t entity, std::size_t layer) {
  return video_id + "_f" + std::to_string(frame) + "_e" + std::to_string(entity) + "_l" +
         std::to_string(layer) + ".pgm";
}

}  // namespace mvf
