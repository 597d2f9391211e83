#pragma once

// GRF raster files: a headerless row-major little-endian payload
// (float32 probabilities or uint8 labels) plus a JSON sidecar at
// "<path>.json" holding the grid and dtype.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reefmap/core.hpp"

namespace reefmap {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw Error(Errc::Io, "short read on " + path.string());
  return bytes;
}

inline std::string read_text_file(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

inline void write_file_bytes(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(Errc::Io, "short write on " + path.string());
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

inline nlohmann::json read_json_file(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

enum class GrfType : std::uint8_t { Float32, UInt8 };

struct GrfHeader {
  GridSpec grid;
  GrfType dtype = GrfType::UInt8;
  std::optional<int> class_id;
};

inline fs::path grf_sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }

inline GrfHeader read_grf_header(const fs::path& path) {
  const auto j = read_json_file(grf_sidecar_path(path));
  GrfHeader h;
  h.grid = grid_from_json(j);
  const auto dtype = j.value("dtype", std::string{});
  if (dtype == "float32")
    h.dtype = GrfType::Float32;
  else if (dtype == "uint8")
    h.dtype = GrfType::UInt8;
  else
    throw Error(Errc::MalformedRaster, path.string() + ": unknown dtype '" + dtype + "'");
  if (j.contains("class_id")) h.class_id = j["class_id"].get<int>();
  return h;
}

namespace detail {

inline void write_sidecar(const fs::path& path, const GridSpec& g, GrfType dtype, std::optional<int> class_id) {
  auto j = to_json(g);
  j["dtype"] = dtype == GrfType::Float32 ? "float32" : "uint8";
  if (dtype == GrfType::Float32)
    j["nodata"] = "nan";
  else
    j["nodata"] = kUnlabeled;
  if (class_id) j["class_id"] = *class_id;
  write_json_file(grf_sidecar_path(path), j);
}

inline std::uint32_t float_bits_le(float f) {
  std::uint32_t bits = std::isnan(f) ? 0x7fc00000u : std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return bits;
}

inline float float_from_le(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

inline void write_grf(const fs::path& path, const ProbabilityRaster& raster) {
  std::vector<std::uint32_t> payload(raster.data.size());
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = detail::float_bits_le(static_cast<float>(raster.data[i]));
  write_file_bytes(path, payload.data(), payload.size() * sizeof(std::uint32_t));
  detail::write_sidecar(path, raster.grid, GrfType::Float32, raster.class_id);
}

inline void write_grf(const fs::path& path, const LabelRaster& raster) {
  write_file_bytes(path, raster.data.data(), raster.data.size());
  detail::write_sidecar(path, raster.grid, GrfType::UInt8, std::nullopt);
}

inline ProbabilityRaster read_probability_grf(const fs::path& path) {
  const auto h = read_grf_header(path);
  if (h.dtype != GrfType::Float32) throw Error(Errc::MalformedRaster, path.string() + " is not a float32 raster");
  const auto bytes = read_file_bytes(path);
  if (bytes.size() != h.grid.pixel_count() * 4)
    throw Error(Errc::MalformedRaster, path.string() + ": payload size " + std::to_string(bytes.size()) +
                                           " does not match " + std::to_string(h.grid.width) + "x" +
                                           std::to_string(h.grid.height) + " float32");
  ProbabilityRaster r(h.grid, static_cast<ClassId>(h.class_id.value_or(0)));
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    const float f = detail::float_from_le(bits);
    r.data[i] = std::isnan(f) ? ProbabilityRaster::nodata() : static_cast<double>(f);
  }
  return r;
}

inline LabelRaster read_label_grf(const fs::path& path) {
  const auto h = read_grf_header(path);
  if (h.dtype != GrfType::UInt8) throw Error(Errc::MalformedRaster, path.string() + " is not a uint8 raster");
  auto bytes = read_file_bytes(path);
  if (bytes.size() != h.grid.pixel_count())
    throw Error(Errc::MalformedRaster, path.string() + ": payload size " + std::to_string(bytes.size()) +
                                           " does not match " + std::to_string(h.grid.width) + "x" +
                                           std::to_string(h.grid.height) + " uint8");
  LabelRaster r;
  r.grid = h.grid;
  r.data = std::move(bytes);
  return r;
}

}  // namespace reefmap
