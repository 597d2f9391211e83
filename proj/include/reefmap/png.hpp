#pragma once

// Palette PNG export of label rasters: class colors from the catalog,
// unlabeled pixels fully transparent.

#include <csetjmp>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "reefmap/core.hpp"
#include "reefmap/grf.hpp"

namespace reefmap {

inline void write_label_png(const fs::path& path, const LabelRaster& labels, const ClassCatalog& catalog) {
  validate_labels(labels, catalog);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(Errc::Io, "cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(Errc::Io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(Errc::Io, "PNG write failed: " + path.string());
  }
  png_init_io(png, fp);
  const auto w = static_cast<png_uint_32>(labels.grid.width), h = static_cast<png_uint_32>(labels.grid.height);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);

  std::vector<png_color> palette(256, png_color{0, 0, 0});
  std::vector<png_byte> alpha(256, 255);
  for (const auto& c : catalog.classes()) palette[c.index] = {c.color.r, c.color.g, c.color.b};
  alpha[kUnlabeled] = 0;
  png_set_PLTE(png, info, palette.data(), 256);
  png_set_tRNS(png, info, alpha.data(), 256, nullptr);
  png_write_info(png, info);
  for (png_uint_32 row = 0; row < h; ++row)
    png_write_row(png, labels.data.data() + static_cast<std::size_t>(row) * w);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw Error(Errc::Io, "cannot close " + path.string());
}

}  // namespace reefmap
