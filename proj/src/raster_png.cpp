// Minimal 8-bit grayscale PNG codec on top of zlib. Writes non-interlaced
// filter-0 scanlines; reads any filter type but only bit depth 8, color
// type 0, non-interlaced images (the raster convention this project ingests).
#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "tire/dataset.hpp"
#include "tire/error.hpp"

namespace tire::detail {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png_gray8(int width, int height,
                                           const std::vector<std::uint8_t>& pixels) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ShapeError("png encode: pixel buffer does not match dimensions");
  }
  // Filter-0 scanlines.
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(height) * (width + 1));
  for (int y = 0; y < height; ++y) {
    raw[static_cast<std::size_t>(y) * (width + 1)] = 0;
    std::memcpy(&raw[static_cast<std::size_t>(y) * (width + 1) + 1],
                &pixels[static_cast<std::size_t>(y) * width], static_cast<std::size_t>(width));
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw DataError("png encode: zlib compression failed");
  }
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(0);   // color type: grayscale
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  return out;
}

void decode_png_gray8(const std::vector<std::uint8_t>& bytes, int& width, int& height,
                      std::vector<std::uint8_t>& pixels) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
    throw DataError("png: bad signature at byte 0");
  }
  std::size_t pos = 8;
  bool seen_ihdr = false;
  std::uint32_t w = 0, h = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = get_u32_be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) {
      throw DataError("png: truncated chunk at byte " + std::to_string(pos));
    }
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    const std::uint32_t crc_want = get_u32_be(&bytes[pos + 8 + len]);
    const auto crc_have =
        static_cast<std::uint32_t>(crc32(0L, &bytes[pos + 4], static_cast<uInt>(len + 4)));
    if (crc_want != crc_have) {
      throw DataError("png: crc mismatch at byte " + std::to_string(pos));
    }
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw DataError("png: bad IHDR length");
      w = get_u32_be(data);
      h = get_u32_be(data + 4);
      const int depth = data[8], color = data[9], comp = data[10], filt = data[11], inter = data[12];
      if (depth != 8 || color != 0) {
        throw DataError("png: only 8-bit grayscale supported (depth " + std::to_string(depth) +
                        ", color type " + std::to_string(color) + ")");
      }
      if (comp != 0 || filt != 0) throw DataError("png: unsupported compression/filter method");
      if (inter != 0) throw DataError("png: interlaced images not supported");
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || w == 0 || h == 0) throw DataError("png: missing or empty IHDR");
  if (idat.empty()) throw DataError("png: no IDAT data");

  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<std::uint8_t> raw(stride * h);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || raw_len != raw.size()) {
    throw DataError("png: zlib inflate failed (rc " + std::to_string(zrc) + ")");
  }

  pixels.assign(static_cast<std::size_t>(w) * h, 0);
  for (std::uint32_t y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(y) * stride];
    const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * stride + 1];
    std::uint8_t* dst = &pixels[static_cast<std::size_t>(y) * w];
    const std::uint8_t* up = y > 0 ? &pixels[static_cast<std::size_t>(y - 1) * w] : nullptr;
    for (std::uint32_t x = 0; x < w; ++x) {
      const int left = x > 0 ? dst[x - 1] : 0;
      const int above = up ? up[x] : 0;
      const int upleft = (up && x > 0) ? up[x - 1] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, upleft); break;
        default:
          throw DataError("png: unknown filter type " + std::to_string(filter) + " in row " +
                          std::to_string(y));
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  width = static_cast<int>(w);
  height = static_cast<int>(h);
}

}  // namespace tire::detail
