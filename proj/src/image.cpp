#include "mirrorfield/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "mirrorfield/error.hpp"

namespace mirrorfield {

Image::Image(int w, int h, const Vec3& fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error(ErrorKind::InvalidArgument, "negative image size");
  pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

double srgb_encode(double linear) {
  const double x = std::clamp(linear, 0.0, 1.0);
  return x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double encoded) {
  const double x = std::clamp(encoded, 0.0, 1.0);
  return x <= 0.04045 ? x / 12.92 : std::pow((x + 0.055) / 1.055, 2.4);
}

std::uint8_t to_srgb8(double linear) {
  if (std::isnan(linear)) linear = 0;
  return static_cast<std::uint8_t>(std::lround(srgb_encode(linear) * 255.0));
}

Image srgb8_view(const Image& linear) {
  Image out(linear.width, linear.height);
  for (std::size_t i = 0; i < linear.pixels.size(); ++i) {
    const Vec3& p = linear.pixels[i];
    out.pixels[i] = {to_srgb8(p.x) / 255.0, to_srgb8(p.y) / 255.0, to_srgb8(p.z) / 255.0};
  }
  return out;
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

Image read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorKind::Data, "cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::Data, "corrupt PNG " + path.string() + ": " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  std::array<double, 256> lut;
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = srgb_decode(i / 255.0);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = {lut[buf[3 * i]], lut[buf[3 * i + 1]], lut[buf[3 * i + 2]]};
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<png_byte> buf(image.pixels.size() * 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    buf[3 * i] = to_srgb8(image.pixels[i].x);
    buf[3 * i + 1] = to_srgb8(image.pixels[i].y);
    buf[3 * i + 2] = to_srgb8(image.pixels[i].z);
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, "cannot write PNG " + path.string() + ": " + img.message);
  }
}

// Little-endian float32, bottom row first.
Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (!in || magic != "PF" || w <= 0 || h <= 0 || scale == 0) {
    throw Error(ErrorKind::Data, "bad PFM header in " + path.string());
  }
  if (scale > 0) throw Error(ErrorKind::Data, "big-endian PFM not supported: " + path.string());
  Image out(w, h);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 12);
  for (int r = 0; r < h; ++r) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()))) {
      throw Error(ErrorKind::Data, "truncated PFM " + path.string());
    }
    for (int u = 0; u < w; ++u) {
      float c[3];
      for (int k = 0; k < 3; ++k) {
        const unsigned char* b = row.data() + 12 * u + 4 * k;
        const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                   static_cast<std::uint32_t>(b[1]) << 8 |
                                   static_cast<std::uint32_t>(b[2]) << 16 |
                                   static_cast<std::uint32_t>(b[3]) << 24;
        c[k] = std::bit_cast<float>(bits);
      }
      out.at(u, h - 1 - r) = {c[0], c[1], c[2]};
    }
  }
  return out;
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "PF\n" << image.width << ' ' << image.height << "\n-1.0\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width) * 12);
  for (int r = image.height - 1; r >= 0; --r) {
    for (int u = 0; u < image.width; ++u) {
      const Vec3& p = image.at(u, r);
      const float c[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                          static_cast<float>(p.z)};
      for (int k = 0; k < 3; ++k) {
        const auto bits = std::bit_cast<std::uint32_t>(c[k]);
        for (int i = 0; i < 4; ++i) row[12 * u + 4 * k + i] = static_cast<unsigned char>(bits >> (8 * i));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void require_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorKind::ShapeMismatch,
                "image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                    " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

double psnr_from_mse(double mse) {
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pfm") return read_pfm(path);
  throw Error(ErrorKind::Data, "unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& image) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".pfm") return write_pfm(path, image);
  throw Error(ErrorKind::Data, "unsupported image format: " + path.string());
}

double psnr(const Image& a, const Image& b) {
  require_same_size(a, b);
  double sum = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const Vec3 d = a.pixels[i] - b.pixels[i];
    sum += dot(d, d);
  }
  return psnr_from_mse(sum / (3.0 * static_cast<double>(a.pixels.size())));
}

double psnr_masked(const Image& a, const Image& b, std::span<const std::uint8_t> mask) {
  require_same_size(a, b);
  if (mask.size() != a.pixels.size()) throw Error(ErrorKind::ShapeMismatch, "mask size");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    if (!mask[i]) continue;
    const Vec3 d = a.pixels[i] - b.pixels[i];
    sum += dot(d, d);
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return psnr_from_mse(sum / (3.0 * static_cast<double>(n)));
}

double ssim(const Image& a, const Image& b) {
  require_same_size(a, b);
  constexpr int kWin = 11;
  if (a.width < kWin || a.height < kWin) {
    throw Error(ErrorKind::InvalidArgument, "ssim needs images of at least 11x11");
  }
  std::array<double, kWin> g;
  double gs = 0;
  for (int i = 0; i < kWin; ++i) {
    const double x = i - kWin / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-x * x / (2 * 1.5 * 1.5));
    gs += g[static_cast<std::size_t>(i)];
  }
  for (double& x : g) x /= gs;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  const int ow = a.width - kWin + 1, oh = a.height - kWin + 1;
  double total = 0;
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int j = 0; j < kWin; ++j) {
          for (int i = 0; i < kWin; ++i) {
            const double w = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
            const double va = a.at(x + i, y + j)[static_cast<std::size_t>(ch)];
            const double vb = b.at(x + i, y + j)[static_cast<std::size_t>(ch)];
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
    total += sum / (static_cast<double>(ow) * oh);
  }
  return total / 3.0;
}

}  // namespace mirrorfield
