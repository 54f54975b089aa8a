#include "image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace stereo {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io, "read failed for " + path);
  return bytes;
}

bool is_space(uint8_t c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Netpbm header token: skips whitespace and '#' comments.
std::string next_token(const std::vector<uint8_t>& bytes, size_t& pos) {
  while (pos < bytes.size()) {
    if (is_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  size_t start = pos;
  while (pos < bytes.size() && !is_space(bytes[pos]) && bytes[pos] != '#') ++pos;
  if (start == pos) throw Error(Errc::format, "truncated header");
  return std::string(bytes.begin() + start, bytes.begin() + pos);
}

uint32_t bswap32(uint32_t v) {
  return ((v & 0x000000ffu) << 24) | ((v & 0x0000ff00u) << 8) | ((v & 0x00ff0000u) >> 8) |
         ((v & 0xff000000u) >> 24);
}

long parse_long(const std::string& tok) {
  size_t used = 0;
  long v;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw Error(Errc::format, "bad header number '" + tok + "'");
  }
  if (used != tok.size()) throw Error(Errc::format, "bad header number '" + tok + "'");
  return v;
}

}  // namespace

Image load_image(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic != "P5" && magic != "P6") throw Error(Errc::format, "unsupported magic '" + magic + "' (want binary P5/P6)");
  const int channels = magic == "P6" ? 3 : 1;

  const long w = parse_long(next_token(bytes, pos));
  const long h = parse_long(next_token(bytes, pos));
  const long maxval = parse_long(next_token(bytes, pos));
  if (w < 1 || h < 1) throw Error(Errc::format, "bad dimensions");
  if (maxval < 1 || maxval > 65535) throw Error(Errc::format, "bad maxval");
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw Error(Errc::format, "missing separator after maxval");
  ++pos;  // exactly one whitespace byte before the payload

  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  const size_t need = static_cast<size_t>(w) * h * channels * bytes_per_sample;
  if (bytes.size() - pos < need) throw Error(Errc::io, "truncated pixel payload");

  Image img(static_cast<int>(w), static_cast<int>(h));
  const uint8_t* p = bytes.data() + pos;
  for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i) {
    long sum = 0;
    for (int c = 0; c < channels; ++c) {
      if (bytes_per_sample == 2) {
        sum += (static_cast<long>(p[0]) << 8) | p[1];  // 16-bit samples are big-endian
        p += 2;
      } else {
        sum += *p++;
      }
    }
    // Channel average before the scale, in double, so a triplicated P6
    // reproduces its P5 bit for bit.
    img.data[i] = static_cast<float>(static_cast<double>(sum) / channels / static_cast<double>(maxval));
  }
  return img;
}

void save_pgm(const Image& img, const std::string& path) {
  std::vector<uint8_t> out;
  std::ostringstream header;
  header << "P5\n" << img.width << " " << img.height << "\n255\n";
  const std::string hs = header.str();
  out.insert(out.end(), hs.begin(), hs.end());
  out.reserve(out.size() + img.data.size());
  for (float v : img.data) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<uint8_t>(std::lround(c * 255.0f)));
  }
  write_file(path, out);
}

DisparityMap load_pfm(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic == "PF") throw Error(Errc::format, "3-channel PF is not supported");
  if (magic != "Pf") throw Error(Errc::format, "unsupported magic '" + magic + "' (want Pf)");

  const long w = parse_long(next_token(bytes, pos));
  const long h = parse_long(next_token(bytes, pos));
  const std::string scale_tok = next_token(bytes, pos);
  double scale;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw Error(Errc::format, "bad scale '" + scale_tok + "'");
  }
  if (w < 1 || h < 1) throw Error(Errc::format, "bad dimensions");
  if (scale == 0.0) throw Error(Errc::format, "zero scale");
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw Error(Errc::format, "missing separator after scale");
  ++pos;

  const size_t need = static_cast<size_t>(w) * h * 4;
  if (bytes.size() - pos < need) throw Error(Errc::io, "truncated pixel payload");

  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;

  DisparityMap map(static_cast<int>(w), static_cast<int>(h));
  const uint8_t* p = bytes.data() + pos;
  for (long row = 0; row < h; ++row) {
    const long y = h - 1 - row;  // rows stored bottom-up
    for (long x = 0; x < w; ++x) {
      uint32_t u;
      std::memcpy(&u, p, 4);
      p += 4;
      if (file_little != host_little) u = bswap32(u);
      float v;
      std::memcpy(&v, &u, 4);
      map.at(static_cast<int>(x), static_cast<int>(y)) = std::isfinite(v) ? v : kInvalidDisparity;
    }
  }
  return map;
}

void save_pfm(const DisparityMap& map, const std::string& path) {
  std::vector<uint8_t> out;
  std::ostringstream header;
  header << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
  const std::string hs = header.str();
  out.insert(out.end(), hs.begin(), hs.end());
  out.reserve(out.size() + static_cast<size_t>(map.width) * map.height * 4);
  const bool host_little = std::endian::native == std::endian::little;
  for (int row = 0; row < map.height; ++row) {
    const int y = map.height - 1 - row;
    for (int x = 0; x < map.width; ++x) {
      float v = map.at(x, y);
      if (!disparity_valid(v)) v = std::numeric_limits<float>::infinity();
      uint32_t u;
      std::memcpy(&u, &v, 4);
      if (!host_little) u = bswap32(u);
      uint8_t b[4];
      std::memcpy(b, &u, 4);
      out.insert(out.end(), b, b + 4);
    }
  }
  write_file(path, out);
}

std::vector<uint8_t> colorize(const DisparityMap& map, float max_disparity) {
  if (!(max_disparity > 0.0f)) throw Error(Errc::invalid_argument, "max_disparity must be positive");
  std::vector<uint8_t> out;
  std::ostringstream header;
  header << "P6\n" << map.width << " " << map.height << "\n255\n";
  const std::string hs = header.str();
  out.insert(out.end(), hs.begin(), hs.end());
  out.reserve(out.size() + static_cast<size_t>(map.width) * map.height * 3);

  auto ramp = [](float t, float center) {
    const float v = 1.5f - std::fabs(4.0f * t - center);
    return static_cast<uint8_t>(std::lround(255.0f * std::clamp(v, 0.0f, 1.0f)));
  };
  for (float d : map.data) {
    if (!disparity_valid(d)) {
      out.insert(out.end(), {0, 0, 0});
      continue;
    }
    const float t = std::clamp(d / max_disparity, 0.0f, 1.0f);
    out.push_back(ramp(t, 3.0f));
    out.push_back(ramp(t, 2.0f));
    out.push_back(ramp(t, 1.0f));
  }
  return out;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) throw Error(Errc::io, "cannot open " + path + " for writing");
  outf.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!outf) throw Error(Errc::io, "write failed for " + path);
}

}  // namespace stereo
