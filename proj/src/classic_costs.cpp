#include "classic_costs.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "parallel.hpp"

namespace stereo {

CostVolume::CostVolume(int w, int h, int d, float fill) : width(w), height(h), max_disparity(d) {
  if (w < 1 || h < 1 || d < 1) throw Error(Errc::invalid_argument, "cost volume dimensions must be positive");
  data.assign(static_cast<size_t>(w) * h * d, fill);
}

namespace {

void check_pair(const Image& left, const Image& right, int max_disparity, int window) {
  if (!left.same_size(right)) throw Error(Errc::invalid_argument, "left/right dimensions differ");
  if (max_disparity < 1) throw Error(Errc::invalid_argument, "max_disparity must be >= 1");
  if (window < 1 || window % 2 == 0) throw Error(Errc::invalid_argument, "window must be odd");
}

}  // namespace

CostVolume sad_volume(const Image& left, const Image& right, int max_disparity, int patch_size) {
  check_pair(left, right, max_disparity, patch_size);
  const int r = patch_size / 2;
  CostVolume vol(left.width, left.height, max_disparity);
  parallel_for(0, left.height, [&](int y) {
    for (int x = 0; x < left.width; ++x) {
      for (int d = 0; d < max_disparity; ++d) {
        if (x - d < 0) {
          vol.at(x, y, d) = kSentinelCost;
          continue;
        }
        double sum = 0.0;  // double keeps the window sum well inside a float ulp
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            sum += std::fabs(left.at_clamped(x + dx, y + dy) - right.at_clamped(x + dx - d, y + dy));
          }
        }
        vol.at(x, y, d) = static_cast<float>(sum);
      }
    }
  });
  return vol;
}

CensusField census_transform(const Image& img, int window) {
  if (window < 1 || window % 2 == 0) throw Error(Errc::invalid_argument, "census window must be odd");
  CensusField field;
  field.width = img.width;
  field.height = img.height;
  field.window = window;
  field.words_per_pixel = (window * window + 63) / 64;
  field.bits.assign(static_cast<size_t>(img.width) * img.height * field.words_per_pixel, 0);

  const int r = window / 2;
  parallel_for(0, img.height, [&](int y) {
    for (int x = 0; x < img.width; ++x) {
      uint64_t* words = field.bits.data() + (static_cast<size_t>(y) * img.width + x) * field.words_per_pixel;
      const float center = img.at(x, y);
      int k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++k) {
          if (dx == 0 && dy == 0) continue;  // self bit stays 0
          if (center > img.at_clamped(x + dx, y + dy)) words[k / 64] |= uint64_t{1} << (k % 64);
        }
      }
    }
  });
  return field;
}

CostVolume census_volume(const CensusField& left, const CensusField& right, int max_disparity) {
  if (left.width != right.width || left.height != right.height)
    throw Error(Errc::invalid_argument, "census field dimensions differ");
  if (left.window != right.window) throw Error(Errc::invalid_argument, "census windows differ");
  if (max_disparity < 1) throw Error(Errc::invalid_argument, "max_disparity must be >= 1");

  CostVolume vol(left.width, left.height, max_disparity);
  const int words = left.words_per_pixel;
  parallel_for(0, left.height, [&](int y) {
    for (int x = 0; x < left.width; ++x) {
      const uint64_t* lw = left.at(x, y);
      for (int d = 0; d < max_disparity; ++d) {
        if (x - d < 0) {
          vol.at(x, y, d) = kSentinelCost;
          continue;
        }
        const uint64_t* rw = right.at(x - d, y);
        int dist = 0;
        for (int w = 0; w < words; ++w) dist += std::popcount(lw[w] ^ rw[w]);
        vol.at(x, y, d) = static_cast<float>(dist);
      }
    }
  });
  return vol;
}

CostVolume ncc_volume(const Image& left, const Image& right, int max_disparity, int window) {
  check_pair(left, right, max_disparity, window);
  const int r = window / 2;

  // Squared-norm of the clamped window around every center, per image.
  auto window_norms = [&](const Image& img) {
    std::vector<double> norms(static_cast<size_t>(img.width) * img.height);
    parallel_for(0, img.height, [&](int y) {
      for (int x = 0; x < img.width; ++x) {
        double s = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double v = img.at_clamped(x + dx, y + dy);
            s += v * v;
          }
        norms[static_cast<size_t>(y) * img.width + x] = s;
      }
    });
    return norms;
  };
  const std::vector<double> left_sq = window_norms(left);
  const std::vector<double> right_sq = window_norms(right);

  CostVolume vol(left.width, left.height, max_disparity);
  parallel_for(0, left.height, [&](int y) {
    for (int x = 0; x < left.width; ++x) {
      const double lsq = left_sq[static_cast<size_t>(y) * left.width + x];
      for (int d = 0; d < max_disparity; ++d) {
        if (x - d < 0) {
          vol.at(x, y, d) = kSentinelCost;
          continue;
        }
        const double rsq = right_sq[static_cast<size_t>(y) * left.width + (x - d)];
        if (lsq == 0.0 || rsq == 0.0) {
          vol.at(x, y, d) = kSentinelCost;
          continue;
        }
        double dot = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            dot += static_cast<double>(left.at_clamped(x + dx, y + dy)) * right.at_clamped(x + dx - d, y + dy);
        vol.at(x, y, d) = static_cast<float>(-dot / std::sqrt(lsq * rsq));
      }
    }
  });
  return vol;
}

namespace {

constexpr char kVolumeMagic[4] = {'S', 'T', 'C', 'V'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_cost_volume(const CostVolume& vol, const std::string& path) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kVolumeMagic, kVolumeMagic + 4);
  put_u32(out, static_cast<uint32_t>(vol.width));
  put_u32(out, static_cast<uint32_t>(vol.height));
  put_u32(out, static_cast<uint32_t>(vol.max_disparity));
  out.reserve(out.size() + vol.data.size() * 4);
  for (float v : vol.data) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(out, u);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::io, "write failed for " + path);
}

CostVolume load_cost_volume(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kVolumeMagic, 4) != 0)
    throw Error(Errc::format, "not a cost volume dump");
  const uint32_t w = get_u32(bytes.data() + 4);
  const uint32_t h = get_u32(bytes.data() + 8);
  const uint32_t d = get_u32(bytes.data() + 12);
  const size_t need = 16 + static_cast<size_t>(w) * h * d * 4;
  if (w < 1 || h < 1 || d < 1 || bytes.size() < need) throw Error(Errc::format, "bad cost volume dump");
  CostVolume vol(static_cast<int>(w), static_cast<int>(h), static_cast<int>(d));
  for (size_t i = 0; i < vol.data.size(); ++i) {
    const uint32_t u = get_u32(bytes.data() + 16 + i * 4);
    std::memcpy(&vol.data[i], &u, 4);
  }
  return vol;
}

}  // namespace stereo
