#include "image.hpp"

#include <algorithm>
#include <cmath>

namespace stereo {

Image::Image(int w, int h, float fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw Error(Errc::invalid_argument, "image dimensions must be positive");
  data.assign(static_cast<size_t>(w) * h, fill);
}

float Image::at_clamped(int x, int y) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return at(x, y);
}

DisparityMap::DisparityMap(int w, int h, float fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw Error(Errc::invalid_argument, "map dimensions must be positive");
  data.assign(static_cast<size_t>(w) * h, fill);
}

Image normalize(const Image& img) {
  const auto [mn, mx] = std::minmax_element(img.data.begin(), img.data.end());
  if (*mn == *mx) throw Error(Errc::degenerate_input, "cannot normalize a constant image");

  double sum = 0.0;
  for (float v : img.data) sum += v;
  const double mean = sum / img.data.size();

  double var = 0.0;
  for (float v : img.data) {
    const double c = v - mean;
    var += c * c;
  }
  var /= img.data.size();  // population variance
  const double inv_std = 1.0 / std::sqrt(var);

  Image out(img.width, img.height);
  for (size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = static_cast<float>((img.data[i] - mean) * inv_std);
  }
  return out;
}

float bilinear_sample(const Image& img, float x, float y) {
  x = std::clamp(x, 0.0f, static_cast<float>(img.width - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = img.at(x0, y0) * (1.0f - fx) + img.at(x1, y0) * fx;
  const float bot = img.at(x0, y1) * (1.0f - fx) + img.at(x1, y1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
  return out;
}

DisparityMap flip_horizontal(const DisparityMap& map) {
  DisparityMap out(map.width, map.height);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) out.at(x, y) = map.at(map.width - 1 - x, y);
  return out;
}

}  // namespace stereo
