#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace stereo {

// Binary PGM (P5, 8- or 16-bit) or PPM (P6). Intensities come back scaled to
// [0, 1]; PPM pixels are reduced to one channel by averaging r, g, b. ASCII
// variants (P2/P3) are rejected.
Image load_image(const std::string& path);

// 8-bit binary PGM, intensities clamped to [0, 1] and quantized to maxval 255.
void save_pgm(const Image& img, const std::string& path);

// PFM, single channel ("Pf"). The scale's sign gives the payload endianness
// and rows are stored bottom-up. Non-finite file values become the invalid
// sentinel; the sentinel is written back as +inf. Three-channel "PF" files
// are rejected.
DisparityMap load_pfm(const std::string& path);
void save_pfm(const DisparityMap& map, const std::string& path);

// PPM (P6) rendering of a disparity map through a jet-style ramp on
// d / max_disparity:
//   r = clamp(1.5 - |4t - 3|), g = clamp(1.5 - |4t - 2|), b = clamp(1.5 - |4t - 1|)
// so d = 0 maps to (0, 0, 128) and d = max_disparity to (128, 0, 0).
// Invalid pixels are black.
std::vector<uint8_t> colorize(const DisparityMap& map, float max_disparity);

void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace stereo
