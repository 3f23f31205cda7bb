#pragma once

#include <string>
#include <vector>

#include "rfdn/tensor.hpp"

namespace rfdn {

/// Reads an 8-bit PNG as a (1,3,h,w) tensor of values in [0,255].
/// Grayscale and palette images are promoted to RGB; alpha is composited
/// over black. Unreadable or truncated files raise IoError.
Tensor<float> load_image(const std::string& path);

/// Writes a (1,3,h,w) tensor as an 8-bit RGB PNG, clamping to [0,255] and
/// rounding. save then load reproduces the rounded pixel array exactly.
void save_image(const Tensor<float>& img, const std::string& path);

/// Sorted *.png paths directly inside a directory.
std::vector<std::string> list_images(const std::string& dir);

}  // namespace rfdn
