#pragma once

#include <string>
#include <vector>

#include "reface/tensor.hpp"

namespace reface::img {

// [3,H,W] in [-1,1] <-> 8-bit RGB PNG, mapped linearly (0 -> -1, 255 -> 1).
void save_png(const std::string& path, const Tensor<float>& image);
Tensor<float> load_png(const std::string& path);

// Side-by-side strip of same-sized [3,H,W] images (reference | output | ...).
Tensor<float> hstack_images(const std::vector<Tensor<float>>& images);
// Rows stacked vertically; every row must be the same width.
Tensor<float> vstack_images(const std::vector<Tensor<float>>& rows);

}  // namespace reface::img
