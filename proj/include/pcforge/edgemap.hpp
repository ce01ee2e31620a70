#pragma once

#include "pcforge/grid.hpp"

namespace pcforge {

// Gradient magnitude from the 3x3 Sobel pair with replicate borders, divided
// by its maximum so the result lies in [0, 1]. An all-zero gradient stays zero.
GrayImage sobel(const GrayImage& img);

// Zeroes the background (img * mask) and then applies sobel.
GrayImage masked_sobel(const GrayImage& img, const BinaryMask& mask);

}  // namespace pcforge
