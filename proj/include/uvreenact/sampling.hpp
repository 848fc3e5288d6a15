#pragma once

#include <torch/torch.h>

namespace uvreenact {

/**
 * Differentiable bilinear sampling with border clamping.
 *
 * image:  B×C×H×W
 * coords: B×Ho×Wo×2, (column, row) in pixel units where integer values hit pixel centres.
 * Returns B×C×Ho×Wo. Gradients flow to both image and coords; outside the border the
 * coordinate gradient is zero (clamped).
 */
torch::Tensor bilinear_sample(const torch::Tensor& image, const torch::Tensor& coords);

/// Align-corners normalized grid (-1 = first pixel centre, +1 = last) → pixel units.
torch::Tensor align_corners_to_pixels(const torch::Tensor& grid, int64_t height, int64_t width);

/// Half-pixel normalized grid (pixel i centred at (i+0.5)/n·2−1) → pixel units.
torch::Tensor pixel_centers_to_pixels(const torch::Tensor& grid, int64_t height, int64_t width);

/// H×W×2 align-corners identity grid, channel 0 = x (column), 1 = y (row).
torch::Tensor identity_grid(int64_t height, int64_t width, torch::TensorOptions options = {});

} // namespace uvreenact
