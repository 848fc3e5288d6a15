#pragma once

#include "uvreenact/networks.hpp"
#include "uvreenact/perceptual.hpp"

#include <torch/torch.h>

namespace uvreenact {

/**
 * f^Warp: (source image, motion latent) → quarter-resolution flow field.
 *
 * Flow values are absolute sampling positions on the align-corners normalized grid, laid out
 * B×(H/4)×(W/4)×2. The offset head is zero-initialized, so a fresh network predicts the identity grid.
 */
class WarpNetImpl : public torch::nn::Module
{
public:
    explicit WarpNetImpl(int base_channels = 16);

    torch::Tensor forward(const torch::Tensor& source, const torch::Tensor& latent);

private:
    AdaInGenerator generator_{nullptr};
};
TORCH_MODULE(WarpNet);

/// Throws ShapeError unless the image is square with a side divisible by 4 (and by 8 for the encoder).
torch::Tensor predict_flow(const torch::Tensor& source, const torch::Tensor& latent, WarpNet& net);

/// Align-corners bilinear resize of a B×h×w×2 flow by an integer factor.
torch::Tensor upsample_flow(const torch::Tensor& flow, int factor = 4);

/// Samples B×C×H×W images at a full-resolution B×H×W×2 flow (align-corners grid, border clamp).
torch::Tensor warp_image(const torch::Tensor& image, const torch::Tensor& flow);

/// Σ_i mean |φ_i(target) − φ_i(warped)|.
torch::Tensor warp_loss(const torch::Tensor& target, const torch::Tensor& warped, const PerceptualExtractor& extractor);

} // namespace uvreenact
