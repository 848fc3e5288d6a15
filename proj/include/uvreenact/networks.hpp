#pragma once

#include "uvreenact/motion_codec.hpp"

#include <torch/torch.h>

#include <vector>

namespace uvreenact {

struct GeneratorOptions
{
    int in_channels = 3;
    int out_channels = 3;
    int base_channels = 16;
    int max_channels = 64;
    /// Number of stride-2 encoder stages.
    int depth = 3;
    /// Number of ×2 decoder stages; fewer than depth leaves the output at 1/2^(depth-steps) resolution.
    int decoder_steps = 3;
};

/**
 * Convolutional encoder-decoder with skip connections. The motion latent is injected
 * through AdaIN at the bottleneck and after every decoder convolution. Output is the
 * raw last convolution (callers choose the output nonlinearity); when the decoder returns to
 * full resolution that convolution also receives the input channels.
 */
class AdaInGeneratorImpl : public torch::nn::Module
{
public:
    explicit AdaInGeneratorImpl(const GeneratorOptions& options);

    torch::Tensor forward(const torch::Tensor& input, const torch::Tensor& latent);

    const GeneratorOptions& options() const { return options_; }
    torch::nn::Conv2d& output_layer() { return out_; }

private:
    GeneratorOptions options_;
    std::vector<int> channels_;
    torch::nn::Conv2d in_{nullptr};
    torch::nn::ModuleList down_;
    torch::nn::Conv2d bottleneck_{nullptr};
    AdaInHead bottleneck_head_{nullptr};
    torch::nn::ModuleList up_;
    torch::nn::ModuleList up_heads_;
    torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(AdaInGenerator);

} // namespace uvreenact
