#include "uvreenact/networks.hpp"

#include "uvreenact/errors.hpp"

#include <algorithm>
#include <string>

namespace uvreenact {

namespace {

torch::nn::Conv2d conv3x3(int in, int out, int stride = 1)
{
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

} // namespace

AdaInGeneratorImpl::AdaInGeneratorImpl(const GeneratorOptions& options) : options_(options)
{
    if (options.depth < 1 || options.decoder_steps < 0 || options.decoder_steps > options.depth) {
        throw ValidationError("generator: need depth >= 1 and 0 <= decoder_steps <= depth");
    }
    for (int level = 0; level <= options.depth; ++level) {
        channels_.push_back(std::min(options.base_channels << level, options.max_channels));
    }
    in_ = register_module("in", conv3x3(options.in_channels, channels_[0]));
    for (int level = 0; level < options.depth; ++level) {
        down_->push_back(conv3x3(channels_[level], channels_[level + 1], 2));
    }
    register_module("down", down_);
    const int deepest = channels_[options.depth];
    bottleneck_ = register_module("bottleneck", conv3x3(deepest, deepest));
    bottleneck_head_ = register_module("bottleneck_head", AdaInHead(deepest));
    for (int step = 0; step < options.decoder_steps; ++step) {
        const int level = options.depth - step; // current resolution level
        up_->push_back(conv3x3(channels_[level] + channels_[level - 1], channels_[level - 1]));
        up_heads_->push_back(AdaInHead(channels_[level - 1]));
    }
    register_module("up", up_);
    register_module("up_heads", up_heads_);
    // At full resolution the output convolution also sees the raw input, so absolute levels survive AdaIN.
    const int out_in = channels_[options.depth - options.decoder_steps] +
                       (options.decoder_steps == options.depth ? options.in_channels : 0);
    out_ = register_module("out", conv3x3(out_in, options.out_channels));
}

torch::Tensor AdaInGeneratorImpl::forward(const torch::Tensor& input, const torch::Tensor& latent)
{
    if (input.dim() != 4 || input.size(1) != options_.in_channels) {
        throw ShapeError("generator expects B×" + std::to_string(options_.in_channels) + "×H×W input");
    }
    const int64_t divisor = int64_t{1} << options_.depth;
    if (input.size(2) % divisor != 0 || input.size(3) % divisor != 0) {
        throw ShapeError("generator input side must be divisible by " + std::to_string(divisor));
    }
    std::vector<torch::Tensor> skips;
    auto h = torch::silu(in_->forward(input));
    for (const auto& layer : *down_) {
        skips.push_back(h);
        h = torch::silu(layer->as<torch::nn::Conv2d>()->forward(h));
    }
    h = torch::silu(adain(bottleneck_->forward(h), latent, bottleneck_head_));
    for (size_t step = 0; step < up_->size(); ++step) {
        h = torch::upsample_nearest2d(h, {h.size(2) * 2, h.size(3) * 2});
        h = torch::cat({h, skips[skips.size() - 1 - step]}, 1);
        h = up_[step]->as<torch::nn::Conv2d>()->forward(h);
        auto [scale, bias] = up_heads_[step]->as<AdaInHeadImpl>()->forward(latent);
        h = torch::silu(adain(h, scale, bias));
    }
    if (options_.decoder_steps == options_.depth) {
        h = torch::cat({h, input}, 1);
    }
    return out_->forward(h);
}

} // namespace uvreenact
