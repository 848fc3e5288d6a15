#include "uvreenact/warp2d.hpp"

#include "uvreenact/errors.hpp"
#include "uvreenact/sampling.hpp"

#include <string>

namespace uvreenact {

WarpNetImpl::WarpNetImpl(int base_channels)
{
    GeneratorOptions options;
    options.in_channels = 3;
    options.out_channels = 2;
    options.base_channels = base_channels;
    options.depth = 3;
    options.decoder_steps = 1; // 1/8 → 1/4 resolution
    generator_ = register_module("generator", AdaInGenerator(options));
    torch::NoGradGuard guard;
    generator_->output_layer()->weight.zero_();
    generator_->output_layer()->bias.zero_();
}

torch::Tensor WarpNetImpl::forward(const torch::Tensor& source, const torch::Tensor& latent)
{
    auto offset = generator_->forward(source, latent).permute({0, 2, 3, 1});
    auto grid = identity_grid(offset.size(1), offset.size(2), offset.options());
    return grid.unsqueeze(0) + offset;
}

torch::Tensor predict_flow(const torch::Tensor& source, const torch::Tensor& latent, WarpNet& net)
{
    if (source.dim() != 4 || source.size(1) != 3) {
        throw ShapeError("predict_flow expects B×3×H×W images");
    }
    if (source.size(2) != source.size(3)) {
        throw ShapeError("predict_flow expects square images");
    }
    if (source.size(2) % 4 != 0) {
        throw ShapeError("image side " + std::to_string(source.size(2)) + " is not divisible by 4");
    }
    return net->forward(source, latent);
}

torch::Tensor upsample_flow(const torch::Tensor& flow, int factor)
{
    if (factor < 1) {
        throw ValidationError("upsample factor must be >= 1");
    }
    if (flow.dim() != 4 || flow.size(3) != 2) {
        throw ShapeError("upsample_flow expects B×h×w×2");
    }
    if (factor == 1) {
        return flow;
    }
    const auto b = flow.size(0);
    const auto h = flow.size(1);
    const auto w = flow.size(2);
    // Full-resolution pixel j sits at source position j·(w−1)/(W−1) under align-corners.
    auto positions = identity_grid(h * factor, w * factor, flow.options());
    auto coords = align_corners_to_pixels(positions, h, w).unsqueeze(0).expand({b, h * factor, w * factor, 2});
    return bilinear_sample(flow.permute({0, 3, 1, 2}), coords).permute({0, 2, 3, 1});
}

torch::Tensor warp_image(const torch::Tensor& image, const torch::Tensor& flow)
{
    if (image.dim() != 4 || flow.dim() != 4 || flow.size(1) != image.size(2) || flow.size(2) != image.size(3)) {
        throw ShapeError("warp_image: flow resolution must equal image resolution");
    }
    return bilinear_sample(image, align_corners_to_pixels(flow, image.size(2), image.size(3)));
}

torch::Tensor warp_loss(const torch::Tensor& target, const torch::Tensor& warped, const PerceptualExtractor& extractor)
{
    return perceptual_l1(target, warped, extractor);
}

} // namespace uvreenact
