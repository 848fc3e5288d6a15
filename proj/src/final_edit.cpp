#include "uvreenact/final_edit.hpp"

#include "uvreenact/errors.hpp"

#include <cmath>

namespace uvreenact {

EditNetImpl::EditNetImpl(int base_channels)
{
    GeneratorOptions options;
    options.in_channels = 9;
    options.out_channels = 3;
    options.base_channels = base_channels;
    options.depth = 3;
    options.decoder_steps = 3;
    generator_ = register_module("generator", AdaInGenerator(options));
}

torch::Tensor EditNetImpl::forward(const torch::Tensor& source, const torch::Tensor& background,
                                   const torch::Tensor& combined, const torch::Tensor& latent)
{
    if (source.sizes() != background.sizes() || source.sizes() != combined.sizes() || source.dim() != 4 ||
        source.size(1) != 3) {
        throw ShapeError("edit_final: source, background and combined must all be B×3×H×W of equal size");
    }
    return torch::tanh(generator_->forward(torch::cat({source, background, combined}, 1), latent));
}

torch::Tensor edit_final(const torch::Tensor& source, const torch::Tensor& background, const torch::Tensor& combined,
                         const torch::Tensor& latent, EditNet& net)
{
    if (source.dim() == 3) {
        return net->forward(source.unsqueeze(0), background.unsqueeze(0), combined.unsqueeze(0),
                            latent.dim() == 1 ? latent.unsqueeze(0) : latent)
            .squeeze(0);
    }
    return net->forward(source, background, combined, latent);
}

torch::Tensor edit_loss(const torch::Tensor& target, const torch::Tensor& final_image,
                        const PerceptualExtractor& extractor)
{
    return perceptual_l1(target, final_image, extractor);
}

void LossWeights::validate() const
{
    for (double w : {warp, uvref, cons, edit}) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ValidationError("loss weights must be finite and >= 0");
        }
    }
}

torch::Tensor total_loss(const torch::Tensor& l_warp, const torch::Tensor& l_uvref, const torch::Tensor& l_cons,
                         const torch::Tensor& l_edit, const LossWeights& weights)
{
    return weights.warp * l_warp + weights.uvref * l_uvref + weights.cons * l_cons + weights.edit * l_edit;
}

double total_loss(double l_warp, double l_uvref, double l_cons, double l_edit, const LossWeights& weights)
{
    return weights.warp * l_warp + weights.uvref * l_uvref + weights.cons * l_cons + weights.edit * l_edit;
}

} // namespace uvreenact
