#pragma once

#include "uvreenact/networks.hpp"
#include "uvreenact/perceptual.hpp"

#include <torch/torch.h>

namespace uvreenact {

/// f^Edit: [source, warped background, combined] (9 channels) + latent → final image in [−1,1].
class EditNetImpl : public torch::nn::Module
{
public:
    explicit EditNetImpl(int base_channels = 16);

    torch::Tensor forward(const torch::Tensor& source, const torch::Tensor& background, const torch::Tensor& combined,
                          const torch::Tensor& latent);

private:
    AdaInGenerator generator_{nullptr};
};
TORCH_MODULE(EditNet);

torch::Tensor edit_final(const torch::Tensor& source, const torch::Tensor& background, const torch::Tensor& combined,
                         const torch::Tensor& latent, EditNet& net);

torch::Tensor edit_loss(const torch::Tensor& target, const torch::Tensor& final_image,
                        const PerceptualExtractor& extractor);

struct LossWeights
{
    double warp = 2.5;
    double uvref = 4.0;
    double cons = 1.0;
    double edit = 4.0;

    void validate() const;
};

/// λ_warp·l_warp + λ_uvref·l_uvref + λ_cons·l_cons + λ_edit·l_edit.
torch::Tensor total_loss(const torch::Tensor& l_warp, const torch::Tensor& l_uvref, const torch::Tensor& l_cons,
                         const torch::Tensor& l_edit, const LossWeights& weights);
double total_loss(double l_warp, double l_uvref, double l_cons, double l_edit, const LossWeights& weights);

} // namespace uvreenact
