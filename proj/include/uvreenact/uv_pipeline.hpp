#pragma once

#include "uvreenact/face_model.hpp"
#include "uvreenact/networks.hpp"
#include "uvreenact/perceptual.hpp"

#include <torch/torch.h>

namespace uvreenact {

/// Color 3×U×U in [−1,1] plus a U×U 0/1 validity mask of texels observed in the image.
struct UVTexture
{
    torch::Tensor color;
    torch::Tensor validity;

    int64_t resolution() const { return color.size(-1); }
};

/**
 * Where each texel's surface point lands in the image: U×U×2 normalized image coordinates
 * (pixel-centre convention) and U×U validity. Texels outside the UV layout, on back-facing
 * triangles, occluded by a nearer front-facing surface, or projecting outside the frame are invalid.
 */
struct UnwrapLookup
{
    torch::Tensor image_coords;
    torch::Tensor validity;
};

UnwrapLookup compute_unwrap_lookup(const FaceMesh& mesh, const torch::Tensor& projected, int64_t uv_resolution);

/// Samples B×3×H×W images through B×U×U×2 lookups; invalid texels are set to 0. Differentiable in the images.
torch::Tensor apply_unwrap(const torch::Tensor& images, const torch::Tensor& image_coords, const torch::Tensor& validity);

/// Initial UV texture of an image given the fitted mesh and its pose.
UVTexture unwrap_uv(const torch::Tensor& image, const FaceMesh& mesh, const MotionParams& motion,
                    const CameraConfig& camera, int64_t uv_resolution);

/**
 * f^UVRef: [source image resized to U×U, initial UV color, validity] (7 channels) and the motion
 * latent → full UV texture with tanh-bounded colors.
 */
class UVRefNetImpl : public torch::nn::Module
{
public:
    explicit UVRefNetImpl(int base_channels = 16);

    /// source B×3×H×W, initial B×3×U×U, validity B×U×U, latent B×256 → B×3×U×U.
    torch::Tensor forward(const torch::Tensor& source, const torch::Tensor& initial, const torch::Tensor& validity,
                          const torch::Tensor& latent);

private:
    AdaInGenerator generator_{nullptr};
};
TORCH_MODULE(UVRefNet);

/// Single-sample convenience; the returned validity is all ones.
UVTexture refine_uv(const torch::Tensor& source, const UVTexture& initial, const torch::Tensor& latent, UVRefNet& net);

/// Σ_i mean |φ_i(target) − φ_i(combined)|.
torch::Tensor uvref_loss(const torch::Tensor& target, const torch::Tensor& combined,
                         const PerceptualExtractor& extractor);

/**
 * Symmetric cross-consistency: mean|s − (s+t)/2| + mean|t − (s+t)/2|, algebraically mean|s − t|.
 */
torch::Tensor consistency_loss(const torch::Tensor& uv_source, const torch::Tensor& uv_target);

} // namespace uvreenact
