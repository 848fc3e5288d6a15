#pragma once

#include "uvreenact/face_model.hpp"

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <vector>

namespace uvreenact {

/// Value written to pixels no front-facing triangle covers.
inline constexpr float kBackgroundFill = 0.0f;

/**
 * Per-pixel z-buffer result. Pixel (row i, column j) has its centre at
 * ((j+0.5)/W·2−1, (i+0.5)/H·2−1). triangle_id is −1 where nothing is covered.
 */
struct RasterFragments
{
    int64_t resolution = 0;
    std::vector<int32_t> triangle_id;
    std::vector<std::array<double, 3>> barycentric;
    std::vector<double> depth;

    bool covered(int64_t pixel) const { return triangle_id[static_cast<size_t>(pixel)] >= 0; }
};

/// Hard z-buffer over front-facing triangles (larger z wins) with a top-left tie rule.
RasterFragments rasterize_fragments(const torch::Tensor& triangles, const torch::Tensor& projected, int64_t resolution);

/// Pixel-centre position in normalized image coordinates.
inline double pixel_center(int64_t index, int64_t resolution)
{
    return (static_cast<double>(index) + 0.5) / static_cast<double>(resolution) * 2.0 - 1.0;
}

struct RasterOutput
{
    torch::Tensor image;       // 3×H×W
    torch::Tensor mask;        // H×W, 0/1
    torch::Tensor triangle_id; // H×W int64, −1 for background
    torch::Tensor barycentric; // H×W×3, zeros for background
};

/**
 * Renders a UV-textured mesh. `projected` is V×3 (x, y normalized, z depth), `uv_texture` 3×U×U.
 * The image is differentiable with respect to the texture, and with respect to `projected`
 * through the barycentric interpolation of texture coordinates (coverage itself is not).
 */
RasterOutput rasterize(const FaceMesh& mesh, const torch::Tensor& projected, const torch::Tensor& uv_texture,
                       int64_t resolution);

/**
 * Texture coordinates per pixel: H×W×2 in [0,1]² plus the H×W coverage mask. Barycentric weights
 * are recomputed with tensor ops from `projected`, so the result is differentiable in it.
 */
std::pair<torch::Tensor, torch::Tensor> pixel_uv_coords(const FaceMesh& mesh, const torch::Tensor& projected,
                                                        int64_t resolution);

/**
 * Bilinear texture lookup. texture B×3×U×U, uv B×H×W×2 (texel centres at (k+0.5)/U), mask B×H×W.
 * Uncovered pixels receive kBackgroundFill.
 */
torch::Tensor sample_texture(const torch::Tensor& texture, const torch::Tensor& uv, const torch::Tensor& mask);

/// (1−m)·bg + m·rendered; throws ValidationError unless every mask entry is exactly 0 or 1.
torch::Tensor composite(const torch::Tensor& background, const torch::Tensor& rendered, const torch::Tensor& mask);

/// Coverage of the mesh posed with the target motion (H×W float 0/1).
torch::Tensor target_mask(const FaceMesh& mesh, const MotionParams& target_motion, const CameraConfig& camera,
                          int64_t resolution);

/// Full frame: the textured mesh posed with `motion`, composited over a 3×H×W background.
torch::Tensor render_frame(const FaceMesh& mesh, const MotionParams& motion, const CameraConfig& camera,
                           const torch::Tensor& uv_texture, const torch::Tensor& background);

/// Triangle ids as a 16-bit image (id + 1, background 0) for debugging.
torch::Tensor triangle_id_image(const RasterFragments& fragments);

} // namespace uvreenact
