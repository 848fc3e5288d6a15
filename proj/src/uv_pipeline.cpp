#include "uvreenact/uv_pipeline.hpp"

#include "uvreenact/detail/raster_math.hpp"
#include "uvreenact/diff_render.hpp"
#include "uvreenact/errors.hpp"
#include "uvreenact/sampling.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace uvreenact {

using detail::Point2;

namespace {

constexpr double kDepthTolerance = 1e-6;

/// Uniform bins over the image square holding front-facing triangles, for depth queries at arbitrary points.
class DepthGrid
{
public:
    DepthGrid(const torch::TensorAccessor<double, 2>& pos, const torch::TensorAccessor<int64_t, 2>& tri,
              int64_t n_triangles, int cells)
        : pos_(pos), tri_(tri), cells_(cells), bins_(static_cast<size_t>(cells * cells))
    {
        for (int64_t k = 0; k < n_triangles; ++k) {
            const auto [a, b, c] = corners(k);
            if (!(detail::edge_function(a, b, c.x, c.y) > 0.0)) {
                continue;
            }
            const int x0 = cell(std::min({a.x, b.x, c.x})), x1 = cell(std::max({a.x, b.x, c.x}));
            const int y0 = cell(std::min({a.y, b.y, c.y})), y1 = cell(std::max({a.y, b.y, c.y}));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    bins_[static_cast<size_t>(y * cells_ + x)].push_back(k);
                }
            }
        }
    }

    /// True if some front-facing triangle covers (x, y) at a depth greater than z + tolerance.
    bool occluded(double x, double y, double z) const
    {
        for (int64_t k : bins_[static_cast<size_t>(cell(y) * cells_ + cell(x))]) {
            const auto [a, b, c] = corners(k);
            const double w0 = detail::edge_function(b, c, x, y);
            const double w1 = detail::edge_function(c, a, x, y);
            const double w2 = detail::edge_function(a, b, x, y);
            if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) {
                continue;
            }
            const double area2 = w0 + w1 + w2;
            const double depth =
                (w0 * pos_[tri_[k][0]][2] + w1 * pos_[tri_[k][1]][2] + w2 * pos_[tri_[k][2]][2]) / area2;
            if (depth > z + kDepthTolerance) {
                return true;
            }
        }
        return false;
    }

private:
    std::array<Point2, 3> corners(int64_t k) const
    {
        return {Point2{pos_[tri_[k][0]][0], pos_[tri_[k][0]][1]}, Point2{pos_[tri_[k][1]][0], pos_[tri_[k][1]][1]},
                Point2{pos_[tri_[k][2]][0], pos_[tri_[k][2]][1]}};
    }

    int cell(double coord) const
    {
        const int c = static_cast<int>(std::floor((coord + 1.0) * 0.5 * cells_));
        return std::clamp(c, 0, cells_ - 1);
    }

    torch::TensorAccessor<double, 2> pos_;
    torch::TensorAccessor<int64_t, 2> tri_;
    int cells_;
    std::vector<std::vector<int64_t>> bins_;
};

} // namespace

UnwrapLookup compute_unwrap_lookup(const FaceMesh& mesh, const torch::Tensor& projected, int64_t uv_resolution)
{
    if (uv_resolution < 1) {
        throw ValidationError("uv resolution must be >= 1");
    }
    if (!mesh.uv_coords.defined() || mesh.uv_coords.size(0) != projected.size(0)) {
        throw ShapeError("unwrap needs per-vertex uv_coords matching the projected vertices");
    }
    const auto pos_t = projected.detach().to(torch::kFloat64).contiguous();
    const auto uv_t = mesh.uv_coords.to(torch::kFloat64).contiguous();
    const auto tri_t = mesh.triangles.to(torch::kInt64).contiguous();
    const auto pos = pos_t.accessor<double, 2>();
    const auto uv = uv_t.accessor<double, 2>();
    const auto tri = tri_t.accessor<int64_t, 2>();
    const int64_t n_tri = tri_t.size(0);
    const DepthGrid grid(pos, tri, n_tri, 32);

    const auto u = uv_resolution;
    UnwrapLookup lookup;
    lookup.image_coords = torch::zeros({u, u, 2}, torch::kFloat64);
    lookup.validity = torch::zeros({u, u}, torch::kFloat32);
    auto coords = lookup.image_coords.accessor<double, 3>();
    auto valid = lookup.validity.accessor<float, 2>();
    std::vector<char> assigned(static_cast<size_t>(u * u), 0);

    for (int64_t k = 0; k < n_tri; ++k) {
        std::array<int64_t, 3> idx{tri[k][0], tri[k][1], tri[k][2]};
        const Point2 p0{pos[idx[0]][0], pos[idx[0]][1]}, p1{pos[idx[1]][0], pos[idx[1]][1]},
            p2{pos[idx[2]][0], pos[idx[2]][1]};
        const bool front = detail::edge_function(p0, p1, p2.x, p2.y) > 0.0;
        std::array<Point2, 3> t;
        for (int i = 0; i < 3; ++i) {
            t[i] = {uv[idx[i]][0] * 2.0 - 1.0, uv[idx[i]][1] * 2.0 - 1.0};
        }
        double area2 = detail::edge_function(t[0], t[1], t[2].x, t[2].y);
        if (area2 == 0.0) {
            continue;
        }
        if (area2 < 0.0) { // opposite UV winding: swap so the coverage rule applies
            std::swap(t[1], t[2]);
            std::swap(idx[1], idx[2]);
            area2 = -area2;
        }

        const auto [c0, c1] = detail::pixel_span(std::min({t[0].x, t[1].x, t[2].x}),
                                                 std::max({t[0].x, t[1].x, t[2].x}), u);
        const auto [r0, r1] = detail::pixel_span(std::min({t[0].y, t[1].y, t[2].y}),
                                                 std::max({t[0].y, t[1].y, t[2].y}), u);
        for (long row = r0; row <= r1; ++row) {
            for (long col = c0; col <= c1; ++col) {
                const auto flat = static_cast<size_t>(row * u + col);
                if (assigned[flat]) {
                    continue;
                }
                std::array<double, 3> b;
                if (!detail::cover(t[0], t[1], t[2], area2, pixel_center(col, u), pixel_center(row, u), b)) {
                    continue;
                }
                assigned[flat] = 1;
                double x = 0.0, y = 0.0, z = 0.0;
                for (int i = 0; i < 3; ++i) {
                    x += b[i] * pos[idx[i]][0];
                    y += b[i] * pos[idx[i]][1];
                    z += b[i] * pos[idx[i]][2];
                }
                coords[row][col][0] = x;
                coords[row][col][1] = y;
                const bool in_frame = x >= -1.0 && x <= 1.0 && y >= -1.0 && y <= 1.0;
                if (front && in_frame && !grid.occluded(x, y, z)) {
                    valid[row][col] = 1.0f;
                }
            }
        }
    }
    return lookup;
}

torch::Tensor apply_unwrap(const torch::Tensor& images, const torch::Tensor& image_coords, const torch::Tensor& validity)
{
    if (images.dim() != 4 || image_coords.dim() != 4 || validity.dim() != 3 || images.size(0) != image_coords.size(0)) {
        throw ShapeError("apply_unwrap expects images B×3×H×W, coords B×U×U×2, validity B×U×U");
    }
    auto pixels = pixel_centers_to_pixels(image_coords.to(images.scalar_type()), images.size(2), images.size(3));
    return bilinear_sample(images, pixels) * validity.unsqueeze(1).to(images.scalar_type());
}

UVTexture unwrap_uv(const torch::Tensor& image, const FaceMesh& mesh, const MotionParams& motion,
                    const CameraConfig& camera, int64_t uv_resolution)
{
    if (image.dim() != 3 || image.size(0) != 3) {
        throw ShapeError("unwrap_uv expects a 3×H×W image");
    }
    const auto lookup = compute_unwrap_lookup(mesh, project_vertices(mesh, motion, camera), uv_resolution);
    UVTexture out;
    out.validity = lookup.validity.to(image.scalar_type());
    out.color = apply_unwrap(image.unsqueeze(0), lookup.image_coords.unsqueeze(0), out.validity.unsqueeze(0)).squeeze(0);
    return out;
}

UVRefNetImpl::UVRefNetImpl(int base_channels)
{
    GeneratorOptions options;
    options.in_channels = 7;
    options.out_channels = 3;
    options.base_channels = base_channels;
    options.depth = 3;
    options.decoder_steps = 3;
    generator_ = register_module("generator", AdaInGenerator(options));
}

torch::Tensor UVRefNetImpl::forward(const torch::Tensor& source, const torch::Tensor& initial,
                                    const torch::Tensor& validity, const torch::Tensor& latent)
{
    if (initial.dim() != 4 || initial.size(1) != 3 || validity.dim() != 3 || source.dim() != 4 ||
        source.size(0) != initial.size(0) || validity.size(0) != initial.size(0) ||
        validity.size(1) != initial.size(2) || validity.size(2) != initial.size(3)) {
        throw ShapeError("refine_uv: expected source B×3×H×W, initial B×3×U×U, validity B×U×U");
    }
    auto resized = source;
    if (source.size(2) != initial.size(2) || source.size(3) != initial.size(3)) {
        resized = torch::nn::functional::interpolate(
            source, torch::nn::functional::InterpolateFuncOptions()
                        .size(std::vector<int64_t>{initial.size(2), initial.size(3)})
                        .mode(torch::kBilinear)
                        .align_corners(false));
    }
    auto input = torch::cat({resized, initial, validity.unsqueeze(1).to(initial.scalar_type())}, 1);
    return torch::tanh(generator_->forward(input, latent));
}

UVTexture refine_uv(const torch::Tensor& source, const UVTexture& initial, const torch::Tensor& latent, UVRefNet& net)
{
    auto color = net->forward(source.dim() == 3 ? source.unsqueeze(0) : source, initial.color.unsqueeze(0),
                              initial.validity.unsqueeze(0), latent.dim() == 1 ? latent.unsqueeze(0) : latent);
    UVTexture out;
    out.color = color.squeeze(0);
    out.validity = torch::ones({color.size(2), color.size(3)}, color.options().requires_grad(false));
    return out;
}

torch::Tensor uvref_loss(const torch::Tensor& target, const torch::Tensor& combined,
                         const PerceptualExtractor& extractor)
{
    return perceptual_l1(target, combined, extractor);
}

torch::Tensor consistency_loss(const torch::Tensor& uv_source, const torch::Tensor& uv_target)
{
    if (uv_source.sizes() != uv_target.sizes()) {
        throw ShapeError("consistency_loss: UV textures differ in shape");
    }
    auto midpoint = (uv_source + uv_target) * 0.5;
    return (uv_source - midpoint).abs().mean() + (uv_target - midpoint).abs().mean();
}

} // namespace uvreenact
