#include "uvreenact/diff_render.hpp"

#include "uvreenact/detail/raster_math.hpp"
#include "uvreenact/errors.hpp"
#include "uvreenact/sampling.hpp"

#include <algorithm>
#include <limits>

namespace uvreenact {

using detail::Point2;

RasterFragments rasterize_fragments(const torch::Tensor& triangles, const torch::Tensor& projected, int64_t resolution)
{
    if (resolution < 1) {
        throw ValidationError("raster resolution must be >= 1");
    }
    if (projected.dim() != 2 || projected.size(1) != 3) {
        throw ShapeError("projected vertices must be V×3");
    }
    const auto n_pixels = static_cast<size_t>(resolution * resolution);
    RasterFragments frags;
    frags.resolution = resolution;
    frags.triangle_id.assign(n_pixels, -1);
    frags.barycentric.assign(n_pixels, {0.0, 0.0, 0.0});
    frags.depth.assign(n_pixels, -std::numeric_limits<double>::infinity());
    if (triangles.numel() == 0) {
        return frags;
    }
    const auto pos = projected.detach().to(torch::kFloat64).contiguous();
    const auto tri = triangles.to(torch::kInt64).contiguous();
    const auto p = pos.accessor<double, 2>();
    const auto t = tri.accessor<int64_t, 2>();
    const auto v = pos.size(0);

    for (int64_t k = 0; k < tri.size(0); ++k) {
        const int64_t i0 = t[k][0], i1 = t[k][1], i2 = t[k][2];
        if (i0 < 0 || i1 < 0 || i2 < 0 || i0 >= v || i1 >= v || i2 >= v) {
            throw ValidationError("triangle index out of range");
        }
        const Point2 a{p[i0][0], p[i0][1]}, b{p[i1][0], p[i1][1]}, c{p[i2][0], p[i2][1]};
        const double area2 = detail::edge_function(a, b, c.x, c.y);
        if (!(area2 > 0.0)) {
            continue; // back-facing or degenerate
        }
        const auto [c0, c1] = detail::pixel_span(std::min({a.x, b.x, c.x}), std::max({a.x, b.x, c.x}), resolution);
        const auto [r0, r1] = detail::pixel_span(std::min({a.y, b.y, c.y}), std::max({a.y, b.y, c.y}), resolution);
        for (long row = r0; row <= r1; ++row) {
            const double py = pixel_center(row, resolution);
            for (long col = c0; col <= c1; ++col) {
                const double px = pixel_center(col, resolution);
                std::array<double, 3> bary;
                if (!detail::cover(a, b, c, area2, px, py, bary)) {
                    continue;
                }
                const double z = bary[0] * p[i0][2] + bary[1] * p[i1][2] + bary[2] * p[i2][2];
                const auto idx = static_cast<size_t>(row * resolution + col);
                if (z > frags.depth[idx]) {
                    frags.depth[idx] = z;
                    frags.triangle_id[idx] = static_cast<int32_t>(k);
                    frags.barycentric[idx] = bary;
                }
            }
        }
    }
    return frags;
}

std::pair<torch::Tensor, torch::Tensor> pixel_uv_coords(const FaceMesh& mesh, const torch::Tensor& projected,
                                                        int64_t resolution)
{
    if (projected.size(0) != mesh.uv_coords.size(0)) {
        throw ShapeError("projected vertex count does not match the mesh");
    }
    const auto frags = rasterize_fragments(mesh.triangles, projected, resolution);
    const auto n = resolution * resolution;
    auto mask = torch::zeros({n}, projected.options().requires_grad(false));
    std::vector<int64_t> pixels;
    std::vector<int64_t> tri_ids;
    for (int64_t i = 0; i < n; ++i) {
        if (frags.covered(i)) {
            pixels.push_back(i);
            tri_ids.push_back(frags.triangle_id[static_cast<size_t>(i)]);
        }
    }
    auto uv_flat = torch::zeros({n, 2}, projected.options().requires_grad(false));
    if (!pixels.empty()) {
        auto pix = torch::tensor(pixels, torch::kInt64);
        auto corners = mesh.triangles.index_select(0, torch::tensor(tri_ids, torch::kInt64)); // N×3
        auto verts = projected.index_select(0, corners.reshape({-1})).reshape({-1, 3, 3});   // N×3×xyz
        auto dopts = projected.options().requires_grad(false);
        auto px = ((pix % resolution).to(dopts.dtype()) + 0.5) * (2.0 / resolution) - 1.0;
        auto py = (torch::div(pix, resolution, "floor").to(dopts.dtype()) + 0.5) * (2.0 / resolution) - 1.0;
        auto x = verts.select(2, 0);
        auto y = verts.select(2, 1);
        auto edge = [&](int ia, int ib) {
            return (x.select(1, ib) - x.select(1, ia)) * (py - y.select(1, ia)) -
                   (y.select(1, ib) - y.select(1, ia)) * (px - x.select(1, ia));
        };
        auto area = (x.select(1, 1) - x.select(1, 0)) * (y.select(1, 2) - y.select(1, 0)) -
                    (y.select(1, 1) - y.select(1, 0)) * (x.select(1, 2) - x.select(1, 0));
        auto bary = torch::stack({edge(1, 2), edge(2, 0), edge(0, 1)}, 1) / area.unsqueeze(1); // N×3
        auto corner_uv = mesh.uv_coords.to(dopts.dtype()).index_select(0, corners.reshape({-1})).reshape({-1, 3, 2});
        auto uv = (bary.unsqueeze(2) * corner_uv).sum(1);
        uv_flat = uv_flat.index_put({pix}, uv);
        mask.index_fill_(0, pix, 1.0);
    }
    return {uv_flat.reshape({resolution, resolution, 2}), mask.reshape({resolution, resolution})};
}

torch::Tensor sample_texture(const torch::Tensor& texture, const torch::Tensor& uv, const torch::Tensor& mask)
{
    if (texture.dim() != 4 || uv.dim() != 4 || mask.dim() != 3 || texture.size(0) != uv.size(0)) {
        throw ShapeError("sample_texture expects texture B×3×U×U, uv B×H×W×2, mask B×H×W");
    }
    const auto u = texture.size(3);
    const auto v = texture.size(2);
    auto coords = torch::stack({uv.select(3, 0) * static_cast<double>(u) - 0.5,
                                uv.select(3, 1) * static_cast<double>(v) - 0.5},
                               -1);
    auto m = mask.unsqueeze(1).to(texture.scalar_type());
    return bilinear_sample(texture, coords) * m + kBackgroundFill * (1 - m);
}

RasterOutput rasterize(const FaceMesh& mesh, const torch::Tensor& projected, const torch::Tensor& uv_texture,
                       int64_t resolution)
{
    if (uv_texture.dim() != 3 || uv_texture.size(1) != uv_texture.size(2)) {
        throw ShapeError("uv texture must be C×U×U");
    }
    auto [uv, mask] = pixel_uv_coords(mesh, projected, resolution);
    const auto dtype = uv_texture.scalar_type();
    RasterOutput out;
    out.image = sample_texture(uv_texture.unsqueeze(0), uv.to(dtype).unsqueeze(0), mask.unsqueeze(0)).squeeze(0);
    out.mask = mask.to(dtype);
    const auto frags = rasterize_fragments(mesh.triangles, projected, resolution);
    out.triangle_id = torch::empty({resolution, resolution}, torch::kInt64);
    out.barycentric = torch::zeros({resolution, resolution, 3}, torch::kFloat64);
    auto tid = out.triangle_id.accessor<int64_t, 2>();
    auto bary = out.barycentric.accessor<double, 3>();
    for (int64_t r = 0; r < resolution; ++r) {
        for (int64_t c = 0; c < resolution; ++c) {
            const auto i = static_cast<size_t>(r * resolution + c);
            tid[r][c] = frags.triangle_id[i];
            if (frags.triangle_id[i] >= 0) {
                for (int k = 0; k < 3; ++k) {
                    bary[r][c][k] = frags.barycentric[i][k];
                }
            }
        }
    }
    return out;
}

torch::Tensor composite(const torch::Tensor& background, const torch::Tensor& rendered, const torch::Tensor& mask)
{
    if (background.sizes() != rendered.sizes()) {
        throw ShapeError("composite: background and rendered images differ in shape");
    }
    if (!((mask == 0) | (mask == 1)).all().item<bool>()) {
        throw ValidationError("composite: mask must be binary");
    }
    auto m = mask;
    if (m.dim() == background.dim() - 1) {
        m = m.unsqueeze(-3);
    }
    if (m.size(-1) != background.size(-1) || m.size(-2) != background.size(-2)) {
        throw ShapeError("composite: mask resolution differs from the images");
    }
    return torch::where(m > 0.5, rendered, background);
}

torch::Tensor target_mask(const FaceMesh& mesh, const MotionParams& target_motion, const CameraConfig& camera,
                          int64_t resolution)
{
    const auto projected = project_vertices(mesh, target_motion, camera);
    const auto frags = rasterize_fragments(mesh.triangles, projected, resolution);
    auto mask = torch::zeros({resolution, resolution}, torch::kFloat32);
    auto m = mask.accessor<float, 2>();
    for (int64_t i = 0; i < resolution * resolution; ++i) {
        if (frags.covered(i)) {
            m[i / resolution][i % resolution] = 1.0f;
        }
    }
    return mask;
}

torch::Tensor render_frame(const FaceMesh& mesh, const MotionParams& motion, const CameraConfig& camera,
                           const torch::Tensor& uv_texture, const torch::Tensor& background)
{
    if (background.dim() != 3 || background.size(1) != background.size(2)) {
        throw ShapeError("render_frame expects a square 3×H×W background");
    }
    const auto out = rasterize(mesh, project_vertices(mesh, motion, camera), uv_texture, background.size(1));
    return composite(background, out.image.to(background.scalar_type()), out.mask.to(background.scalar_type()));
}

torch::Tensor triangle_id_image(const RasterFragments& fragments)
{
    const auto n = fragments.resolution;
    auto img = torch::zeros({n, n}, torch::kInt32);
    auto a = img.accessor<int32_t, 2>();
    for (int64_t i = 0; i < n * n; ++i) {
        a[i / n][i % n] = std::min<int32_t>(fragments.triangle_id[static_cast<size_t>(i)] + 1, 65535);
    }
    return img;
}

} // namespace uvreenact
