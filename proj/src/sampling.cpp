#include "uvreenact/sampling.hpp"

#include "uvreenact/errors.hpp"

#include <algorithm>

namespace uvreenact {

namespace {

// Lower corner index and fractional weight along one axis; the index is kept in [0, n-2]
// so the upper neighbour always exists and the last pixel is reached with weight 1.
std::pair<torch::Tensor, torch::Tensor> axis_split(const torch::Tensor& pos, int64_t n)
{
    auto clamped = pos.clamp(0.0, static_cast<double>(n - 1));
    if (n == 1) {
        return {torch::zeros_like(clamped, torch::kInt64), clamped * 0.0};
    }
    auto lower = clamped.detach().floor().clamp(0.0, static_cast<double>(n - 2));
    return {lower.to(torch::kInt64), clamped - lower};
}

} // namespace

torch::Tensor bilinear_sample(const torch::Tensor& image, const torch::Tensor& coords)
{
    if (image.dim() != 4 || coords.dim() != 4 || coords.size(3) != 2 || coords.size(0) != image.size(0)) {
        throw ShapeError("bilinear_sample expects image B×C×H×W and coords B×Ho×Wo×2");
    }
    const auto b = image.size(0);
    const auto c = image.size(1);
    const auto h = image.size(2);
    const auto w = image.size(3);
    const auto ho = coords.size(1);
    const auto wo = coords.size(2);

    auto [x0, wx] = axis_split(coords.select(3, 0), w);
    auto [y0, wy] = axis_split(coords.select(3, 1), h);
    auto x1 = (x0 + 1).clamp_max(w - 1);
    auto y1 = (y0 + 1).clamp_max(h - 1);

    auto flat = image.reshape({b, c, h * w});
    auto gather = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
        auto idx = (yi * w + xi).reshape({b, 1, ho * wo}).expand({b, c, ho * wo});
        return flat.gather(2, idx).reshape({b, c, ho, wo});
    };
    wx = wx.unsqueeze(1);
    wy = wy.unsqueeze(1);
    return (1 - wy) * ((1 - wx) * gather(y0, x0) + wx * gather(y0, x1)) +
           wy * ((1 - wx) * gather(y1, x0) + wx * gather(y1, x1));
}

torch::Tensor align_corners_to_pixels(const torch::Tensor& grid, int64_t height, int64_t width)
{
    // Float32 cannot hold -1 + 2j/(n-1) exactly, so positions within a few ulps of a pixel centre are
    // snapped onto it (value only; the gradient passes straight through).
    const double eps = grid.scalar_type() == torch::kFloat64 ? 2.2e-16 : 1.2e-7;
    const double tol = 8.0 * eps * static_cast<double>(std::max(height, width));
    auto snap = [tol](const torch::Tensor& p) {
        const auto r = p.detach().round();
        return torch::where((p.detach() - r).abs() <= tol, p + (r - p.detach()), p);
    };
    const auto g = grid.to(torch::kFloat64);
    auto x = snap((g.select(-1, 0) + 1.0) * (0.5 * static_cast<double>(width - 1)));
    auto y = snap((g.select(-1, 1) + 1.0) * (0.5 * static_cast<double>(height - 1)));
    return torch::stack({x, y}, -1).to(grid.scalar_type());
}

torch::Tensor pixel_centers_to_pixels(const torch::Tensor& grid, int64_t height, int64_t width)
{
    auto x = (grid.select(-1, 0) + 1.0) * (0.5 * static_cast<double>(width)) - 0.5;
    auto y = (grid.select(-1, 1) + 1.0) * (0.5 * static_cast<double>(height)) - 0.5;
    return torch::stack({x, y}, -1);
}

torch::Tensor identity_grid(int64_t height, int64_t width, torch::TensorOptions options)
{
    auto dopts = torch::TensorOptions().dtype(torch::kFloat64);
    auto xs = width > 1 ? torch::arange(width, dopts) * (2.0 / static_cast<double>(width - 1)) - 1.0
                        : torch::zeros({1}, dopts);
    auto ys = height > 1 ? torch::arange(height, dopts) * (2.0 / static_cast<double>(height - 1)) - 1.0
                         : torch::zeros({1}, dopts);
    auto gy = ys.view({height, 1}).expand({height, width});
    auto gx = xs.view({1, width}).expand({height, width});
    auto grid = torch::stack({gx, gy}, -1);
    return options.has_dtype() ? grid.to(options.dtype()) : grid.to(torch::kFloat32);
}

} // namespace uvreenact
