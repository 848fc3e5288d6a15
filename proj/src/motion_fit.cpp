#include "uvreenact/motion_fit.hpp"

#include "uvreenact/diff_render.hpp"
#include "uvreenact/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace uvreenact {

namespace {

class FastRenderer
{
public:
    explicit FastRenderer(const FaceAppearance& app) : app_(app)
    {
        if (!app.basis) {
            throw ValidationError("appearance has no morphable basis");
        }
        const auto& basis = *app.basis;
        const auto mesh = build_mesh(basis, app.identity, std::vector<float>(kExpDims, 0.0f));
        base_ = to_matrix(mesh.vertices.reshape({-1, 1}));
        exp_basis_ = to_matrix(basis.exp_basis.reshape({-1, kExpDims}));
        triangles_ = basis.triangles;
        uv_ = basis.uv_coords.to(torch::kFloat64).contiguous();
        texture_ = app.texture.to(torch::kFloat64).contiguous();
        background_ = app.background.to(torch::kFloat64).contiguous();
        resolution_ = background_.size(1);
    }

    int64_t resolution() const { return resolution_; }

    /// Channel-major 3×H×W values.
    Eigen::VectorXd render(const MotionParams& motion) const
    {
        Eigen::VectorXd exp(kExpDims);
        for (int k = 0; k < kExpDims; ++k) {
            exp[k] = motion.exp[static_cast<size_t>(k)];
        }
        const Eigen::VectorXd flat = base_ + exp_basis_ * exp;
        const auto v = flat.size() / 3;
        const Eigen::Matrix3d r = euler_to_rotation({motion.angle[0], motion.angle[1], motion.angle[2]});
        auto projected = torch::empty({v, 3}, torch::kFloat64);
        auto p = projected.accessor<double, 2>();
        const double s = app_.camera.scale;
        const Eigen::Vector3d offset(motion.trans[0] + app_.camera.principal_point[0],
                                     motion.trans[1] + app_.camera.principal_point[1], motion.trans[2]);
        for (int64_t i = 0; i < v; ++i) {
            const Eigen::Vector3d q = s * (r * flat.segment<3>(3 * i)) + offset;
            p[i][0] = q.x();
            p[i][1] = q.y();
            p[i][2] = q.z();
        }
        const auto frags = rasterize_fragments(triangles_, projected, resolution_);
        const auto n = resolution_ * resolution_;
        Eigen::VectorXd out(3 * n);
        const double* bg = background_.data_ptr<double>();
        std::copy(bg, bg + 3 * n, out.data());
        const auto tri = triangles_.accessor<int64_t, 2>();
        const auto uv = uv_.accessor<double, 2>();
        const auto tex = texture_.accessor<double, 3>();
        const auto u_res = texture_.size(2);
        for (int64_t i = 0; i < n; ++i) {
            if (!frags.covered(i)) {
                continue;
            }
            const auto k = frags.triangle_id[static_cast<size_t>(i)];
            const auto& b = frags.barycentric[static_cast<size_t>(i)];
            double tu = 0.0, tv = 0.0;
            for (int c = 0; c < 3; ++c) {
                tu += b[c] * uv[tri[k][c]][0];
                tv += b[c] * uv[tri[k][c]][1];
            }
            const double x = std::clamp(tu * u_res - 0.5, 0.0, static_cast<double>(u_res - 1));
            const double y = std::clamp(tv * u_res - 0.5, 0.0, static_cast<double>(u_res - 1));
            const auto x0 = std::min<int64_t>(static_cast<int64_t>(x), std::max<int64_t>(u_res - 2, 0));
            const auto y0 = std::min<int64_t>(static_cast<int64_t>(y), std::max<int64_t>(u_res - 2, 0));
            const auto x1 = std::min(x0 + 1, u_res - 1), y1 = std::min(y0 + 1, u_res - 1);
            const double fx = x - x0, fy = y - y0;
            for (int c = 0; c < 3; ++c) {
                out[c * n + i] = (1 - fy) * ((1 - fx) * tex[c][y0][x0] + fx * tex[c][y0][x1]) +
                                 fy * ((1 - fx) * tex[c][y1][x0] + fx * tex[c][y1][x1]);
            }
        }
        return out;
    }

private:
    static Eigen::MatrixXd to_matrix(const torch::Tensor& t)
    {
        const auto d = t.to(torch::kFloat64).contiguous();
        Eigen::MatrixXd m(d.size(0), d.size(1));
        const auto a = d.accessor<double, 2>();
        for (int64_t r = 0; r < d.size(0); ++r) {
            for (int64_t c = 0; c < d.size(1); ++c) {
                m(r, c) = a[r][c];
            }
        }
        return m;
    }

    const FaceAppearance& app_;
    Eigen::VectorXd base_;
    Eigen::MatrixXd exp_basis_;
    torch::Tensor triangles_;
    torch::Tensor uv_;
    torch::Tensor texture_;
    torch::Tensor background_;
    int64_t resolution_ = 0;
};

Eigen::VectorXd blur(const Eigen::VectorXd& image, int64_t side, double sigma)
{
    if (sigma <= 0.0) {
        return image;
    }
    Eigen::VectorXd out(image.size());
    const auto n = side * side;
    for (int c = 0; c < 3; ++c) {
        cv::Mat src(static_cast<int>(side), static_cast<int>(side), CV_64F, const_cast<double*>(image.data() + c * n));
        cv::Mat dst(static_cast<int>(side), static_cast<int>(side), CV_64F, out.data() + c * n);
        cv::GaussianBlur(src, dst, cv::Size(0, 0), sigma, sigma, cv::BORDER_REPLICATE);
    }
    return out;
}

MotionParams from_vector(const Eigen::VectorXd& x)
{
    std::vector<float> values(kMotionDims);
    for (int i = 0; i < kMotionDims; ++i) {
        values[static_cast<size_t>(i)] = static_cast<float>(x[i]);
    }
    return split_descriptor(values);
}

} // namespace

torch::Tensor render_appearance(const FaceAppearance& appearance, const MotionParams& motion)
{
    const FastRenderer renderer(appearance);
    const auto side = renderer.resolution();
    const Eigen::VectorXd img = renderer.render(motion);
    return torch::from_blob(const_cast<double*>(img.data()), {3, side, side}, torch::kFloat64).to(torch::kFloat32);
}

MotionFit fit_motion(const torch::Tensor& observed, const FaceAppearance& appearance, const MotionFitOptions& options,
                     const MotionParams& init)
{
    const FastRenderer renderer(appearance);
    const auto side = renderer.resolution();
    if (observed.dim() != 3 || observed.size(0) != 3 || observed.size(1) != side || observed.size(2) != side) {
        throw ShapeError("fit_motion: observed frame must match the appearance background (3×H×W)");
    }
    if (options.stages.empty()) {
        throw ValidationError("fit_motion: at least one stage is required");
    }
    const auto obs_t = observed.to(torch::kFloat64).contiguous();
    const Eigen::Map<const Eigen::VectorXd> obs(obs_t.data_ptr<double>(), obs_t.numel());

    Eigen::VectorXd steps(kMotionDims);
    steps.head(kExpDims).setConstant(options.exp_step);
    steps.segment<3>(kExpDims).setConstant(options.angle_step);
    steps.tail<3>().setConstant(options.trans_step);

    const auto desc = motion_descriptor(init);
    Eigen::VectorXd x(kMotionDims);
    for (int i = 0; i < kMotionDims; ++i) {
        x[i] = desc[static_cast<size_t>(i)];
    }
    MotionFit fit;
    Eigen::VectorXd r;
    for (const auto& stage : options.stages) {
        const Eigen::VectorXd target = blur(obs, side, stage.blur_sigma);
        auto residual = [&](const Eigen::VectorXd& params) {
            return Eigen::VectorXd(blur(renderer.render(from_vector(params)), side, stage.blur_sigma) - target);
        };
        Eigen::VectorXd prior = Eigen::VectorXd::Zero(kMotionDims);
        prior.head(kExpDims).setConstant(stage.exp_prior);
        auto cost_of = [&](const Eigen::VectorXd& res, const Eigen::VectorXd& params) {
            return res.squaredNorm() + (prior.array() * params.array().square()).sum();
        };
        r = residual(x);
        double cost = cost_of(r, x);
        double lambda = 1e-2;
        for (int it = 0; it < options.iterations; ++it) {
            Eigen::MatrixXd jac(r.size(), kMotionDims);
            for (int k = 0; k < kMotionDims; ++k) {
                Eigen::VectorXd xp = x, xm = x;
                xp[k] += steps[k];
                xm[k] -= steps[k];
                jac.col(k) = (residual(xp) - residual(xm)) / (2.0 * steps[k]);
            }
            const Eigen::MatrixXd jtj = jac.transpose() * jac;
            const Eigen::VectorXd grad = jac.transpose() * r + (prior.array() * x.array()).matrix();
            bool improved = false;
            for (int attempt = 0; attempt < 8; ++attempt) {
                Eigen::MatrixXd system = jtj;
                system.diagonal() += lambda * (jtj.diagonal().array() + 1e-6).matrix() + prior;
                const Eigen::VectorXd delta = system.ldlt().solve(-grad);
                const Eigen::VectorXd candidate = x + delta;
                const Eigen::VectorXd rc = residual(candidate);
                const double c = cost_of(rc, candidate);
                if (c < cost) {
                    x = candidate;
                    r = rc;
                    improved = cost - c > 1e-10 * cost;
                    cost = c;
                    lambda = std::max(lambda / 3.0, 1e-7);
                    break;
                }
                lambda *= 4.0;
            }
            ++fit.iterations;
            if (!improved) {
                break;
            }
        }
    }
    fit.motion = from_vector(x);
    fit.rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
    return fit;
}

} // namespace uvreenact
