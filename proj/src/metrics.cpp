#include "uvreenact/metrics.hpp"

#include "uvreenact/errors.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>

namespace uvreenact {

namespace {

template <typename Extract>
double mean_abs_distance(std::span<const MotionParams> pred, std::span<const MotionParams> gt, Extract extract)
{
    if (pred.size() != gt.size()) {
        throw ShapeError("metric inputs differ in length (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(gt.size()) + ")");
    }
    if (pred.empty()) {
        throw ValidationError("metric inputs are empty");
    }
    double total = 0.0;
    for (size_t f = 0; f < pred.size(); ++f) {
        const auto a = extract(pred[f]);
        const auto b = extract(gt[f]);
        double frame = 0.0;
        for (size_t k = 0; k < a.size(); ++k) {
            frame += std::abs(static_cast<double>(a[k]) - static_cast<double>(b[k]));
        }
        total += frame / static_cast<double>(a.size());
    }
    return total / static_cast<double>(pred.size());
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean)
{
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

} // namespace

double aed(std::span<const MotionParams> pred, std::span<const MotionParams> gt)
{
    return mean_abs_distance(pred, gt, [](const MotionParams& m) { return std::vector<float>(m.exp.begin(), m.exp.end()); });
}

double apd(std::span<const MotionParams> pred, std::span<const MotionParams> gt)
{
    return mean_abs_distance(pred, gt, [](const MotionParams& m) {
        return std::vector<float>{m.angle[0], m.angle[1], m.angle[2], m.trans[0], m.trans[1], m.trans[2]};
    });
}

double csim(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw ShapeError("csim: vectors differ in length");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw ValidationError("csim: zero-norm vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.rows() < 2 || b.rows() < 2) {
        throw ValidationError("fid needs at least two samples per set");
    }
    if (a.cols() != b.cols()) {
        throw ShapeError("fid: embedding sets differ in dimension");
    }
    if (!a.allFinite() || !b.allFinite()) {
        throw ValidationError("fid: embeddings must be finite");
    }
    const Eigen::RowVectorXd mu_a = a.colwise().mean();
    const Eigen::RowVectorXd mu_b = b.colwise().mean();
    const Eigen::MatrixXd cov_a = covariance(a, mu_a);
    const Eigen::MatrixXd cov_b = covariance(b, mu_b);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(cov_a);
    const Eigen::VectorXd root_vals = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd root_a = eig_a.eigenvectors() * root_vals.asDiagonal() * eig_a.eigenvectors().transpose();
    Eigen::MatrixXd inner = root_a * cov_b * root_a;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_inner(inner, Eigen::EigenvaluesOnly);
    const double trace_root = eig_inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_root;
    return std::max(value, 0.0);
}

double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, const PerceptualExtractor& extractor)
{
    if (a.sizes() != b.sizes()) {
        throw ShapeError("perceptual_distance: images differ in shape");
    }
    torch::NoGradGuard guard;
    auto batch = [](const torch::Tensor& x) { return x.dim() == 3 ? x.unsqueeze(0) : x; };
    const auto fa = extractor.features(batch(a).to(torch::kFloat64));
    const auto fb = extractor.features(batch(b).to(torch::kFloat64));
    double total = 0.0;
    for (size_t i = 0; i < fa.size(); ++i) {
        auto na = fa[i] / (fa[i].square().sum(1, true).sqrt() + 1e-10);
        auto nb = fb[i] / (fb[i].square().sum(1, true).sqrt() + 1e-10);
        total += (na - nb).square().sum(1).mean().item<double>();
    }
    return total / static_cast<double>(fa.size());
}

IdentityEmbedder::IdentityEmbedder(uint64_t seed, int64_t dims, int64_t side) : side_(side)
{
    auto gen = at::detail::createCPUGenerator(seed);
    projection_ = torch::randn({3 * side * side, dims}, gen, torch::kFloat64) / std::sqrt(static_cast<double>(dims));
}

torch::Tensor IdentityEmbedder::embed(const torch::Tensor& images) const
{
    auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
    if (x.dim() != 4 || x.size(1) != 3) {
        throw ShapeError("identity embedder expects 3×H×W or B×3×H×W images");
    }
    torch::NoGradGuard guard;
    auto small = torch::adaptive_avg_pool2d(x.to(torch::kFloat64), {side_, side_});
    return torch::matmul(small.reshape({x.size(0), -1}), projection_);
}

Eigen::MatrixXd fid_features(const torch::Tensor& images, const PerceptualExtractor& extractor)
{
    torch::NoGradGuard guard;
    auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
    std::vector<torch::Tensor> pooled;
    for (const auto& f : extractor.features(x.to(torch::kFloat64))) {
        pooled.push_back(f.mean({2, 3}));
    }
    auto feats = torch::cat(pooled, 1).contiguous();
    Eigen::MatrixXd out(feats.size(0), feats.size(1));
    auto acc = feats.accessor<double, 2>();
    for (int64_t r = 0; r < feats.size(0); ++r) {
        for (int64_t c = 0; c < feats.size(1); ++c) {
            out(r, c) = acc[r][c];
        }
    }
    return out;
}

std::string MetricsReport::to_json() const
{
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["n_frames"] = n_frames;
    j["fid"] = fid;
    j["lpips"] = lpips;
    j["aed"] = aed;
    if (apd) {
        j["apd"] = *apd;
    }
    j["csim"] = csim;
    if (pixel_l1) {
        j["pixel_l1"] = *pixel_l1;
    }
    return j.dump(2);
}

} // namespace uvreenact
