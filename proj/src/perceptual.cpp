#include "uvreenact/perceptual.hpp"

#include "uvreenact/errors.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

namespace uvreenact {

ConvPyramidExtractor::ConvPyramidExtractor(uint64_t seed, std::vector<int> channels) : channels_(std::move(channels))
{
    if (channels_.empty()) {
        throw ValidationError("pyramid extractor needs at least one stage");
    }
    auto gen = at::detail::createCPUGenerator(seed);
    int in = 3;
    for (int out : channels_) {
        const double std = std::sqrt(2.0 / (9.0 * in));
        weights_.push_back(torch::randn({out, in, 3, 3}, gen, torch::kFloat64) * std);
        biases_.push_back(torch::randn({out}, gen, torch::kFloat64) * 0.1);
        in = out;
    }
}

std::vector<torch::Tensor> ConvPyramidExtractor::features(const torch::Tensor& images) const
{
    if (images.dim() != 4 || images.size(1) != 3) {
        throw ShapeError("perceptual extractor expects B×3×H×W images");
    }
    std::vector<torch::Tensor> out;
    auto h = images;
    for (size_t i = 0; i < weights_.size(); ++i) {
        if (i > 0) {
            h = torch::avg_pool2d(h, 2);
        }
        h = torch::silu(torch::conv2d(h, weights_[i].to(images.scalar_type()), biases_[i].to(images.scalar_type()),
                                      1, 1));
        out.push_back(h);
    }
    return out;
}

std::shared_ptr<PerceptualExtractor> make_extractor(const std::string& kind, uint64_t seed)
{
    if (kind == "identity") {
        return std::make_shared<IdentityExtractor>();
    }
    if (kind == "pyramid") {
        return std::make_shared<ConvPyramidExtractor>(seed);
    }
    throw ValidationError("unknown extractor kind '" + kind + "' (expected pyramid or identity)");
}

torch::Tensor perceptual_l1(const std::vector<torch::Tensor>& features_a, const torch::Tensor& b,
                            const PerceptualExtractor& extractor)
{
    const auto features_b = extractor.features(b);
    if (features_a.size() != features_b.size()) {
        throw ShapeError("perceptual_l1: feature layer count mismatch");
    }
    auto total = torch::zeros({}, b.options());
    for (size_t i = 0; i < features_a.size(); ++i) {
        if (features_a[i].sizes() != features_b[i].sizes()) {
            throw ShapeError("perceptual_l1: feature shape mismatch at layer " + std::to_string(i));
        }
        total = total + (features_a[i] - features_b[i]).abs().mean();
    }
    return total;
}

torch::Tensor perceptual_l1(const torch::Tensor& a, const torch::Tensor& b, const PerceptualExtractor& extractor)
{
    if (a.sizes() != b.sizes()) {
        throw ShapeError("perceptual_l1: images differ in shape");
    }
    return perceptual_l1(extractor.features(a), b, extractor);
}

} // namespace uvreenact
