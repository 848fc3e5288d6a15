#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace uvreenact {

/// Maps B×3×H×W images to a list of feature maps φ_i. Must be differentiable in the input.
class PerceptualExtractor
{
public:
    virtual ~PerceptualExtractor() = default;
    virtual std::vector<torch::Tensor> features(const torch::Tensor& images) const = 0;
    virtual std::string kind() const = 0;
};

/// φ_0 = the image itself.
class IdentityExtractor final : public PerceptualExtractor
{
public:
    std::vector<torch::Tensor> features(const torch::Tensor& images) const override { return {images}; }
    std::string kind() const override { return "identity"; }
};

/**
 * Fixed random-weight convolutional pyramid (no pretrained download). Each stage is a 3×3
 * convolution followed by SiLU; stages after the first start with a 2×2 average pool.
 * Weights are drawn from a seeded generator, so two instances with the same seed agree bit for bit.
 */
class ConvPyramidExtractor final : public PerceptualExtractor
{
public:
    explicit ConvPyramidExtractor(uint64_t seed = 1234, std::vector<int> channels = {8, 16, 32, 32});

    std::vector<torch::Tensor> features(const torch::Tensor& images) const override;
    std::string kind() const override { return "pyramid"; }
    int64_t output_channels() const { return channels_.back(); }

private:
    std::vector<int> channels_;
    std::vector<torch::Tensor> weights_;
    std::vector<torch::Tensor> biases_;
};

std::shared_ptr<PerceptualExtractor> make_extractor(const std::string& kind, uint64_t seed = 1234);

/// Σ_i mean |φ_i(a) − φ_i(b)|; each layer is averaged over its elements (batch included).
torch::Tensor perceptual_l1(const torch::Tensor& a, const torch::Tensor& b, const PerceptualExtractor& extractor);

/// Same as perceptual_l1 with precomputed features of the first argument.
torch::Tensor perceptual_l1(const std::vector<torch::Tensor>& features_a, const torch::Tensor& b,
                            const PerceptualExtractor& extractor);

} // namespace uvreenact
