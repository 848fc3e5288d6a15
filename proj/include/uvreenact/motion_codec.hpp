#pragma once

#include "uvreenact/face_model.hpp"

#include <torch/torch.h>

#include <vector>

namespace uvreenact {

inline constexpr int kLatentDims = 256;

/// Temporal stack of motion descriptors for frames t-i..t+i, flattened in temporal order.
struct MotionWindow
{
    std::vector<float> frames;
    int half_width = 0;

    int64_t width() const { return static_cast<int64_t>(frames.size()); }
};

/// Out-of-range frame indices are clamped to the first/last frame.
MotionWindow assemble_window(const std::vector<MotionParams>& sequence, int64_t t, int half_width);

/// Input width of the motion encoder for a given half-width: 70·(2i+1).
constexpr int64_t window_width(int half_width) { return kMotionDims * (2 * half_width + 1); }

/**
 * f^E: three affine layers with SiLU in between, window → 256-dim latent.
 */
class MotionEncoderImpl : public torch::nn::Module
{
public:
    explicit MotionEncoderImpl(int half_width = 1, int hidden = 256);

    /// window: B×70(2i+1) → B×256.
    torch::Tensor forward(const torch::Tensor& window);

    int half_width() const { return half_width_; }

private:
    int half_width_;
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, fc3_{nullptr};
};
TORCH_MODULE(MotionEncoder);

/// Convenience wrapper with width checking for a single window.
torch::Tensor encode_motion(const MotionWindow& window, MotionEncoder& encoder);

inline constexpr double kAdaInEpsilon = 1e-5;

/**
 * Adaptive instance normalization.
 *
 * features: B×C×H×W (or C×H×W); scale, bias: B×C (or C). Each channel is whitened with its own
 * mean and sqrt(var + 1e-5) over H×W (population variance), then multiplied by scale and shifted by bias.
 */
torch::Tensor adain(const torch::Tensor& features, const torch::Tensor& scale, const torch::Tensor& bias);

/// Fully connected map z → (scale, bias) for one injection site with `channels` feature channels.
class AdaInHeadImpl : public torch::nn::Module
{
public:
    AdaInHeadImpl(int channels, int latent_dims = kLatentDims);

    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& latent);

    int channels() const { return channels_; }
    torch::nn::Linear& linear() { return fc_; }

private:
    int channels_;
    torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(AdaInHead);

/// Head output applied to a feature map; throws ShapeError on channel mismatch.
torch::Tensor adain(const torch::Tensor& features, const torch::Tensor& latent, AdaInHead& head);

} // namespace uvreenact
