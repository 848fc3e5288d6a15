#include "uvreenact/motion_codec.hpp"

#include "uvreenact/errors.hpp"

#include <algorithm>
#include <string>

namespace uvreenact {

MotionWindow assemble_window(const std::vector<MotionParams>& sequence, int64_t t, int half_width)
{
    if (sequence.empty()) {
        throw ValidationError("assemble_window: empty motion sequence");
    }
    if (half_width < 0) {
        throw ValidationError("assemble_window: negative half-width");
    }
    const auto n = static_cast<int64_t>(sequence.size());
    if (t < 0 || t >= n) {
        throw ValidationError("assemble_window: frame index " + std::to_string(t) + " outside [0, " +
                              std::to_string(n) + ")");
    }
    MotionWindow window;
    window.half_width = half_width;
    window.frames.reserve(window_width(half_width));
    for (int64_t k = t - half_width; k <= t + half_width; ++k) {
        const auto d = motion_descriptor(sequence[std::clamp<int64_t>(k, 0, n - 1)]);
        window.frames.insert(window.frames.end(), d.begin(), d.end());
    }
    return window;
}

MotionEncoderImpl::MotionEncoderImpl(int half_width, int hidden) : half_width_(half_width)
{
    fc1_ = register_module("fc1", torch::nn::Linear(window_width(half_width), hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, hidden));
    fc3_ = register_module("fc3", torch::nn::Linear(hidden, kLatentDims));
}

torch::Tensor MotionEncoderImpl::forward(const torch::Tensor& window)
{
    if (window.dim() != 2 || window.size(1) != window_width(half_width_)) {
        throw ShapeError("motion encoder expects B×" + std::to_string(window_width(half_width_)) + " input");
    }
    auto h = torch::silu(fc1_->forward(window));
    h = torch::silu(fc2_->forward(h));
    return fc3_->forward(h);
}

torch::Tensor encode_motion(const MotionWindow& window, MotionEncoder& encoder)
{
    if (window.width() != window_width(encoder->half_width())) {
        throw ShapeError("window width " + std::to_string(window.width()) + " does not match encoder input " +
                         std::to_string(window_width(encoder->half_width())));
    }
    const auto dtype = encoder->parameters().front().scalar_type();
    auto x = torch::tensor(window.frames, torch::kFloat32).to(dtype).unsqueeze(0);
    return encoder->forward(x).squeeze(0);
}

torch::Tensor adain(const torch::Tensor& features, const torch::Tensor& scale, const torch::Tensor& bias)
{
    if (features.dim() == 3) {
        return adain(features.unsqueeze(0), scale.reshape({1, -1}), bias.reshape({1, -1})).squeeze(0);
    }
    if (features.dim() != 4 || scale.sizes() != bias.sizes() || scale.dim() != 2 ||
        scale.size(0) != features.size(0) || scale.size(1) != features.size(1)) {
        throw ShapeError("adain: scale/bias must be B×C matching the feature map channels");
    }
    auto mean = features.mean({2, 3}, true);
    auto var = (features - mean).square().mean({2, 3}, true);
    auto normalized = (features - mean) / torch::sqrt(var + kAdaInEpsilon);
    return normalized * scale.unsqueeze(-1).unsqueeze(-1) + bias.unsqueeze(-1).unsqueeze(-1);
}

AdaInHeadImpl::AdaInHeadImpl(int channels, int latent_dims) : channels_(channels)
{
    fc_ = register_module("fc", torch::nn::Linear(latent_dims, 2 * channels));
    torch::NoGradGuard guard;
    fc_->weight.mul_(0.1);
    fc_->bias.zero_();
    fc_->bias.narrow(0, 0, channels).fill_(1.0);
}

std::pair<torch::Tensor, torch::Tensor> AdaInHeadImpl::forward(const torch::Tensor& latent)
{
    auto out = fc_->forward(latent.dim() == 1 ? latent.unsqueeze(0) : latent);
    return {out.narrow(1, 0, channels_), out.narrow(1, channels_, channels_)};
}

torch::Tensor adain(const torch::Tensor& features, const torch::Tensor& latent, AdaInHead& head)
{
    const auto channel_dim = features.dim() == 3 ? 0 : 1;
    if (features.size(channel_dim) != head->channels()) {
        throw ShapeError("adain: head produces " + std::to_string(head->channels()) + " channels, feature map has " +
                         std::to_string(features.size(channel_dim)));
    }
    auto [scale, bias] = head->forward(latent);
    if (features.dim() == 3) {
        return adain(features, scale.squeeze(0), bias.squeeze(0));
    }
    return adain(features, scale, bias);
}

} // namespace uvreenact
