#pragma once

#include "uvreenact/face_model.hpp"
#include "uvreenact/perceptual.hpp"

#include <torch/torch.h>

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uvreenact {

/// Mean over frames of the mean absolute difference of the 64 expression coefficients.
double aed(std::span<const MotionParams> pred, std::span<const MotionParams> gt);

/// Same as aed over the 6 pose values (angle then trans).
double apd(std::span<const MotionParams> pred, std::span<const MotionParams> gt);

/// Cosine similarity; throws ValidationError for a zero vector.
double csim(std::span<const double> a, std::span<const double> b);

/**
 * Fréchet distance between Gaussian fits of two N×D embedding sets (rows are samples),
 * ‖μa−μb‖² + Tr(Σa + Σb − 2(Σa^½ Σb Σa^½)^½), unbiased covariances, negative eigenvalues clamped.
 */
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/**
 * LPIPS-style distance: each feature layer is normalized to unit length over channels at every
 * location, squared differences are summed over channels and averaged over locations and batch,
 * and the per-layer values are averaged.
 */
double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, const PerceptualExtractor& extractor);

/// Seeded random projection of a downsampled image, used as the identity embedding for CSIM.
class IdentityEmbedder
{
public:
    explicit IdentityEmbedder(uint64_t seed = 99, int64_t dims = 128, int64_t side = 16);

    /// 3×H×W or B×3×H×W → B×dims (float64).
    torch::Tensor embed(const torch::Tensor& images) const;

private:
    int64_t side_;
    torch::Tensor projection_;
};

/// Global-average-pooled pyramid activations of every layer, concatenated: B×3×H×W → B×ΣC.
Eigen::MatrixXd fid_features(const torch::Tensor& images, const PerceptualExtractor& extractor);

struct MetricsReport
{
    std::string mode = "same";
    int64_t n_frames = 0;
    double fid = 0.0;
    double lpips = 0.0;
    double aed = 0.0;
    std::optional<double> apd;
    double csim = 0.0;
    /// Mean absolute pixel error against ground-truth targets (same mode only).
    std::optional<double> pixel_l1;

    std::string to_json() const;
};

} // namespace uvreenact
