#pragma once

#include "uvreenact/face_model.hpp"

#include <torch/torch.h>

#include <memory>
#include <vector>

namespace uvreenact {

/// Everything needed to synthesize a person's frame except the motion.
struct FaceAppearance
{
    std::shared_ptr<const MorphableBasis> basis;
    IdentityParams identity;
    torch::Tensor texture;    // 3×U×U
    torch::Tensor background; // 3×H×W
    CameraConfig camera;
};

/// One pass of the coarse-to-fine schedule.
struct FitStage
{
    /// Gaussian blur applied to both images before comparison (pixels); 0 disables.
    double blur_sigma = 1.0;
    /// Ridge weight pulling expression coefficients toward zero.
    double exp_prior = 1e-3;
};

struct MotionFitOptions
{
    /// Levenberg-Marquardt iterations per stage.
    int iterations = 30;
    /// Each stage starts from the previous result. Heavy blur first widens the basin around the
    /// true motion; the later sharp stages recover the detail.
    std::vector<FitStage> stages{{8.0, 1e-2}, {4.0, 1e-3}, {2.0, 1e-4}, {1.0, 1e-5}, {0.5, 1e-5}, {0.0, 1e-5}};
    double exp_step = 0.05;
    double angle_step = 0.01;
    double trans_step = 0.005;
};

struct MotionFit
{
    MotionParams motion;
    double rms = 0.0;
    int iterations = 0;
};

/**
 * Analysis-by-synthesis motion estimate: Levenberg-Marquardt on the pixel residual between the
 * observed 3×H×W frame and the appearance rendered at a candidate motion, with a central-difference
 * Jacobian, run once per blur stage. Stands in for an external 3DMM coefficient estimator when
 * scoring generated frames.
 */
MotionFit fit_motion(const torch::Tensor& observed, const FaceAppearance& appearance,
                     const MotionFitOptions& options = {}, const MotionParams& init = {});

/// Fast non-differentiable render of the appearance at a motion (3×H×W float32).
torch::Tensor render_appearance(const FaceAppearance& appearance, const MotionParams& motion);

} // namespace uvreenact
