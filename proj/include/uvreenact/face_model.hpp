#pragma once

#include <torch/torch.h>

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace uvreenact {

inline constexpr int kExpDims = 64;
inline constexpr int kPoseDims = 6;
inline constexpr int kMotionDims = kExpDims + kPoseDims; // 70

/**
 * Linear morphable face model. All tensors are float32 on CPU.
 *
 * mean_shape V×3, id_basis V×3×D_id, exp_basis V×3×64, triangles T×3 (int64),
 * uv_coords V×2 in [0,1]².
 */
struct MorphableBasis
{
    torch::Tensor mean_shape;
    torch::Tensor id_basis;
    torch::Tensor exp_basis;
    torch::Tensor triangles;
    torch::Tensor uv_coords;

    int64_t num_vertices() const { return mean_shape.size(0); }
    int64_t num_triangles() const { return triangles.size(0); }
    int64_t id_dims() const { return id_basis.size(2); }

    /// Throws ShapeError/ValidationError if any invariant is broken.
    void validate() const;
};

struct IdentityParams
{
    std::vector<float> alpha;
};

/// Expression + pose of one frame. angle is (pitch, yaw, roll) in radians.
struct MotionParams
{
    std::array<float, kExpDims> exp{};
    std::array<float, 3> angle{};
    std::array<float, 3> trans{};

    bool operator==(const MotionParams&) const = default;
};

struct FaceMesh
{
    torch::Tensor vertices;  // V×3
    torch::Tensor triangles; // T×3 int64
    torch::Tensor uv_coords; // V×2
};

/// Weak-perspective camera: x_img = scale * (R v).xy + trans.xy + principal_point.
struct CameraConfig
{
    float scale = 1.0f;
    std::array<float, 2> principal_point{0.0f, 0.0f};

    void validate() const;
};

FaceMesh build_mesh(const MorphableBasis& basis, const IdentityParams& id, std::span<const float> exp);

/// Intrinsic X→Y→Z Euler angles: R = Rx(angle[0]) · Ry(angle[1]) · Rz(angle[2]).
Eigen::Matrix3d euler_to_rotation(const std::array<double, 3>& angle);

/**
 * Pose and project mesh vertices. Returns V×3 (same dtype as the mesh):
 * x,y in normalized image coordinates, z is depth (larger is closer to the viewer).
 * Differentiable with respect to mesh.vertices.
 */
torch::Tensor project_vertices(const FaceMesh& mesh, const MotionParams& motion, const CameraConfig& camera);

/// Concatenation (exp, angle, trans) → 70 values.
std::vector<float> motion_descriptor(std::span<const float> exp, std::span<const float> angle,
                                     std::span<const float> trans);
std::vector<float> motion_descriptor(const MotionParams& motion);

/// Inverse of motion_descriptor; requires exactly 70 values.
MotionParams split_descriptor(std::span<const float> descriptor);

struct SyntheticBasisConfig
{
    int rows = 22;
    int cols = 23;
    int id_dims = 80;
    uint64_t seed = 7;
};

/**
 * Procedural low-poly face mask on an ellipsoid (front-facing toward +z, image y down)
 * with smooth random identity directions and localized expression bumps.
 */
MorphableBasis make_synthetic_basis(const SyntheticBasisConfig& config = {});

} // namespace uvreenact
