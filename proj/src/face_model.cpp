#include "uvreenact/face_model.hpp"

#include "uvreenact/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace uvreenact {

namespace {

void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw ShapeError(message);
    }
}

} // namespace

void MorphableBasis::validate() const
{
    require(mean_shape.defined() && mean_shape.dim() == 2 && mean_shape.size(1) == 3, "mean_shape must be V×3");
    const auto v = mean_shape.size(0);
    require(id_basis.defined() && id_basis.dim() == 3 && id_basis.size(0) == v && id_basis.size(1) == 3,
            "id_basis must be V×3×D_id");
    require(exp_basis.defined() && exp_basis.dim() == 3 && exp_basis.size(0) == v && exp_basis.size(1) == 3,
            "exp_basis must be V×3×64");
    require(exp_basis.size(2) == kExpDims, "exp_basis third dimension must be 64");
    require(triangles.defined() && triangles.dim() == 2 && triangles.size(1) == 3, "triangles must be T×3");
    require(uv_coords.defined() && uv_coords.dim() == 2 && uv_coords.size(0) == v && uv_coords.size(1) == 2,
            "uv_coords must be V×2");
    if (triangles.numel() > 0) {
        const auto lo = triangles.min().item<int64_t>();
        const auto hi = triangles.max().item<int64_t>();
        if (lo < 0 || hi >= v) {
            throw ValidationError("triangle index out of range [0, " + std::to_string(v) + ")");
        }
    }
    if (uv_coords.numel() > 0 && (uv_coords.min().item<double>() < 0.0 || uv_coords.max().item<double>() > 1.0)) {
        throw ValidationError("uv_coords outside the unit square");
    }
    for (const auto* t : {&mean_shape, &id_basis, &exp_basis}) {
        if (!torch::isfinite(*t).all().item<bool>()) {
            throw ValidationError("basis contains non-finite values");
        }
    }
}

void CameraConfig::validate() const
{
    if (!(scale > 0.0f) || !std::isfinite(scale)) {
        throw ValidationError("camera scale must be > 0");
    }
}

FaceMesh build_mesh(const MorphableBasis& basis, const IdentityParams& id, std::span<const float> exp)
{
    if (static_cast<int64_t>(id.alpha.size()) != basis.id_dims()) {
        throw ShapeError("identity has " + std::to_string(id.alpha.size()) + " coefficients, basis expects " +
                         std::to_string(basis.id_dims()));
    }
    if (exp.size() != static_cast<size_t>(kExpDims)) {
        throw ShapeError("expression must have 64 coefficients, got " + std::to_string(exp.size()));
    }
    // Accumulate in double; 144 float32 products drift past 1e-6.
    const auto f64 = torch::kFloat64;
    auto alpha = torch::tensor(std::vector<double>(id.alpha.begin(), id.alpha.end()), f64);
    auto e = torch::tensor(std::vector<double>(exp.begin(), exp.end()), f64);

    FaceMesh mesh;
    mesh.vertices = (basis.mean_shape.to(f64) + torch::matmul(basis.id_basis.to(f64), alpha) +
                     torch::matmul(basis.exp_basis.to(f64), e))
                        .to(basis.mean_shape.scalar_type());
    mesh.triangles = basis.triangles;
    mesh.uv_coords = basis.uv_coords;
    return mesh;
}

Eigen::Matrix3d euler_to_rotation(const std::array<double, 3>& angle)
{
    const Eigen::Matrix3d rx = Eigen::AngleAxisd(angle[0], Eigen::Vector3d::UnitX()).toRotationMatrix();
    const Eigen::Matrix3d ry = Eigen::AngleAxisd(angle[1], Eigen::Vector3d::UnitY()).toRotationMatrix();
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(angle[2], Eigen::Vector3d::UnitZ()).toRotationMatrix();
    return rx * ry * rz;
}

torch::Tensor project_vertices(const FaceMesh& mesh, const MotionParams& motion, const CameraConfig& camera)
{
    camera.validate();
    const Eigen::Matrix3d r = euler_to_rotation({motion.angle[0], motion.angle[1], motion.angle[2]});
    const auto opts = mesh.vertices.options().requires_grad(false);
    auto rt = torch::empty({3, 3}, torch::kFloat64);
    auto acc = rt.accessor<double, 2>();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            acc[i][j] = r(j, i); // transpose: rows of v times R^T
        }
    }
    auto offset = torch::tensor({static_cast<double>(motion.trans[0]) + camera.principal_point[0],
                                 static_cast<double>(motion.trans[1]) + camera.principal_point[1],
                                 static_cast<double>(motion.trans[2])},
                                torch::kFloat64);
    return static_cast<double>(camera.scale) * torch::matmul(mesh.vertices, rt.to(opts.dtype())) +
           offset.to(opts.dtype());
}

std::vector<float> motion_descriptor(std::span<const float> exp, std::span<const float> angle,
                                     std::span<const float> trans)
{
    if (exp.size() != kExpDims) {
        throw ShapeError("exp must have 64 values, got " + std::to_string(exp.size()));
    }
    if (angle.size() != 3) {
        throw ShapeError("angle must have 3 values, got " + std::to_string(angle.size()));
    }
    if (trans.size() != 3) {
        throw ShapeError("trans must have 3 values, got " + std::to_string(trans.size()));
    }
    std::vector<float> out;
    out.reserve(kMotionDims);
    out.insert(out.end(), exp.begin(), exp.end());
    out.insert(out.end(), angle.begin(), angle.end());
    out.insert(out.end(), trans.begin(), trans.end());
    return out;
}

std::vector<float> motion_descriptor(const MotionParams& motion)
{
    return motion_descriptor(motion.exp, motion.angle, motion.trans);
}

MotionParams split_descriptor(std::span<const float> descriptor)
{
    if (descriptor.size() != kMotionDims) {
        throw ShapeError("motion descriptor must have 70 values, got " + std::to_string(descriptor.size()));
    }
    MotionParams m;
    std::copy_n(descriptor.begin(), kExpDims, m.exp.begin());
    std::copy_n(descriptor.begin() + kExpDims, 3, m.angle.begin());
    std::copy_n(descriptor.begin() + kExpDims + 3, 3, m.trans.begin());
    return m;
}

MorphableBasis make_synthetic_basis(const SyntheticBasisConfig& config)
{
    using std::numbers::pi;
    const int rows = config.rows;
    const int cols = config.cols;
    if (rows < 2 || cols < 2 || config.id_dims < 1) {
        throw ValidationError("synthetic basis needs at least a 2×2 grid and one identity dimension");
    }
    const int v = rows * cols;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double lat_max = 70.0 * pi / 180.0;
    const double lon_max = 95.0 * pi / 180.0;
    std::vector<double> lat(v), lon(v);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            lat[r * cols + c] = lat_max - 2.0 * lat_max * r / (rows - 1);
            lon[r * cols + c] = -lon_max + 2.0 * lon_max * c / (cols - 1);
        }
    }

    auto mean = torch::empty({v, 3}, torch::kFloat32);
    auto uv = torch::empty({v, 2}, torch::kFloat32);
    auto mean_a = mean.accessor<float, 2>();
    auto uv_a = uv.accessor<float, 2>();
    for (int i = 0; i < v; ++i) {
        // Ellipsoid with y pointing down the image and the face looking toward +z.
        const Eigen::Vector3d dir(std::sin(lon[i]) * std::cos(lat[i]), -std::sin(lat[i]),
                                  std::cos(lon[i]) * std::cos(lat[i]));
        const Eigen::Vector3d axes(0.8, 1.0, 0.8);
        const double nose_d2 = std::pow((lat[i] + 0.05) / 0.22, 2) + std::pow(lon[i] / 0.18, 2);
        const double chin_d2 = std::pow((lat[i] + 0.85) / 0.3, 2) + std::pow(lon[i] / 0.5, 2);
        const double bump = 0.22 * std::exp(-0.5 * nose_d2) + 0.06 * std::exp(-0.5 * chin_d2);
        const Eigen::Vector3d p = axes.cwiseProduct(dir) + bump * dir;
        for (int k = 0; k < 3; ++k) {
            mean_a[i][k] = static_cast<float>(p[k]);
        }
        uv_a[i][0] = static_cast<float>(i % cols) / static_cast<float>(cols - 1);
        uv_a[i][1] = static_cast<float>(i / cols) / static_cast<float>(rows - 1);
    }

    const int t = 2 * (rows - 1) * (cols - 1);
    auto tris = torch::empty({t, 3}, torch::kInt64);
    auto tri_a = tris.accessor<int64_t, 2>();
    int n = 0;
    for (int r = 0; r + 1 < rows; ++r) {
        for (int c = 0; c + 1 < cols; ++c) {
            const int64_t v00 = r * cols + c, v01 = v00 + 1, v10 = v00 + cols, v11 = v10 + 1;
            // Counter-clockwise in (x right, y down) so the projected cross product has +z when front-facing.
            tri_a[n][0] = v00, tri_a[n][1] = v01, tri_a[n][2] = v10, ++n;
            tri_a[n][0] = v01, tri_a[n][1] = v11, tri_a[n][2] = v10, ++n;
        }
    }

    // Identity: smooth random vector fields from low-order trigonometric terms of (lat, lon).
    const int d_id = config.id_dims;
    auto id_basis = torch::zeros({v, 3, d_id}, torch::kFloat32);
    auto id_a = id_basis.accessor<float, 3>();
    for (int k = 0; k < d_id; ++k) {
        double coef[3][3][3];
        for (auto& a : coef) {
            for (auto& b : a) {
                for (auto& c : b) {
                    c = normal(rng);
                }
            }
        }
        const double amp = 0.03 / (1.0 + 0.02 * k);
        for (int i = 0; i < v; ++i) {
            for (int axis = 0; axis < 3; ++axis) {
                double s = 0.0;
                for (int p = 0; p < 3; ++p) {
                    for (int q = 0; q < 3; ++q) {
                        s += coef[axis][p][q] * std::cos(p * 1.3 * lat[i] + 0.4 * p) * std::cos(q * 1.1 * lon[i] + 0.7 * q);
                    }
                }
                id_a[i][axis][k] = static_cast<float>(amp * s / 3.0);
            }
        }
    }

    // Expression: localized bumps centred on an 8×8 lattice over the front of the face.
    auto exp_basis = torch::zeros({v, 3, kExpDims}, torch::kFloat32);
    auto exp_a = exp_basis.accessor<float, 3>();
    const double sigma_lat = 10.0 * pi / 180.0;
    const double sigma_lon = 12.0 * pi / 180.0;
    for (int k = 0; k < kExpDims; ++k) {
        const double clat = (50.0 - 100.0 * (k / 8) / 7.0) * pi / 180.0;
        const double clon = (-60.0 + 120.0 * (k % 8) / 7.0) * pi / 180.0;
        Eigen::Vector3d dir(normal(rng), normal(rng), 0.3 * normal(rng));
        dir.normalize();
        for (int i = 0; i < v; ++i) {
            const double d2 = std::pow((lat[i] - clat) / sigma_lat, 2) + std::pow((lon[i] - clon) / sigma_lon, 2);
            const double w = 0.4 * std::exp(-0.5 * d2);
            for (int axis = 0; axis < 3; ++axis) {
                exp_a[i][axis][k] = static_cast<float>(w * dir[axis]);
            }
        }
    }

    MorphableBasis basis{mean, id_basis, exp_basis, tris, uv};
    basis.validate();
    return basis;
}

} // namespace uvreenact
