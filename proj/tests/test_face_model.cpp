#include "uvreenact/errors.hpp"
#include "uvreenact/face_model.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <numbers>

using namespace uvreenact;

namespace {

MorphableBasis small_basis(int64_t v, int64_t d_id, uint64_t seed)
{
    torch::manual_seed(static_cast<int64_t>(seed));
    return MorphableBasis{torch::randn({v, 3}), torch::randn({v, 3, d_id}), torch::randn({v, 3, kExpDims}),
                          torch::tensor({0, 1, 2, 2, 3, 4}, torch::kInt64).reshape({2, 3}),
                          torch::rand({v, 2})};
}

std::vector<float> random_vec(size_t n, std::mt19937_64& rng)
{
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) {
        x = d(rng);
    }
    return v;
}

} // namespace

TEST(BuildMesh, ZeroCoefficientsGiveMeanShape)
{
    const auto basis = make_synthetic_basis();
    IdentityParams id{std::vector<float>(static_cast<size_t>(basis.id_dims()), 0.0f)};
    const std::vector<float> exp(kExpDims, 0.0f);
    const auto mesh = build_mesh(basis, id, exp);
    EXPECT_TRUE(torch::equal(mesh.vertices, basis.mean_shape));
    EXPECT_TRUE(torch::equal(mesh.triangles, basis.triangles));
    EXPECT_TRUE(torch::equal(mesh.uv_coords, basis.uv_coords));
}

TEST(BuildMesh, UnitExpressionSelectsBasisColumn)
{
    const auto basis = make_synthetic_basis();
    IdentityParams id{std::vector<float>(static_cast<size_t>(basis.id_dims()), 0.0f)};
    for (int k : {0, 17, 63}) {
        std::vector<float> exp(kExpDims, 0.0f);
        exp[static_cast<size_t>(k)] = 1.0f;
        const auto mesh = build_mesh(basis, id, exp);
        const auto expected = basis.mean_shape + basis.exp_basis.select(2, k);
        EXPECT_LE((mesh.vertices - expected).abs().max().item<double>(), 1e-6) << "column " << k;
    }
}

TEST(BuildMesh, MatchesPerVertexLoop)
{
    const auto basis = small_basis(10, 80, 3);
    std::mt19937_64 rng(5);
    IdentityParams id{random_vec(80, rng)};
    const auto exp = random_vec(kExpDims, rng);
    const auto mesh = build_mesh(basis, id, exp);

    const auto mean = basis.mean_shape.accessor<float, 2>();
    const auto ib = basis.id_basis.accessor<float, 3>();
    const auto eb = basis.exp_basis.accessor<float, 3>();
    const auto got = mesh.vertices.accessor<float, 2>();
    for (int64_t v = 0; v < 10; ++v) {
        for (int c = 0; c < 3; ++c) {
            double x = mean[v][c];
            for (int k = 0; k < 80; ++k) {
                x += static_cast<double>(ib[v][c][k]) * id.alpha[static_cast<size_t>(k)];
            }
            for (int k = 0; k < kExpDims; ++k) {
                x += static_cast<double>(eb[v][c][k]) * exp[static_cast<size_t>(k)];
            }
            EXPECT_NEAR(got[v][c], x, 1e-6 * std::max(1.0, std::abs(x)));
        }
    }
}

TEST(BuildMesh, AffineCombinationIdentity)
{
    const auto basis = small_basis(10, 80, 4);
    std::mt19937_64 rng(6);
    IdentityParams id1{random_vec(80, rng)}, id2{random_vec(80, rng)};
    const auto e1 = random_vec(kExpDims, rng), e2 = random_vec(kExpDims, rng);
    const float a = 0.3f, b = 1.7f;
    IdentityParams mix;
    std::vector<float> emix;
    for (size_t k = 0; k < 80; ++k) {
        mix.alpha.push_back(a * id1.alpha[k] + b * id2.alpha[k]);
    }
    for (size_t k = 0; k < kExpDims; ++k) {
        emix.push_back(a * e1[k] + b * e2[k]);
    }
    const auto lhs = build_mesh(basis, mix, emix).vertices;
    const auto rhs = a * build_mesh(basis, id1, e1).vertices + b * build_mesh(basis, id2, e2).vertices -
                     (a + b - 1.0f) * basis.mean_shape;
    EXPECT_LE((lhs - rhs).abs().max().item<double>(), 1e-4);
}

TEST(BuildMesh, DimensionMismatchThrows)
{
    const auto basis = make_synthetic_basis();
    IdentityParams id{std::vector<float>(79, 0.0f)};
    const std::vector<float> exp(kExpDims, 0.0f);
    EXPECT_THROW(build_mesh(basis, id, exp), ShapeError);
    IdentityParams ok{std::vector<float>(80, 0.0f)};
    const std::vector<float> short_exp(63, 0.0f);
    EXPECT_THROW(build_mesh(basis, ok, short_exp), ShapeError);
}

TEST(SyntheticBasis, SatisfiesInvariants)
{
    const auto basis = make_synthetic_basis();
    EXPECT_NO_THROW(basis.validate());
    EXPECT_EQ(basis.exp_basis.size(2), kExpDims);
    EXPECT_EQ(basis.id_dims(), 80);
    EXPECT_GE(basis.num_vertices(), 400);
    EXPECT_LT(basis.triangles.max().item<int64_t>(), basis.num_vertices());
    EXPECT_GE(basis.uv_coords.min().item<float>(), 0.0f);
    EXPECT_LE(basis.uv_coords.max().item<float>(), 1.0f);
    // No degenerate triangle in UV or model space.
    const auto tri = basis.triangles.accessor<int64_t, 2>();
    const auto p = basis.mean_shape.accessor<float, 2>();
    for (int64_t t = 0; t < basis.num_triangles(); ++t) {
        Eigen::Vector3d a(p[tri[t][0]][0], p[tri[t][0]][1], p[tri[t][0]][2]);
        Eigen::Vector3d b(p[tri[t][1]][0], p[tri[t][1]][1], p[tri[t][1]][2]);
        Eigen::Vector3d c(p[tri[t][2]][0], p[tri[t][2]][1], p[tri[t][2]][2]);
        ASSERT_GT((b - a).cross(c - a).norm(), 0.0) << "triangle " << t;
    }
}

TEST(SyntheticBasis, SameSeedIsBitIdentical)
{
    const auto a = make_synthetic_basis();
    const auto b = make_synthetic_basis();
    EXPECT_TRUE(torch::equal(a.exp_basis, b.exp_basis));
    EXPECT_TRUE(torch::equal(a.id_basis, b.id_basis));
}

TEST(EulerToRotation, KnownAngles)
{
    EXPECT_TRUE(euler_to_rotation({0, 0, 0}).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
    const auto rz = euler_to_rotation({0, 0, std::numbers::pi / 2});
    EXPECT_LE((rz * Eigen::Vector3d(1, 0, 0) - Eigen::Vector3d(0, 1, 0)).norm(), 1e-12);
    const auto rx = euler_to_rotation({std::numbers::pi, 0, 0});
    EXPECT_LE((rx - Eigen::Vector3d(1, -1, -1).asDiagonal().toDenseMatrix()).norm(), 1e-12);
}

TEST(EulerToRotation, IntrinsicXYZOrder)
{
    const double a = 0.3, b = -0.7, c = 1.1;
    const Eigen::Matrix3d expected = (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()) *
                                      Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
                                      Eigen::AngleAxisd(c, Eigen::Vector3d::UnitZ()))
                                         .toRotationMatrix();
    EXPECT_LE((euler_to_rotation({a, b, c}) - expected).norm(), 1e-12);
}

TEST(EulerToRotation, AlwaysProperRotation)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 500; ++i) {
        const auto r = euler_to_rotation({u(rng), u(rng), u(rng)});
        EXPECT_LE((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-10);
    }
}

TEST(ProjectVertices, IdentityMotionKeepsXY)
{
    const auto basis = make_synthetic_basis();
    const auto mesh = build_mesh(basis, IdentityParams{std::vector<float>(80, 0.0f)}, std::vector<float>(64, 0.0f));
    const auto p = project_vertices(mesh, MotionParams{}, CameraConfig{});
    EXPECT_TRUE(torch::equal(p.narrow(1, 0, 2), mesh.vertices.narrow(1, 0, 2)));
}

TEST(ProjectVertices, PureTranslationShiftsX)
{
    const auto basis = make_synthetic_basis();
    const auto mesh = build_mesh(basis, IdentityParams{std::vector<float>(80, 0.0f)}, std::vector<float>(64, 0.0f));
    MotionParams m;
    m.trans = {0.5f, 0.0f, 0.0f};
    const auto p = project_vertices(mesh, m, CameraConfig{});
    EXPECT_LE((p.select(1, 0) - (mesh.vertices.select(1, 0) + 0.5f)).abs().max().item<double>(), 1e-6);
    EXPECT_TRUE(torch::equal(p.select(1, 1), mesh.vertices.select(1, 1)));
}

TEST(ProjectVertices, MatchesMatrixOracle)
{
    FaceMesh mesh{torch::tensor({0.1f, -0.2f, 0.3f, 0.5f, 0.4f, -0.1f, -0.6f, 0.2f, 0.05f, 0.0f, 0.0f, 1.0f})
                      .reshape({4, 3}),
                  torch::tensor({0, 1, 2}, torch::kInt64).reshape({1, 3}), torch::zeros({4, 2})};
    std::mt19937_64 rng(2);
    const auto m = uvreenact::testing::random_motion(rng, 0.0, 0.5, 0.2);
    CameraConfig cam{0.8f, {0.1f, -0.05f}};
    const auto p = project_vertices(mesh, m, cam);
    const auto r = euler_to_rotation({m.angle[0], m.angle[1], m.angle[2]});
    const auto v = mesh.vertices.accessor<float, 2>();
    for (int i = 0; i < 4; ++i) {
        Eigen::Vector3d x(v[i][0], v[i][1], v[i][2]);
        Eigen::Vector3d y = cam.scale * (r * x);
        y += Eigen::Vector3d(m.trans[0] + cam.principal_point[0], m.trans[1] + cam.principal_point[1], m.trans[2]);
        for (int c = 0; c < 3; ++c) {
            EXPECT_NEAR(p[i][c].item<double>(), y[c], 1e-6);
        }
    }
}

TEST(ProjectVertices, RejectsNonPositiveScale)
{
    const auto basis = make_synthetic_basis();
    const auto mesh = build_mesh(basis, IdentityParams{std::vector<float>(80, 0.0f)}, std::vector<float>(64, 0.0f));
    EXPECT_THROW(project_vertices(mesh, MotionParams{}, CameraConfig{0.0f, {0, 0}}), ValidationError);
}

TEST(MotionDescriptor, ZerosAndOrdering)
{
    const auto zero = motion_descriptor(MotionParams{});
    ASSERT_EQ(zero.size(), 70u);
    for (float v : zero) {
        EXPECT_EQ(v, 0.0f);
    }
    const std::vector<float> e(64, 1.0f), a(3, 2.0f), t(3, 3.0f);
    const auto d = motion_descriptor(e, a, t);
    for (size_t i = 0; i < 70; ++i) {
        EXPECT_EQ(d[i], i < 64 ? 1.0f : (i < 67 ? 2.0f : 3.0f)) << i;
    }
}

TEST(MotionDescriptor, RoundTrip)
{
    std::mt19937_64 rng(9);
    for (int i = 0; i < 20; ++i) {
        const auto m = uvreenact::testing::random_motion(rng);
        EXPECT_EQ(split_descriptor(motion_descriptor(m)), m);
    }
}

TEST(MotionDescriptor, WrongLengthsThrow)
{
    const std::vector<float> e(63, 0.0f), a(3, 0.0f), t(3, 0.0f), bad(2, 0.0f);
    EXPECT_THROW(motion_descriptor(e, a, t), ShapeError);
    const std::vector<float> e64(64, 0.0f);
    EXPECT_THROW(motion_descriptor(e64, bad, t), ShapeError);
    EXPECT_THROW(motion_descriptor(e64, a, bad), ShapeError);
    EXPECT_THROW(split_descriptor(std::vector<float>(69, 0.0f)), ShapeError);
}
