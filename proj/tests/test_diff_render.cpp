#include "uvreenact/diff_render.hpp"
#include "uvreenact/errors.hpp"
#include "raster_oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace uvreenact;
using namespace uvreenact::testing;

namespace {

FaceMesh quad_mesh(double half)
{
    // Two counter-clockwise (front-facing) triangles covering [−half, half]².
    auto v = torch::tensor({-half, -half, 0.0, half, -half, 0.0, half, half, 0.0, -half, half, 0.0}, torch::kFloat64)
                 .view({4, 3});
    auto tris = torch::tensor({0, 1, 2, 0, 2, 3}, torch::kInt64).view({2, 3});
    auto uv = torch::tensor({0.0f, 0.0f, 1.0f, 0.0f, 1.0f, 1.0f, 0.0f, 1.0f}).view({4, 2});
    return FaceMesh{v.to(torch::kFloat32), tris, uv};
}

} // namespace

TEST(Rasterize, QuadWindingIsFrontFacing)
{
    const auto mesh = quad_mesh(2.0);
    const auto out = rasterize(mesh, mesh.vertices.to(torch::kFloat64), torch::zeros({3, 4, 4}, torch::kFloat64), 8);
    EXPECT_EQ(out.mask.sum().item<double>(), 64.0);
}

TEST(Rasterize, EmptyMeshGivesBackground)
{
    FaceMesh mesh{torch::zeros({0, 3}), torch::zeros({0, 3}, torch::kInt64), torch::zeros({0, 2})};
    const auto out = rasterize(mesh, torch::zeros({0, 3}), torch::ones({3, 4, 4}), 8);
    EXPECT_EQ(out.mask.sum().item<float>(), 0.0f);
    EXPECT_TRUE((out.image == kBackgroundFill).all().item<bool>());
    EXPECT_TRUE((out.triangle_id == -1).all().item<bool>());
}

TEST(Rasterize, SingleTriangleMaskOnFourByFour)
{
    // Counter-clockwise in x-right/y-down axes.
    auto p = torch::tensor({-0.9, -0.8, 0.0, 0.7, -0.6, 0.0, -0.5, 0.9, 0.0}, torch::kFloat64).view({3, 3});
    FaceMesh mesh{p.to(torch::kFloat32), torch::tensor({0, 1, 2}, torch::kInt64).view({1, 3}), torch::zeros({3, 2})};
    const auto out = rasterize(mesh, p, torch::zeros({3, 2, 2}, torch::kFloat64), 4);
    const auto oracle = brute_force_raster(mesh.triangles, p, mesh.uv_coords, torch::zeros({3, 2, 2}), 4);
    int covered = 0;
    for (int64_t i = 0; i < 16; ++i) {
        EXPECT_EQ(out.mask[i / 4][i % 4].item<double>() > 0.5, oracle.triangle[static_cast<size_t>(i)] == 0) << i;
        covered += oracle.triangle[static_cast<size_t>(i)] == 0;
    }
    EXPECT_GT(covered, 2);
    EXPECT_LT(covered, 16);
}

TEST(Rasterize, ConstantTextureFillsCoveredPixels)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        auto scene = random_scene(rng, 2);
        const auto tex = torch::full({3, 8, 8}, 0.42, torch::kFloat64);
        const auto out = rasterize(scene.mesh, scene.projected, tex, 16);
        const auto m = out.mask.unsqueeze(0);
        EXPECT_LE(((out.image - 0.42) * m).abs().max().item<double>(), 1e-12);
        EXPECT_LE((out.image * (1 - m)).abs().max().item<double>(), 0.0);
    }
}

TEST(Rasterize, MatchesBruteForceOracleOnRandomScenes)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        auto scene = random_scene(rng, 1 + trial % 2);
        const auto out = rasterize(scene.mesh, scene.projected, scene.texture, 32);
        const auto oracle = brute_force_raster(scene.mesh.triangles, scene.projected, scene.mesh.uv_coords,
                                               scene.texture, 32);
        const auto tid = out.triangle_id.accessor<int64_t, 2>();
        for (int64_t i = 0; i < 32 * 32; ++i) {
            ASSERT_EQ(tid[i / 32][i % 32], oracle.triangle[static_cast<size_t>(i)]) << "scene " << trial;
            for (int c = 0; c < 3; ++c) {
                ASSERT_NEAR(out.image[c][i / 32][i % 32].item<double>(),
                            oracle.color[static_cast<size_t>(c * 1024 + i)], 1e-6);
            }
        }
    }
}

TEST(Rasterize, NearerTriangleWinsContestedPixels)
{
    // Two identical footprints at different depths; the z = 0.5 copy must win everywhere.
    auto p = torch::tensor({-0.9, -0.9, -0.2, 0.9, -0.9, -0.2, 0.0, 0.9, -0.2, -0.9, -0.9, 0.5, 0.9, -0.9, 0.5, 0.0,
                            0.9, 0.5},
                           torch::kFloat64)
                 .view({6, 3});
    auto tris = torch::tensor({0, 1, 2, 3, 4, 5}, torch::kInt64).view({2, 3});
    FaceMesh mesh{p.to(torch::kFloat32), tris, torch::full({6, 2}, 0.5f)};
    const auto out = rasterize(mesh, p, torch::zeros({3, 2, 2}, torch::kFloat64), 16);
    const auto covered = out.mask > 0.5;
    ASSERT_GT(covered.sum().item<int64_t>(), 50);
    EXPECT_TRUE((out.triangle_id.masked_select(covered) == 1).all().item<bool>());
}

TEST(Rasterize, BarycentricWeightsSumToOne)
{
    std::mt19937_64 rng(4);
    auto scene = random_scene(rng, 2);
    const auto out = rasterize(scene.mesh, scene.projected, scene.texture, 32);
    const auto sums = out.barycentric.sum(2);
    const auto covered = out.mask > 0.5;
    EXPECT_LE((sums.masked_select(covered) - 1.0).abs().max().item<double>(), 1e-12);
    EXPECT_EQ(sums.masked_select(~covered).abs().sum().item<double>(), 0.0);
}

TEST(Rasterize, TextureGradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(5);
    const auto basis = make_synthetic_basis();
    const auto mesh =
        build_mesh(basis, IdentityParams{std::vector<float>(80, 0.0f)}, std::vector<float>(kExpDims, 0.0f));
    const auto projected = project_vertices(mesh, random_motion(rng, 0.0), CameraConfig{0.8f, {0, 0}})
                               .to(torch::kFloat64);
    torch::manual_seed(5);
    auto tex = torch::rand({3, 16, 16}, torch::kFloat64).requires_grad_(true);
    const auto w = torch::randn({3, 16, 16}, torch::kFloat64);
    auto loss = [&] { return (rasterize(mesh, projected, tex, 16).image * w).sum(); };
    EXPECT_LE(gradient_error(loss, tex, 1e-6, 200), 1e-3);
}

TEST(Rasterize, TriangleIdImageEncodesIds)
{
    const auto mesh = quad_mesh(0.5);
    const auto frags = rasterize_fragments(mesh.triangles, mesh.vertices, 8);
    const auto img = triangle_id_image(frags);
    EXPECT_EQ(img.min().item<int64_t>(), 0);
    EXPECT_EQ(img.max().item<int64_t>(), 2);
}

TEST(Composite, AllOnesAllZerosAndChecker)
{
    torch::manual_seed(6);
    const auto bg = torch::rand({3, 8, 8});
    const auto rend = torch::rand({3, 8, 8});
    EXPECT_TRUE(torch::equal(composite(bg, rend, torch::ones({8, 8})), rend));
    EXPECT_TRUE(torch::equal(composite(bg, rend, torch::zeros({8, 8})), bg));
    const auto checker = ((torch::arange(8).view({8, 1}) + torch::arange(8).view({1, 8})) % 2).to(torch::kFloat32);
    const auto out = composite(bg, rend, checker);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 8; ++j) {
                const auto expect = (i + j) % 2 ? rend[c][i][j] : bg[c][i][j];
                ASSERT_EQ(out[c][i][j].item<float>(), expect.item<float>());
            }
        }
    }
}

TEST(Composite, IdempotentAndConservative)
{
    torch::manual_seed(7);
    const auto bg = torch::rand({2, 3, 8, 8});
    const auto rend = torch::rand({2, 3, 8, 8});
    const auto m = (torch::rand({2, 8, 8}) > 0.5).to(torch::kFloat32);
    const auto once = composite(bg, rend, m);
    EXPECT_TRUE(torch::equal(composite(once, rend, m), once));
    const auto changed = (once != bg).any(1);
    EXPECT_TRUE(torch::equal(changed, m > 0.5));
}

TEST(Composite, RejectsNonBinaryMask)
{
    EXPECT_THROW(composite(torch::zeros({3, 4, 4}), torch::ones({3, 4, 4}), torch::full({4, 4}, 0.5f)),
                 ValidationError);
}

TEST(TargetMask, OffscreenAndFullscreen)
{
    auto off = quad_mesh(0.2);
    MotionParams far;
    far.trans = {5.0f, 5.0f, 0.0f};
    EXPECT_EQ(target_mask(off, far, CameraConfig{}, 16).sum().item<float>(), 0.0f);
    EXPECT_EQ(target_mask(quad_mesh(1.5), MotionParams{}, CameraConfig{}, 16).sum().item<float>(), 256.0f);
}

TEST(TargetMask, EqualsRasterizeMaskForRotatedPose)
{
    std::mt19937_64 rng(8);
    const auto basis = make_synthetic_basis();
    const auto mesh =
        build_mesh(basis, IdentityParams{std::vector<float>(80, 0.0f)}, std::vector<float>(kExpDims, 0.0f));
    const CameraConfig cam{0.75f, {0.0f, 0.0f}};
    for (int i = 0; i < 5; ++i) {
        const auto m = random_motion(rng, 0.2, 0.3, 0.1);
        const auto mask = target_mask(mesh, m, cam, 64);
        const auto ref = rasterize(mesh, project_vertices(mesh, m, cam), torch::zeros({3, 4, 4}), 64).mask;
        EXPECT_TRUE(torch::equal(mask, ref.to(torch::kFloat32)));
    }
}

TEST(RenderFrame, RequiresSquareBackground)
{
    const auto mesh = quad_mesh(0.5);
    EXPECT_THROW(render_frame(mesh, MotionParams{}, CameraConfig{}, torch::zeros({3, 4, 4}), torch::zeros({3, 8, 6})),
                 ShapeError);
}
