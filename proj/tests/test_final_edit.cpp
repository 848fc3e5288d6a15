#include "uvreenact/errors.hpp"
#include "uvreenact/final_edit.hpp"
#include "uvreenact/motion_codec.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace uvreenact;
using uvreenact::testing::gradient_error;
using uvreenact::testing::module_gradient_error;

TEST(EditFinal, BoundedForLargeInputs)
{
    torch::manual_seed(0);
    EditNet net(8);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = torch::randn({2, 3, 16, 16}) * 20;
        const auto out = edit_final(s, torch::randn({2, 3, 16, 16}) * 20, torch::randn({2, 3, 16, 16}) * 20,
                                    torch::randn({2, kLatentDims}) * 20, net);
        EXPECT_EQ(out.sizes(), s.sizes());
        EXPECT_LE(out.abs().max().item<float>(), 1.0f);
    }
}

TEST(EditFinal, DeterministicAndUnbatched)
{
    torch::manual_seed(1);
    EditNet net(8);
    const auto s = torch::rand({3, 16, 16}) * 2 - 1;
    const auto z = torch::randn({kLatentDims});
    const auto a = edit_final(s, s.flip({2}), s.flip({1}), z, net);
    const auto b = edit_final(s, s.flip({2}), s.flip({1}), z, net);
    EXPECT_EQ(a.sizes(), s.sizes());
    EXPECT_TRUE(torch::equal(a, b));
}

TEST(EditFinal, ShapeMismatchThrows)
{
    EditNet net(8);
    EXPECT_THROW(edit_final(torch::zeros({1, 3, 16, 16}), torch::zeros({1, 3, 8, 8}), torch::zeros({1, 3, 16, 16}),
                            torch::zeros({1, kLatentDims}), net),
                 ShapeError);
}

TEST(EditFinal, GradientsMatchFiniteDifferences)
{
    torch::manual_seed(2);
    EditNet net(4);
    net->to(torch::kFloat64);
    auto src = (torch::rand({1, 3, 16, 16}, torch::kFloat64) * 2 - 1).requires_grad_(true);
    const auto bg = torch::rand({1, 3, 16, 16}, torch::kFloat64) * 2 - 1;
    const auto comb = torch::rand({1, 3, 16, 16}, torch::kFloat64) * 2 - 1;
    const auto z = torch::randn({1, kLatentDims}, torch::kFloat64);
    const auto w = torch::randn({1, 3, 16, 16}, torch::kFloat64);
    auto loss = [&] { return (edit_final(src, bg, comb, z, net) * w).sum(); };
    EXPECT_LE(gradient_error(loss, src, 1e-6, 48), 1e-3);
    EXPECT_LE(module_gradient_error(*net, loss, 1e-6), 1e-3);
}

TEST(EditLoss, ZeroNonnegativeAndConstantOffset)
{
    torch::manual_seed(3);
    const ConvPyramidExtractor pyramid;
    const IdentityExtractor identity;
    const auto a = torch::rand({2, 3, 16, 16}) * 2 - 1;
    EXPECT_EQ(edit_loss(a, a, pyramid).item<double>(), 0.0);
    for (int trial = 0; trial < 5; ++trial) {
        EXPECT_GE(edit_loss(a, torch::rand({2, 3, 16, 16}) * 2 - 1, pyramid).item<double>(), 0.0);
    }
    EXPECT_NEAR(edit_loss(a, a + 0.2, identity).item<double>(), 0.2, 1e-6);
}

TEST(TotalLoss, WeightedSum)
{
    const LossWeights w;
    EXPECT_EQ(total_loss(0.0, 0.0, 0.0, 0.0, w), 0.0);
    EXPECT_DOUBLE_EQ(total_loss(1.0, 1.0, 1.0, 1.0, w), 11.5);
    EXPECT_DOUBLE_EQ(total_loss(0.2, 0.4, 0.6, 0.8, w), 2.0 * total_loss(0.1, 0.2, 0.3, 0.4, w));
    EXPECT_DOUBLE_EQ(total_loss(0.0, 0.0, 1.0, 0.0, w), 1.0);
    EXPECT_DOUBLE_EQ(total_loss(0.0, 0.0, 0.0, 1.0, w), 4.0);

    const auto one = torch::ones({}, torch::kFloat64);
    EXPECT_DOUBLE_EQ(total_loss(one, one, one, one, w).item<double>(), 11.5);
}

TEST(TotalLoss, WeightsValidate)
{
    LossWeights w;
    EXPECT_NO_THROW(w.validate());
    w.cons = -1.0;
    EXPECT_THROW(w.validate(), ValidationError);
    w.cons = std::nan("");
    EXPECT_THROW(w.validate(), ValidationError);
}
