#include "uvreenact/audio_motion.hpp"
#include "uvreenact/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <complex>
#include <numbers>

using namespace uvreenact;
using uvreenact::testing::gradient_error;
using uvreenact::testing::temp_dir;

namespace {

Waveform sine(double hz, double seconds, int sr = 16000, double amp = 0.5)
{
    Waveform w;
    w.sample_rate = sr;
    w.samples.resize(static_cast<size_t>(seconds * sr));
    for (size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr));
    }
    return w;
}

/// Direct O(N²) DFT, triangular HTK-mel filters and a DCT-II written from their textbook definitions.
std::vector<double> mfcc_frame_oracle(const std::vector<float>& x, size_t start, int sr)
{
    const int win = 400, n_fft = 512, bands = 26, coeffs = 13;
    std::vector<double> power(n_fft / 2 + 1);
    for (int k = 0; k <= n_fft / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (int n = 0; n < win; ++n) {
            const double hamming = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (win - 1));
            acc += hamming * x[start + static_cast<size_t>(n)] *
                   std::polar(1.0, -2.0 * std::numbers::pi * k * n / n_fft);
        }
        power[static_cast<size_t>(k)] = std::norm(acc) / n_fft;
    }
    auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    std::vector<double> log_e(bands);
    for (int b = 0; b < bands; ++b) {
        const double lo = hz(mel(sr / 2.0) * b / (bands + 1));
        const double mid = hz(mel(sr / 2.0) * (b + 1) / (bands + 1));
        const double hi = hz(mel(sr / 2.0) * (b + 2) / (bands + 1));
        double e = 0.0;
        for (int k = 0; k <= n_fft / 2; ++k) {
            const double f = static_cast<double>(k) * sr / n_fft;
            const double tri = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
            e += tri * power[static_cast<size_t>(k)];
        }
        log_e[static_cast<size_t>(b)] = std::log(std::max(e, 1e-10));
    }
    std::vector<double> out(coeffs);
    for (int c = 0; c < coeffs; ++c) {
        double acc = 0.0;
        for (int b = 0; b < bands; ++b) {
            acc += log_e[static_cast<size_t>(b)] * std::cos(std::numbers::pi * c * (b + 0.5) / bands);
        }
        out[static_cast<size_t>(c)] = acc * std::sqrt((c == 0 ? 1.0 : 2.0) / bands);
    }
    return out;
}

} // namespace

TEST(Mfcc, FrameCountForOneSecond)
{
    EXPECT_EQ(mfcc_frame_count(16000, 16000), 98);
    EXPECT_EQ(extract_mfcc(sine(300, 1.0)).sizes(), (std::vector<int64_t>{98, 13}));
    EXPECT_EQ(MfccConfig{}.fft_size(16000), 512);
}

TEST(Mfcc, TooShortThrows)
{
    EXPECT_THROW(extract_mfcc(sine(300, 0.02)), ValidationError);
}

TEST(Mfcc, SilenceGivesIdenticalFrames)
{
    Waveform w;
    w.samples.assign(8000, 0.0f);
    const auto m = extract_mfcc(w);
    EXPECT_TRUE(torch::equal(m, m[0].unsqueeze(0).expand_as(m)));
    // Every band sits at the floor, so only the DC coefficient is nonzero.
    EXPECT_NEAR(m[0][0].item<double>(), std::log(1e-10) * std::sqrt(26.0), 1e-9);
    EXPECT_LE(m[0].narrow(0, 1, 12).abs().max().item<double>(), 1e-9);
}

TEST(Mfcc, SineFrameMatchesDirectSpectralOracle)
{
    const auto w = sine(440, 0.1);
    const auto m = extract_mfcc(w);
    for (const int64_t frame : {0, 3}) {
        const auto oracle = mfcc_frame_oracle(w.samples, static_cast<size_t>(frame * 160), 16000);
        for (int c = 0; c < 13; ++c) {
            EXPECT_NEAR(m[frame][c].item<double>(), oracle[static_cast<size_t>(c)], 1e-4) << frame << ":" << c;
        }
    }
}

TEST(Mfcc, DeterministicAndShiftCovariantByHop)
{
    auto w = sine(523, 0.5);
    for (size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] += static_cast<float>(0.2 * std::sin(0.013 * static_cast<double>(i * i % 977)));
    }
    const auto a = extract_mfcc(w);
    EXPECT_TRUE(torch::equal(a, extract_mfcc(w)));
    Waveform shifted = w;
    shifted.samples.erase(shifted.samples.begin(), shifted.samples.begin() + 160);
    const auto b = extract_mfcc(shifted);
    ASSERT_EQ(b.size(0), a.size(0) - 1);
    EXPECT_LE((b - a.narrow(0, 1, b.size(0))).abs().max().item<double>(), 1e-6);
}

TEST(Mfcc, FilterbankRowsAreTriangles)
{
    const auto fb = mel_filterbank(16000, 512, 26);
    EXPECT_EQ(fb.sizes(), (std::vector<int64_t>{26, 257}));
    EXPECT_GE(fb.min().item<double>(), 0.0);
    EXPECT_LE(fb.max().item<double>(), 1.0);
    for (int b = 0; b < 26; ++b) {
        EXPECT_GT(fb[b].sum().item<double>(), 0.0) << b;
    }
}

TEST(AlignToVideo, FrameTimesAndInterpolation)
{
    // 98 rows at 10 ms cover 0..0.97 s → 25 fps frames 0..24.
    const MfccConfig cfg;
    EXPECT_EQ(video_frame_count(98, 16000, cfg, 25.0), 25);
    const auto rows = torch::arange(98, torch::kFloat64).unsqueeze(1);
    const auto aligned = align_to_video(rows, 16000, cfg, 25.0);
    ASSERT_EQ(aligned.size(0), 25);
    for (int v = 0; v < 25; ++v) {
        EXPECT_NEAR(aligned[v][0].item<double>(), 4.0 * v, 1e-9);
    }
    const auto half = align_to_video(rows, 16000, cfg, 40.0);
    EXPECT_NEAR(half[1][0].item<double>(), 2.5, 1e-9);
}

TEST(AudioRegressor, CausalInTime)
{
    torch::manual_seed(0);
    AudioRegressor reg(13, 16);
    auto f = torch::randn({10, 13});
    const auto base = predict_motion_sequence(f, reg);
    EXPECT_EQ(base.sizes(), (std::vector<int64_t>{10, 70}));
    auto g = f.clone();
    g[6] += 3.0;
    const auto moved = predict_motion_sequence(g, reg);
    EXPECT_TRUE(torch::equal(base.narrow(0, 0, 6), moved.narrow(0, 0, 6)));
    EXPECT_FALSE(torch::equal(base[6], moved[6]));
}

TEST(AudioRegressor, ZeroWeightsGiveZeroSequence)
{
    AudioRegressor reg(13, 16);
    {
        torch::NoGradGuard guard;
        for (auto& p : reg->parameters()) {
            p.zero_();
        }
    }
    EXPECT_EQ(predict_motion_sequence(torch::randn({5, 13}), reg).abs().max().item<float>(), 0.0f);
}

TEST(AudioRegressor, FeatureGradientMatchesFiniteDifferences)
{
    torch::manual_seed(1);
    AudioRegressor reg(13, 16);
    reg->to(torch::kFloat64);
    auto f = torch::randn({4, 13}, torch::kFloat64).requires_grad_(true);
    EXPECT_LE(gradient_error([&] { return predict_motion_sequence(f, reg).sum(); }, f, 1e-6, 52), 1e-3);
}

TEST(AudioLosses, Cases)
{
    const auto constant = torch::full({6, 70}, 0.3, torch::kFloat64);
    const auto same = audio_losses(constant, constant);
    EXPECT_EQ(same.sum().item<double>(), 0.0);

    const auto off = audio_losses(constant, torch::zeros({6, 70}, torch::kFloat64));
    EXPECT_EQ(off.cont_exp.item<double>(), 0.0);
    EXPECT_EQ(off.cont_pose.item<double>(), 0.0);
    EXPECT_NEAR(off.mse_exp.item<double>(), 0.09, 1e-12);
    EXPECT_NEAR(off.mse_pose.item<double>(), 0.09, 1e-12);

    // Pose ramp with per-step delta d.
    const std::vector<double> d{0.1, -0.2, 0.05, 0.3, 0.0, -0.4};
    double norm2 = 0.0;
    auto ramp = torch::zeros({8, 70}, torch::kFloat64);
    for (int j = 0; j < 6; ++j) {
        norm2 += d[static_cast<size_t>(j)] * d[static_cast<size_t>(j)];
        for (int t = 0; t < 8; ++t) {
            ramp[t][64 + j] = d[static_cast<size_t>(j)] * t;
        }
    }
    const auto r = audio_losses(ramp, ramp);
    EXPECT_NEAR(r.cont_pose.item<double>(), norm2, 1e-12);
    EXPECT_EQ(r.cont_exp.item<double>(), 0.0);

    EXPECT_THROW(audio_losses(torch::zeros({5, 70}), torch::zeros({6, 70})), ShapeError);
}

TEST(AudioLosses, NonnegativeOnRandomBatches)
{
    torch::manual_seed(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto l = audio_losses(torch::randn({2, 5, 70}), torch::randn({2, 5, 70}));
        for (const auto& t : {l.mse_exp, l.mse_pose, l.cont_exp, l.cont_pose}) {
            EXPECT_GE(t.item<double>(), 0.0);
        }
    }
}

TEST(Wav, RoundTripThroughFileAndBytes)
{
    const auto w = sine(200, 0.05, 22050, 0.8);
    const auto path = temp_dir("wav") / "a.wav";
    write_wav(path, w);
    const auto back = read_wav(path);
    EXPECT_EQ(back.sample_rate, 22050);
    ASSERT_EQ(back.samples.size(), w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i) {
        ASSERT_NEAR(back.samples[i], w.samples[i], 1e-4);
    }
    EXPECT_EQ(encode_wav(back), encode_wav(w));
    EXPECT_THROW(decode_wav({'R', 'I', 'F', 'F'}), ValidationError);
    EXPECT_THROW(read_wav(path.parent_path() / "missing.wav"), IoError);
}

TEST(SyntheticAudioPairs, AlignedAndDeterministic)
{
    const auto pairs = make_synthetic_audio_pairs(2, 7);
    ASSERT_EQ(pairs.size(), 2u);
    for (const auto& p : pairs) {
        EXPECT_EQ(audio_features(p.wave).size(0), static_cast<int64_t>(p.motions.size()));
    }
    EXPECT_EQ(make_synthetic_audio_pairs(2, 7)[1].wave.samples, pairs[1].wave.samples);
}
