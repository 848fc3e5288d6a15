#include "uvreenact/audio_motion.hpp"

#include "uvreenact/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

namespace uvreenact {

void Waveform::validate() const
{
    if (sample_rate <= 0) {
        throw ValidationError("sample rate must be > 0");
    }
    for (float s : samples) {
        if (!std::isfinite(s)) {
            throw ValidationError("waveform contains non-finite samples");
        }
    }
}

int64_t MfccConfig::window_samples(int sample_rate) const
{
    return static_cast<int64_t>(std::llround(window_seconds * sample_rate));
}

int64_t MfccConfig::hop_samples(int sample_rate) const
{
    return static_cast<int64_t>(std::llround(hop_seconds * sample_rate));
}

int64_t MfccConfig::fft_size(int sample_rate) const
{
    int64_t n = 1;
    while (n < window_samples(sample_rate)) {
        n <<= 1;
    }
    return n;
}

int64_t mfcc_frame_count(int64_t num_samples, int sample_rate, const MfccConfig& config)
{
    const auto win = config.window_samples(sample_rate);
    const auto hop = config.hop_samples(sample_rate);
    if (win < 1 || hop < 1) {
        throw ValidationError("MFCC window and hop must be at least one sample");
    }
    if (num_samples < win) {
        throw ValidationError("waveform shorter than one analysis window (" + std::to_string(num_samples) + " < " +
                              std::to_string(win) + " samples)");
    }
    return (num_samples - win) / hop + 1;
}

torch::Tensor mel_filterbank(int sample_rate, int64_t fft_size, int num_bands)
{
    auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    const double mel_hi = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(static_cast<size_t>(num_bands + 2));
    for (int i = 0; i < num_bands + 2; ++i) {
        edges[static_cast<size_t>(i)] = mel_to_hz(mel_hi * i / (num_bands + 1));
    }
    const int64_t bins = fft_size / 2 + 1;
    auto fb = torch::zeros({num_bands, bins}, torch::kFloat64);
    auto a = fb.accessor<double, 2>();
    for (int k = 0; k < num_bands; ++k) {
        const double lo = edges[static_cast<size_t>(k)];
        const double mid = edges[static_cast<size_t>(k + 1)];
        const double hi = edges[static_cast<size_t>(k + 2)];
        for (int64_t i = 0; i < bins; ++i) {
            const double f = static_cast<double>(i) * sample_rate / static_cast<double>(fft_size);
            if (f > lo && f <= mid) {
                a[k][i] = (f - lo) / (mid - lo);
            } else if (f > mid && f < hi) {
                a[k][i] = (hi - f) / (hi - mid);
            }
        }
    }
    return fb;
}

torch::Tensor extract_mfcc(const Waveform& wave, const MfccConfig& config)
{
    wave.validate();
    const int sr = wave.sample_rate;
    const auto frames = mfcc_frame_count(static_cast<int64_t>(wave.samples.size()), sr, config);
    const auto win = config.window_samples(sr);
    const auto hop = config.hop_samples(sr);
    const auto n_fft = config.fft_size(sr);

    auto signal = torch::tensor(std::vector<double>(wave.samples.begin(), wave.samples.end()), torch::kFloat64);
    auto framed = signal.unfold(0, win, hop).narrow(0, 0, frames); // T×win
    auto window = 0.54 - 0.46 * torch::cos(torch::arange(win, torch::kFloat64) *
                                           (2.0 * std::numbers::pi / static_cast<double>(win - 1)));
    auto spectrum = torch::fft::rfft(framed * window, n_fft, -1);
    auto power = spectrum.abs().square() / static_cast<double>(n_fft);
    auto energies = torch::matmul(power, mel_filterbank(sr, n_fft, config.num_mel_bands).t());
    auto log_e = torch::log(torch::clamp_min(energies, config.log_floor));

    const int m = config.num_mel_bands;
    auto n = torch::arange(config.num_coefficients, torch::kFloat64).unsqueeze(1);
    auto k = torch::arange(m, torch::kFloat64).unsqueeze(0);
    auto dct = torch::cos(std::numbers::pi / m * n * (k + 0.5)) * std::sqrt(2.0 / m);
    dct[0] *= std::sqrt(0.5);
    return torch::matmul(log_e, dct.t());
}

int64_t video_frame_count(int64_t mfcc_frames, int sample_rate, const MfccConfig& config, double fps)
{
    if (mfcc_frames < 1) {
        return 0;
    }
    const double last_time = static_cast<double>((mfcc_frames - 1) * config.hop_samples(sample_rate)) / sample_rate;
    return static_cast<int64_t>(std::floor(last_time * fps + 1e-9)) + 1;
}

torch::Tensor align_to_video(const torch::Tensor& mfcc, int sample_rate, const MfccConfig& config, double fps)
{
    if (mfcc.dim() != 2 || mfcc.size(0) < 1) {
        throw ShapeError("align_to_video expects a non-empty T×F feature matrix");
    }
    const auto t = mfcc.size(0);
    const auto count = video_frame_count(t, sample_rate, config, fps);
    const double hop_time = static_cast<double>(config.hop_samples(sample_rate)) / sample_rate;
    auto out = torch::empty({count, mfcc.size(1)}, mfcc.options());
    for (int64_t v = 0; v < count; ++v) {
        const double pos = std::min(static_cast<double>(v) / fps / hop_time, static_cast<double>(t - 1));
        const auto lo = static_cast<int64_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, t - 1);
        const double w = pos - static_cast<double>(lo);
        out[v] = mfcc[lo] * (1.0 - w) + mfcc[hi] * w;
    }
    return out;
}

AudioRegressorImpl::AudioRegressorImpl(int input_dims, int hidden) : input_dims_(input_dims)
{
    lstm_ = register_module("lstm", torch::nn::LSTM(torch::nn::LSTMOptions(input_dims, hidden).batch_first(true)));
    head_ = register_module("head", torch::nn::Linear(hidden, kMotionDims));
    input_mean_ = register_buffer("input_mean", torch::zeros({input_dims}));
    input_scale_ = register_buffer("input_scale", torch::ones({input_dims}));
}

void AudioRegressorImpl::set_normalization(const torch::Tensor& mean, const torch::Tensor& scale)
{
    if (mean.numel() != input_dims_ || scale.numel() != input_dims_) {
        throw ShapeError("normalization statistics must have one entry per feature");
    }
    torch::NoGradGuard guard;
    input_mean_.copy_(mean.reshape({input_dims_}));
    input_scale_.copy_(scale.reshape({input_dims_}).clamp_min(1e-6));
}

torch::Tensor AudioRegressorImpl::forward(const torch::Tensor& features)
{
    const bool single = features.dim() == 2;
    auto x = single ? features.unsqueeze(0) : features;
    if (x.dim() != 3 || x.size(2) != input_dims_ || x.size(1) < 1) {
        throw ShapeError("audio regressor expects non-empty B×T×" + std::to_string(input_dims_) + " features");
    }
    x = (x.to(input_mean_.scalar_type()) - input_mean_) / input_scale_;
    auto hidden = std::get<0>(lstm_->forward(x));
    auto out = head_->forward(hidden);
    return single ? out.squeeze(0) : out;
}

torch::Tensor predict_motion_sequence(const torch::Tensor& features, AudioRegressor& regressor)
{
    return regressor->forward(features);
}

AudioLosses audio_losses(const torch::Tensor& pred, const torch::Tensor& gt)
{
    if (pred.sizes() != gt.sizes()) {
        throw ShapeError("audio_losses: prediction and ground truth differ in length or width");
    }
    if (pred.size(-1) != kMotionDims) {
        throw ShapeError("audio_losses: rows must have 70 values");
    }
    const auto time_dim = pred.dim() - 2;
    auto exp_p = pred.narrow(-1, 0, kExpDims);
    auto pose_p = pred.narrow(-1, kExpDims, kPoseDims);
    auto exp_g = gt.narrow(-1, 0, kExpDims);
    auto pose_g = gt.narrow(-1, kExpDims, kPoseDims);
    auto continuity = [&](const torch::Tensor& x) {
        const auto t = x.size(time_dim);
        if (t < 2) {
            return torch::zeros({}, x.options());
        }
        auto diff = x.narrow(time_dim, 1, t - 1) - x.narrow(time_dim, 0, t - 1);
        return diff.square().sum(-1).mean();
    };
    AudioLosses losses;
    losses.mse_exp = (exp_p - exp_g).square().mean();
    losses.mse_pose = (pose_p - pose_g).square().mean();
    losses.cont_exp = continuity(exp_p);
    losses.cont_pose = continuity(pose_p);
    return losses;
}

namespace {

template <typename T>
T read_le(const uint8_t* p)
{
    T value;
    std::memcpy(&value, p, sizeof(T));
    return value;
}

template <typename T>
void append_le(std::vector<uint8_t>& out, T value)
{
    uint8_t buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

} // namespace

Waveform decode_wav(const std::vector<uint8_t>& bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw ValidationError("not a RIFF/WAVE file");
    }
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t* data = nullptr;
    size_t data_size = 0;
    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const auto* chunk = bytes.data() + pos;
        const auto size = read_le<uint32_t>(chunk + 4);
        const size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16 && body + 16 <= bytes.size()) {
            format = read_le<uint16_t>(bytes.data() + body);
            channels = read_le<uint16_t>(bytes.data() + body + 2);
            rate = read_le<uint32_t>(bytes.data() + body + 4);
            bits = read_le<uint16_t>(bytes.data() + body + 14);
            if (format == 0xFFFE && size >= 26 && body + 26 <= bytes.size()) {
                format = read_le<uint16_t>(bytes.data() + body + 24); // extensible: sub-format GUID prefix
            }
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = std::min<size_t>(size, bytes.size() - body);
        }
        pos = body + size + (size & 1u);
    }
    if (data == nullptr || channels == 0 || rate == 0) {
        throw ValidationError("WAV file lacks a fmt or data chunk");
    }
    const bool pcm16 = format == 1 && bits == 16;
    const bool float32 = format == 3 && bits == 32;
    if (!pcm16 && !float32) {
        throw ValidationError("unsupported WAV encoding (need 16-bit PCM or 32-bit float)");
    }
    const size_t frame_bytes = static_cast<size_t>(channels) * (bits / 8);
    const size_t frames = data_size / frame_bytes;
    Waveform wave;
    wave.sample_rate = static_cast<int>(rate);
    wave.samples.resize(frames);
    for (size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
            const uint8_t* s = data + i * frame_bytes + c * (bits / 8);
            acc += pcm16 ? read_le<int16_t>(s) / 32768.0 : static_cast<double>(read_le<float>(s));
        }
        wave.samples[i] = static_cast<float>(acc / channels);
    }
    return wave;
}

Waveform read_wav(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open WAV file " + path.string());
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

std::vector<uint8_t> encode_wav(const Waveform& wave)
{
    wave.validate();
    const auto n = static_cast<uint32_t>(wave.samples.size());
    std::vector<uint8_t> out;
    out.reserve(44 + 2 * n);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    append_le<uint32_t>(out, 36 + 2 * n);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    append_le<uint32_t>(out, 16);
    append_le<uint16_t>(out, 1);
    append_le<uint16_t>(out, 1);
    append_le<uint32_t>(out, static_cast<uint32_t>(wave.sample_rate));
    append_le<uint32_t>(out, static_cast<uint32_t>(wave.sample_rate) * 2);
    append_le<uint16_t>(out, 2);
    append_le<uint16_t>(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    append_le<uint32_t>(out, 2 * n);
    for (float s : wave.samples) {
        // Same 1/32768 scale as decode_wav, so decode → encode is lossless.
        const auto q = static_cast<int16_t>(std::clamp<long>(std::lround(static_cast<double>(s) * 32768.0), -32768, 32767));
        append_le<int16_t>(out, q);
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave)
{
    const auto bytes = encode_wav(wave);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write WAV file " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

torch::Tensor audio_features(const Waveform& wave, double fps)
{
    const MfccConfig config;
    return align_to_video(extract_mfcc(wave, config), wave.sample_rate, config, fps).to(torch::kFloat32);
}

std::vector<AudioMotionPair> make_synthetic_audio_pairs(int count, uint64_t seed, double seconds, int sample_rate,
                                                        double fps)
{
    if (count < 1 || seconds <= 0.0 || sample_rate <= 0) {
        throw ValidationError("audio pair generation needs count >= 1, seconds > 0 and a positive sample rate");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<int64_t>(std::llround(seconds * sample_rate));
    const MfccConfig config;
    const auto frames = video_frame_count(mfcc_frame_count(n, sample_rate, config), sample_rate, config, fps);
    std::vector<AudioMotionPair> pairs;
    for (int p = 0; p < count; ++p) {
        AudioMotionPair pair;
        pair.wave.sample_rate = sample_rate;
        pair.wave.samples.resize(static_cast<size_t>(n));
        const double f0 = 120.0 + 60.0 * p + 30.0 * unit(rng);
        const double rate = 1.5 + 3.0 * unit(rng);
        const double ph = 2.0 * std::numbers::pi * unit(rng);
        for (int64_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sample_rate;
            const double env = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * rate * t + ph);
            double v = 0.0;
            for (int h = 1; h <= 4; ++h) {
                v += std::sin(2.0 * std::numbers::pi * f0 * h * t) / h;
            }
            pair.wave.samples[static_cast<size_t>(i)] = static_cast<float>(0.25 * env * v);
        }
        // Centres use the spreads of the synthetic video corpus (expression 0.3, angle 0.12, translation 0.04)
        // and must be recovered from the pitch. The continuity loss charges every frame-to-frame change,
        // so the swing around the centre stays small and slow.
        std::vector<double> centre(kMotionDims), amp(kMotionDims), phase(kMotionDims);
        for (int d = 0; d < kMotionDims; ++d) {
            const double spread = d < kExpDims ? 0.3 : (d < kExpDims + 3 ? 0.12 : 0.04);
            centre[static_cast<size_t>(d)] = spread * normal(rng);
            amp[static_cast<size_t>(d)] = 0.01 * normal(rng);
            phase[static_cast<size_t>(d)] = 2.0 * std::numbers::pi * unit(rng);
        }
        for (int64_t f = 0; f < frames; ++f) {
            std::vector<float> row(kMotionDims);
            const double t = static_cast<double>(f) / fps;
            for (int d = 0; d < kMotionDims; ++d) {
                const auto k = static_cast<size_t>(d);
                row[k] = static_cast<float>(centre[k] + amp[k] * std::sin(2.0 * std::numbers::pi * 0.5 * t + phase[k]));
            }
            pair.motions.push_back(split_descriptor(row));
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

AudioTrainResult train_audio_regressor(AudioRegressor& regressor, const std::vector<AudioMotionPair>& pairs,
                                       const AudioTrainOptions& options)
{
    if (pairs.empty()) {
        throw ValidationError("audio training needs at least one pair");
    }
    std::vector<torch::Tensor> feats, targets;
    for (const auto& p : pairs) {
        auto f = audio_features(p.wave, options.fps);
        if (f.size(0) != static_cast<int64_t>(p.motions.size())) {
            throw ValidationError("audio pair has " + std::to_string(f.size(0)) + " feature rows but " +
                                  std::to_string(p.motions.size()) + " motion rows");
        }
        std::vector<float> rows;
        for (const auto& m : p.motions) {
            const auto d = motion_descriptor(m);
            rows.insert(rows.end(), d.begin(), d.end());
        }
        feats.push_back(f);
        targets.push_back(torch::tensor(rows, torch::kFloat32).reshape({-1, kMotionDims}));
    }
    const auto len = feats.front().size(0);
    for (const auto& f : feats) {
        if (f.size(0) != len) {
            throw ValidationError("audio pairs must share one length for full-batch training");
        }
    }
    const auto x = torch::stack(feats);
    const auto y = torch::stack(targets);
    const auto flat = x.reshape({-1, x.size(2)});
    regressor->set_normalization(flat.mean(0), flat.std(0));

    torch::manual_seed(options.seed);
    torch::optim::Adam opt(regressor->parameters(), torch::optim::AdamOptions(options.lr));
    AudioTrainResult result;
    for (int step = 0; step < options.max_steps; ++step) {
        opt.zero_grad();
        auto loss = audio_losses(regressor->forward(x), y).sum();
        result.loss = loss.item<double>();
        result.steps = step;
        if (result.loss <= options.target_loss) {
            return result;
        }
        loss.backward();
        opt.step();
    }
    torch::NoGradGuard guard;
    result.steps = options.max_steps;
    result.loss = audio_losses(regressor->forward(x), y).sum().item<double>();
    return result;
}

} // namespace uvreenact
