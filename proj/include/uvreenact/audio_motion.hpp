#pragma once

#include "uvreenact/face_model.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <vector>

namespace uvreenact {

struct Waveform
{
    std::vector<float> samples; // mono
    int sample_rate = 16000;

    void validate() const;
    double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct MfccConfig
{
    double window_seconds = 0.025;
    double hop_seconds = 0.010;
    int num_coefficients = 13;
    int num_mel_bands = 26;
    double log_floor = 1e-10;

    int64_t window_samples(int sample_rate) const;
    int64_t hop_samples(int sample_rate) const;
    /// Smallest power of two >= the window length.
    int64_t fft_size(int sample_rate) const;
};

/// (N − win)/hop + 1, integer division; throws ValidationError if N < win.
int64_t mfcc_frame_count(int64_t num_samples, int sample_rate, const MfccConfig& config = {});

/**
 * Hamming-windowed frames → power spectrum |X|²/n_fft → 26 triangular HTK-mel filters spanning
 * 0..sr/2 → log(max(E, floor)) → orthonormal DCT-II, coefficients 0..12. Returns T×13 (float64).
 */
torch::Tensor extract_mfcc(const Waveform& wave, const MfccConfig& config = {});

/// Triangular mel filterbank, num_mel_bands × (n_fft/2 + 1).
torch::Tensor mel_filterbank(int sample_rate, int64_t fft_size, int num_bands);

/// Number of video frames covered by `mfcc_frames` feature rows.
int64_t video_frame_count(int64_t mfcc_frames, int sample_rate, const MfccConfig& config, double fps);

/**
 * Linearly interpolates MFCC rows (row k at time k·hop) to video frame times v/fps,
 * one row per video frame.
 */
torch::Tensor align_to_video(const torch::Tensor& mfcc, int sample_rate, const MfccConfig& config, double fps = 25.0);

/// LSTM over feature rows followed by a linear head to 70 motion values per frame.
class AudioRegressorImpl : public torch::nn::Module
{
public:
    explicit AudioRegressorImpl(int input_dims = 13, int hidden = 64);

    /// features B×T×F (or T×F) → B×T×70 (or T×70). Causal in T.
    torch::Tensor forward(const torch::Tensor& features);

    /// Sets the per-feature standardization applied before the LSTM.
    void set_normalization(const torch::Tensor& mean, const torch::Tensor& scale);

    int input_dims() const { return input_dims_; }

private:
    int input_dims_;
    torch::nn::LSTM lstm_{nullptr};
    torch::nn::Linear head_{nullptr};
    torch::Tensor input_mean_;
    torch::Tensor input_scale_;
};
TORCH_MODULE(AudioRegressor);

torch::Tensor predict_motion_sequence(const torch::Tensor& features, AudioRegressor& regressor);

struct AudioLosses
{
    torch::Tensor mse_exp;
    torch::Tensor mse_pose;
    torch::Tensor cont_exp;
    torch::Tensor cont_pose;

    torch::Tensor sum() const { return mse_exp + mse_pose + cont_exp + cont_pose; }
};

/**
 * pred, gt: T×70 or B×T×70. MSE over expression / pose columns; continuity is the mean over
 * consecutive prediction pairs of the squared L2 norm of their difference, per group.
 */
AudioLosses audio_losses(const torch::Tensor& pred, const torch::Tensor& gt);

struct AudioMotionPair
{
    Waveform wave;
    std::vector<MotionParams> motions; // one row per aligned video frame
};

/// Sine-mixture clips with distinct pitches, each paired with a motion sequence that drifts slowly around a
/// per-pair centre.
std::vector<AudioMotionPair> make_synthetic_audio_pairs(int count, uint64_t seed, double seconds = 1.0,
                                                        int sample_rate = 16000, double fps = 25.0);

struct AudioTrainOptions
{
    int max_steps = 5000;
    double lr = 3e-3;
    /// Training stops once the summed loss over all pairs is at or below this value.
    double target_loss = 1e-3;
    uint64_t seed = 0;
    double fps = 25.0;
};

struct AudioTrainResult
{
    int steps = 0;
    double loss = 0.0;
};

/// Full-batch Adam on the four audio losses (unit weights); sets the regressor's input normalization.
AudioTrainResult train_audio_regressor(AudioRegressor& regressor, const std::vector<AudioMotionPair>& pairs,
                                       const AudioTrainOptions& options = {});

/// MFCC features aligned to video frames, float32, T×13.
torch::Tensor audio_features(const Waveform& wave, double fps = 25.0);

/// Reads PCM 16-bit or IEEE float32 WAV; multi-channel input is averaged to mono.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(const std::vector<uint8_t>& bytes);
/// Writes 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const Waveform& wave);
std::vector<uint8_t> encode_wav(const Waveform& wave);

} // namespace uvreenact
