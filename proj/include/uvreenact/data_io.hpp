#pragma once

#include "uvreenact/face_model.hpp"
#include "uvreenact/motion_fit.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace uvreenact {

// ---------------------------------------------------------------------------
// Checkpoint container
//
//   "IFUV" | u32 version | u32 entry count | entries...
//   entry: u16 name length | name bytes | u8 dtype | u8 rank | u32 dims[rank] | raw little-endian values
//   dtype: 0 = float32, 1 = uint8, 2 = int64, 3 = float64
// ---------------------------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint
{
    std::vector<std::pair<std::string, torch::Tensor>> entries;

    void put(const std::string& name, const torch::Tensor& value);
    bool contains(const std::string& name) const;
    /// Throws CheckpointError naming the missing entry.
    const torch::Tensor& get(const std::string& name) const;

    void put_text(const std::string& name, const std::string& text);
    std::string get_text(const std::string& name) const;

    /// Stores every parameter and buffer of `module` as "<prefix>.<name>".
    void put_module(const std::string& prefix, const torch::nn::Module& module);
    /// Copies entries back into `module`; throws CheckpointError on a missing or mis-shaped entry.
    void load_module(const std::string& prefix, torch::nn::Module& module) const;
};

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes);

void save_basis(const MorphableBasis& basis, const std::filesystem::path& path);
MorphableBasis load_basis(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Motion and identity files
// ---------------------------------------------------------------------------

/// One JSON object per line: {"exp":[64],"angle":[3],"trans":[3]}, values with 9 significant digits.
void write_motion_file(const std::filesystem::path& path, const std::vector<MotionParams>& motions);
std::vector<MotionParams> read_motion_file(const std::filesystem::path& path);
std::string format_motion_line(const MotionParams& motion);
/// `source` and `line` only label errors.
MotionParams parse_motion_line(const std::string& text, const std::string& source = "<motion>", std::size_t line = 1);

/// {"alpha":[D_id]}
void write_identity_file(const std::filesystem::path& path, const IdentityParams& identity);
IdentityParams read_identity_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// 3×H×W in [−1,1] → 16-bit RGB PNG (linear map to 0..65535).
void write_png(const std::filesystem::path& path, const torch::Tensor& image);
std::vector<uint8_t> encode_png(const torch::Tensor& image);
/// Accepts 8- or 16-bit gray/RGB/RGBA PNG; returns 3×H×W float32 in [−1,1].
torch::Tensor read_png(const std::filesystem::path& path);
torch::Tensor decode_png(const std::vector<uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Dataset layout: <root>/basis.ifuv, <root>/<identity>/{identity.json,texture.png,background.png},
// <root>/<identity>/<video>/{000000.png,...,motion.jsonl}
// ---------------------------------------------------------------------------

struct VideoRecord
{
    std::string identity_id;
    std::string video_id;
    std::vector<std::filesystem::path> frame_paths;
    std::vector<MotionParams> motions;
    IdentityParams identity;
};

/// Throws ValidationError when frame and motion counts differ.
VideoRecord load_video(const std::filesystem::path& dir);

struct IdentityRecord
{
    std::string id;
    IdentityParams identity;
    torch::Tensor texture;    // 3×U×U
    torch::Tensor background; // 3×H×W
    std::vector<VideoRecord> videos;
};

struct Corpus
{
    std::filesystem::path root;
    std::shared_ptr<const MorphableBasis> basis;
    CameraConfig camera;
    std::vector<IdentityRecord> identities;

    FaceAppearance appearance(size_t identity) const;
};

Corpus load_corpus(const std::filesystem::path& root);

/// IFACEUV_DATA_ROOT if set, otherwise "data".
std::filesystem::path default_data_root();

struct CorpusConfig
{
    int n_identities = 4;
    int videos_per_identity = 1;
    int frames_per_video = 32;
    int resolution = 64;
    int uv_resolution = 64;
    uint64_t seed = 0;
    float camera_scale = 0.75f;
    /// Std of each video's expression centre and of identity coefficients.
    double exp_std = 0.3;
    double identity_std = 0.5;
    double angle_std = 0.12;
    double trans_std = 0.04;
    /// Amplitude of the slow within-video drift relative to the centre spreads.
    double drift = 0.4;
    /// Bound on the per-frame change of every motion value.
    double max_delta = 0.05;
    /// Highest spatial frequency (cycles per unit UV) in the procedural textures.
    double texture_frequency = 3.0;
};

/// Deterministic: the same config produces byte-identical files. Throws IoError if root is unwritable.
void generate_synthetic_corpus(const std::filesystem::path& root, const CorpusConfig& config);

/// The motion trajectory the corpus generator would produce (exposed for tests).
std::vector<MotionParams> synthetic_motion_trajectory(int frames, const CorpusConfig& config, uint64_t seed);

/// Procedural colour texture 3×U×U in [−1,1].
torch::Tensor synthetic_texture(int64_t uv_resolution, double max_frequency, uint64_t seed);
/// Procedural background 3×H×W in [−1,1].
torch::Tensor synthetic_background(int64_t resolution, uint64_t seed);

} // namespace uvreenact
