#pragma once

#include "uvreenact/data_io.hpp"
#include "uvreenact/final_edit.hpp"
#include "uvreenact/metrics.hpp"
#include "uvreenact/motion_codec.hpp"
#include "uvreenact/uv_pipeline.hpp"
#include "uvreenact/warp2d.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace uvreenact {

/**
 * Flat key=value configuration ('#' starts a comment). Keys:
 *   data_root, out_dir, resolution, uv_resolution, window, base_channels, lambda_warp, lambda_uvref,
 *   lambda_cons, lambda_edit, lr, warmup_steps, steps, batch_size, seed, extractor, checkpoint_every,
 *   holdout_fraction, threads
 */
struct TrainConfig
{
    std::string data_root = "data";
    std::string out_dir = "runs/default";
    int resolution = 64;
    int uv_resolution = 64;
    int window = 1;
    int base_channels = 16;
    LossWeights weights;
    double lr = 1e-4;
    int warmup_steps = 50;
    int steps = 2000;
    int batch_size = 4;
    uint64_t seed = 0;
    std::string extractor = "pyramid";
    int checkpoint_every = 500;
    double holdout_fraction = 0.25;
    int threads = 1;

    /// Throws ParseError naming the line for unknown keys or malformed values.
    static TrainConfig parse(const std::string& text, const std::string& source = "<config>");
    static TrainConfig from_file(const std::filesystem::path& path);
    /// Applies one key=value assignment; throws ValidationError for an unknown key.
    void set(const std::string& key, const std::string& value);
    std::string to_text() const;
    void validate() const;
};

/// The four jointly trained networks.
class ReenactModelImpl : public torch::nn::Module
{
public:
    ReenactModelImpl(int half_width, int base_channels);

    MotionEncoder encoder{nullptr};
    WarpNet warp{nullptr};
    UVRefNet uvref{nullptr};
    EditNet edit{nullptr};
};
TORCH_MODULE(ReenactModel);

/// Batched inputs of one forward pass. Geometry is precomputed from the known meshes.
struct PipelineInputs
{
    torch::Tensor source;        // B×3×H×W
    torch::Tensor window;        // B×70(2i+1), target motion window
    torch::Tensor source_lookup; // B×U×U×2 image coordinates of the source unwrap
    torch::Tensor source_valid;  // B×U×U
    torch::Tensor target_uv;     // B×H×W×2 texture coordinates of the target render
    torch::Tensor target_mask;   // B×H×W
};

struct PipelineOutputs
{
    torch::Tensor latent;
    torch::Tensor flow;       // B×H/4×W/4×2
    torch::Tensor background; // warped source
    torch::Tensor uv_initial;
    torch::Tensor uv_refined;
    torch::Tensor rendered;
    torch::Tensor combined;
    torch::Tensor final_image;
};

/// flow → warp → unwrap → refine → render → composite → edit.
PipelineOutputs run_pipeline(ReenactModel& model, const PipelineInputs& in);

/// Per-frame geometry derived from the ground-truth mesh.
struct FrameGeometry
{
    torch::Tensor lookup;    // U×U×2
    torch::Tensor valid;     // U×U
    torch::Tensor pixel_uv;  // H×W×2
    torch::Tensor mask;      // H×W
};

FrameGeometry frame_geometry(const MorphableBasis& basis, const IdentityParams& identity, const MotionParams& motion,
                             const CameraConfig& camera, int64_t resolution, int64_t uv_resolution);

/// One video with its frames, windows and geometry held in memory.
struct VideoClip
{
    size_t identity = 0;
    torch::Tensor frames;   // N×3×H×W
    torch::Tensor windows;  // N×70(2i+1)
    torch::Tensor lookup;   // N×U×U×2
    torch::Tensor valid;    // N×U×U
    torch::Tensor pixel_uv; // N×H×W×2
    torch::Tensor mask;     // N×H×W
    std::vector<MotionParams> motions;
    int64_t n_train = 0;    // frames [0, n_train) are training frames, the rest are held out

    int64_t size() const { return frames.size(0); }
};

struct TrainingSet
{
    Corpus corpus;
    std::vector<VideoClip> clips;
};

/// Throws IoError if the dataset is missing.
TrainingSet load_training_set(const TrainConfig& config);

struct LossComponents
{
    double warp = 0.0;
    double uvref = 0.0;
    double cons = 0.0;
    double edit = 0.0;
    double total = 0.0;
};

/// A (source, target) frame pair inside one clip.
struct FramePair
{
    size_t clip = 0;
    int64_t source = 0;
    int64_t target = 0;
};

/// Gathers the inputs for source→target passes; with `swapped` the roles are exchanged.
PipelineInputs gather_inputs(const TrainingSet& data, const std::vector<FramePair>& pairs, bool swapped);
torch::Tensor gather_targets(const TrainingSet& data, const std::vector<FramePair>& pairs, bool swapped);

/// Thrown when a loss component is NaN or infinite; the message names the first such component.
class NonFiniteLossError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class Trainer
{
public:
    Trainer(TrainConfig config, std::shared_ptr<const TrainingSet> data);

    /// Forward passes for the pairs and their swapped counterparts, weighted loss, one Adam update.
    LossComponents train_step(const std::vector<FramePair>& pairs);
    /// Samples a batch of uniform random training pairs from the trainer's generator.
    std::vector<FramePair> sample_batch();
    /// Loss components without an update.
    LossComponents evaluate_loss(const std::vector<FramePair>& pairs);

    /// Runs until config.steps, logging to <out_dir>/loss.csv and checkpointing every K steps.
    void train();

    Checkpoint checkpoint() const;
    void restore(const Checkpoint& checkpoint);
    void save(const std::filesystem::path& path) const;

    int step() const { return step_; }
    ReenactModel& model() { return model_; }
    const TrainConfig& config() const { return config_; }
    torch::optim::Adam& optimizer() { return *optimizer_; }

private:
    LossComponents compute(const std::vector<FramePair>& pairs, torch::Tensor* total);

    TrainConfig config_;
    std::shared_ptr<const TrainingSet> data_;
    std::shared_ptr<PerceptualExtractor> extractor_;
    ReenactModel model_{nullptr};
    std::unique_ptr<torch::optim::Adam> optimizer_;
    std::mt19937_64 rng_;
    int step_ = 0;
};

/// Model weights plus the configuration echo from a checkpoint.
struct LoadedModel
{
    TrainConfig config;
    ReenactModel model{nullptr};
    std::shared_ptr<const MorphableBasis> basis;
    CameraConfig camera;
};

LoadedModel load_model(const std::filesystem::path& checkpoint_path);
LoadedModel load_model(const Checkpoint& checkpoint);

/// Cached per-source state: everything that does not depend on the target motion.
struct SourceState
{
    torch::Tensor image;  // 3×H×W
    IdentityParams identity;
    torch::Tensor lookup; // U×U×2
    torch::Tensor valid;  // U×U
};

/// Single-source inference on top of a loaded model.
class Reenactor
{
public:
    Reenactor(ReenactModel model, TrainConfig config, std::shared_ptr<const MorphableBasis> basis,
              CameraConfig camera);

    SourceState prepare(const torch::Tensor& image, const IdentityParams& identity,
                        const MotionParams& source_motion) const;
    /// Reenacts the source with the window centred at `t` of the driving sequence.
    torch::Tensor reenact(const SourceState& source, const std::vector<MotionParams>& driving, int64_t t) const;
    torch::Tensor reenact(const SourceState& source, const MotionParams& target) const;
    PipelineOutputs run(const SourceState& source, const std::vector<MotionParams>& driving, int64_t t) const;

    const TrainConfig& config() const { return config_; }
    const MorphableBasis& basis() const { return *basis_; }

private:
    ReenactModel model_;
    TrainConfig config_;
    std::shared_ptr<const MorphableBasis> basis_;
    CameraConfig camera_;
};

struct EvalOptions
{
    std::string mode = "same";  // same | cross
    std::string split = "test"; // test | train | all
    /// Motion-estimator iterations per blur stage for AED; 0 skips the estimator (aed fields stay 0).
    int fit_iterations = 30;
    /// Caps the number of scored frames per clip (0 = all).
    int max_frames_per_clip = 0;
};

struct EvalResult
{
    MetricsReport report;
    /// AED of estimated output motion against the ground-truth target motion.
    double aed_ground_truth = 0.0;
    /// AED of the estimator itself on the ground-truth target frames.
    double aed_estimator_floor = 0.0;
    std::vector<torch::Tensor> outputs;
};

/// Same mode: frame 0 of each clip drives its own later frames. Cross mode: frame 0 of clip k is
/// driven by clip (k+1) mod n. Throws ValidationError if the split is empty.
EvalResult evaluate(const Reenactor& reenactor, const TrainingSet& data, const EvalOptions& options);

} // namespace uvreenact
