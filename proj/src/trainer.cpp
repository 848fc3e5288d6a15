#include "uvreenact/trainer.hpp"

#include "uvreenact/diff_render.hpp"
#include "uvreenact/errors.hpp"
#include "uvreenact/motion_fit.hpp"
#include "uvreenact/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace uvreenact {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& value)
{
    size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) {
        throw ValidationError("config key '" + key + "' expects an integer, got '" + value + "'");
    }
    return v;
}

double to_double(const std::string& key, const std::string& value)
{
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty()) {
        throw ValidationError("config key '" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

std::string g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

torch::Tensor window_tensor(const std::vector<MotionParams>& motions, int64_t t, int half_width)
{
    const auto w = assemble_window(motions, t, half_width);
    return torch::tensor(w.frames, torch::kFloat32);
}

double scalar(const torch::Tensor& t)
{
    return t.item<double>();
}

} // namespace

// --- config ------------------------------------------------------------------

void TrainConfig::set(const std::string& key, const std::string& value)
{
    if (key == "data_root") {
        data_root = value;
    } else if (key == "out_dir") {
        out_dir = value;
    } else if (key == "resolution") {
        resolution = to_int(key, value);
    } else if (key == "uv_resolution") {
        uv_resolution = to_int(key, value);
    } else if (key == "window") {
        window = to_int(key, value);
    } else if (key == "base_channels") {
        base_channels = to_int(key, value);
    } else if (key == "lambda_warp") {
        weights.warp = to_double(key, value);
    } else if (key == "lambda_uvref") {
        weights.uvref = to_double(key, value);
    } else if (key == "lambda_cons") {
        weights.cons = to_double(key, value);
    } else if (key == "lambda_edit") {
        weights.edit = to_double(key, value);
    } else if (key == "lr") {
        lr = to_double(key, value);
    } else if (key == "warmup_steps") {
        warmup_steps = to_int(key, value);
    } else if (key == "steps") {
        steps = to_int(key, value);
    } else if (key == "batch_size") {
        batch_size = to_int(key, value);
    } else if (key == "seed") {
        seed = static_cast<uint64_t>(to_int(key, value));
    } else if (key == "extractor") {
        extractor = value;
    } else if (key == "checkpoint_every") {
        checkpoint_every = to_int(key, value);
    } else if (key == "holdout_fraction") {
        holdout_fraction = to_double(key, value);
    } else if (key == "threads") {
        threads = to_int(key, value);
    } else {
        throw ValidationError("unknown config key '" + key + "'");
    }
}

TrainConfig TrainConfig::parse(const std::string& text, const std::string& source)
{
    TrainConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const auto body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source, number, "expected key=value");
        }
        try {
            config.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
        } catch (const ValidationError& e) {
            throw ParseError(source, number, e.what());
        }
    }
    config.validate();
    return config;
}

TrainConfig TrainConfig::from_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string TrainConfig::to_text() const
{
    std::ostringstream out;
    out << "data_root=" << data_root << "\n"
        << "out_dir=" << out_dir << "\n"
        << "resolution=" << resolution << "\n"
        << "uv_resolution=" << uv_resolution << "\n"
        << "window=" << window << "\n"
        << "base_channels=" << base_channels << "\n"
        << "lambda_warp=" << g17(weights.warp) << "\n"
        << "lambda_uvref=" << g17(weights.uvref) << "\n"
        << "lambda_cons=" << g17(weights.cons) << "\n"
        << "lambda_edit=" << g17(weights.edit) << "\n"
        << "lr=" << g17(lr) << "\n"
        << "warmup_steps=" << warmup_steps << "\n"
        << "steps=" << steps << "\n"
        << "batch_size=" << batch_size << "\n"
        << "seed=" << seed << "\n"
        << "extractor=" << extractor << "\n"
        << "checkpoint_every=" << checkpoint_every << "\n"
        << "holdout_fraction=" << g17(holdout_fraction) << "\n"
        << "threads=" << threads << "\n";
    return out.str();
}

void TrainConfig::validate() const
{
    weights.validate();
    if (resolution < 8 || resolution % 8 != 0) {
        throw ValidationError("resolution must be a positive multiple of 8");
    }
    if (uv_resolution < 8 || uv_resolution % 8 != 0) {
        throw ValidationError("uv_resolution must be a positive multiple of 8");
    }
    if (window < 0 || base_channels < 1 || batch_size < 1 || steps < 0 || warmup_steps < 0 || threads < 1) {
        throw ValidationError("window, base_channels, batch_size, steps, warmup_steps and threads must be valid counts");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ValidationError("lr must be > 0");
    }
    if (checkpoint_every < 1) {
        throw ValidationError("checkpoint_every must be >= 1");
    }
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
        throw ValidationError("holdout_fraction must lie in [0, 1)");
    }
    if (extractor != "pyramid" && extractor != "identity") {
        throw ValidationError("extractor must be 'pyramid' or 'identity'");
    }
}

// --- model -------------------------------------------------------------------

ReenactModelImpl::ReenactModelImpl(int half_width, int base_channels)
{
    encoder = register_module("encoder", MotionEncoder(half_width));
    warp = register_module("warp", WarpNet(base_channels));
    uvref = register_module("uvref", UVRefNet(base_channels));
    edit = register_module("edit", EditNet(base_channels));
}

PipelineOutputs run_pipeline(ReenactModel& model, const PipelineInputs& in)
{
    PipelineOutputs out;
    out.latent = model->encoder->forward(in.window);
    out.flow = predict_flow(in.source, out.latent, model->warp);
    out.background = warp_image(in.source, upsample_flow(out.flow, 4));
    out.uv_initial = apply_unwrap(in.source, in.source_lookup, in.source_valid);
    out.uv_refined = model->uvref->forward(in.source, out.uv_initial, in.source_valid, out.latent);
    out.rendered = sample_texture(out.uv_refined, in.target_uv, in.target_mask);
    out.combined = composite(out.background, out.rendered, in.target_mask);
    out.final_image = model->edit->forward(in.source, out.background, out.combined, out.latent);
    return out;
}

FrameGeometry frame_geometry(const MorphableBasis& basis, const IdentityParams& identity, const MotionParams& motion,
                             const CameraConfig& camera, int64_t resolution, int64_t uv_resolution)
{
    const auto mesh = build_mesh(basis, identity, motion.exp);
    const auto projected = project_vertices(mesh, motion, camera);
    const auto lookup = compute_unwrap_lookup(mesh, projected, uv_resolution);
    auto [uv, mask] = pixel_uv_coords(mesh, projected, resolution);
    return FrameGeometry{lookup.image_coords.to(torch::kFloat32), lookup.validity.to(torch::kFloat32),
                         uv.to(torch::kFloat32), mask.to(torch::kFloat32)};
}

// --- data --------------------------------------------------------------------

TrainingSet load_training_set(const TrainConfig& config)
{
    TrainingSet set;
    set.corpus = load_corpus(config.data_root);
    for (size_t i = 0; i < set.corpus.identities.size(); ++i) {
        const auto& rec = set.corpus.identities[i];
        for (const auto& video : rec.videos) {
            const auto n = static_cast<int64_t>(video.frame_paths.size());
            if (n < 2) {
                continue;
            }
            VideoClip clip;
            clip.identity = i;
            clip.motions = video.motions;
            std::vector<torch::Tensor> frames, windows, lookup, valid, pixel_uv, mask;
            for (int64_t f = 0; f < n; ++f) {
                auto img = read_png(video.frame_paths[static_cast<size_t>(f)]);
                if (img.size(1) != config.resolution || img.size(2) != config.resolution) {
                    throw ValidationError("frame " + video.frame_paths[static_cast<size_t>(f)].string() +
                                          " does not match the configured resolution");
                }
                frames.push_back(img);
                windows.push_back(window_tensor(clip.motions, f, config.window));
                const auto geo = frame_geometry(*set.corpus.basis, rec.identity, clip.motions[static_cast<size_t>(f)],
                                                set.corpus.camera, config.resolution, config.uv_resolution);
                lookup.push_back(geo.lookup);
                valid.push_back(geo.valid);
                pixel_uv.push_back(geo.pixel_uv);
                mask.push_back(geo.mask);
            }
            clip.frames = torch::stack(frames);
            clip.windows = torch::stack(windows);
            clip.lookup = torch::stack(lookup);
            clip.valid = torch::stack(valid);
            clip.pixel_uv = torch::stack(pixel_uv);
            clip.mask = torch::stack(mask);
            const auto held = static_cast<int64_t>(std::floor(config.holdout_fraction * static_cast<double>(n)));
            clip.n_train = std::max<int64_t>(n - held, 2);
            set.clips.push_back(std::move(clip));
        }
    }
    if (set.clips.empty()) {
        throw ValidationError("dataset " + config.data_root + " has no video with at least two frames");
    }
    return set;
}

PipelineInputs gather_inputs(const TrainingSet& data, const std::vector<FramePair>& pairs, bool swapped)
{
    std::vector<torch::Tensor> source, window, lookup, valid, uv, mask;
    for (const auto& p : pairs) {
        const auto& clip = data.clips.at(p.clip);
        const auto s = swapped ? p.target : p.source;
        const auto t = swapped ? p.source : p.target;
        source.push_back(clip.frames[s]);
        window.push_back(clip.windows[t]);
        lookup.push_back(clip.lookup[s]);
        valid.push_back(clip.valid[s]);
        uv.push_back(clip.pixel_uv[t]);
        mask.push_back(clip.mask[t]);
    }
    return PipelineInputs{torch::stack(source), torch::stack(window), torch::stack(lookup),
                          torch::stack(valid),  torch::stack(uv),     torch::stack(mask)};
}

torch::Tensor gather_targets(const TrainingSet& data, const std::vector<FramePair>& pairs, bool swapped)
{
    std::vector<torch::Tensor> out;
    for (const auto& p : pairs) {
        out.push_back(data.clips.at(p.clip).frames[swapped ? p.source : p.target]);
    }
    return torch::stack(out);
}

// --- trainer -----------------------------------------------------------------

Trainer::Trainer(TrainConfig config, std::shared_ptr<const TrainingSet> data)
    : config_(std::move(config)), data_(std::move(data)), rng_(config_.seed)
{
    config_.validate();
    if (!data_ || data_->clips.empty()) {
        throw ValidationError("trainer needs a non-empty training set");
    }
    torch::set_num_threads(config_.threads);
    torch::manual_seed(config_.seed);
    extractor_ = make_extractor(config_.extractor);
    model_ = ReenactModel(config_.window, config_.base_channels);
    optimizer_ = std::make_unique<torch::optim::Adam>(model_->parameters(), torch::optim::AdamOptions(config_.lr));
}

std::vector<FramePair> Trainer::sample_batch()
{
    std::vector<FramePair> pairs;
    std::uniform_int_distribution<size_t> pick_clip(0, data_->clips.size() - 1);
    for (int b = 0; b < config_.batch_size; ++b) {
        FramePair p;
        p.clip = pick_clip(rng_);
        std::uniform_int_distribution<int64_t> pick_frame(0, data_->clips[p.clip].n_train - 1);
        p.source = pick_frame(rng_);
        p.target = pick_frame(rng_);
        pairs.push_back(p);
    }
    return pairs;
}

LossComponents Trainer::compute(const std::vector<FramePair>& pairs, torch::Tensor* total)
{
    if (pairs.empty()) {
        throw ValidationError("train_step needs a non-empty batch");
    }
    const auto a = gather_inputs(*data_, pairs, false);
    const auto b = gather_inputs(*data_, pairs, true);
    const PipelineInputs both{torch::cat({a.source, b.source}),     torch::cat({a.window, b.window}),
                              torch::cat({a.source_lookup, b.source_lookup}),
                              torch::cat({a.source_valid, b.source_valid}),
                              torch::cat({a.target_uv, b.target_uv}), torch::cat({a.target_mask, b.target_mask})};
    const auto targets = torch::cat({gather_targets(*data_, pairs, false), gather_targets(*data_, pairs, true)});
    std::vector<torch::Tensor> target_features;
    {
        torch::NoGradGuard guard;
        target_features = extractor_->features(targets);
    }
    const auto out = run_pipeline(model_, both);
    const auto n = static_cast<int64_t>(pairs.size());
    const auto l_warp = perceptual_l1(target_features, out.background, *extractor_);
    const auto l_uvref = perceptual_l1(target_features, out.combined, *extractor_);
    const auto l_cons = consistency_loss(out.uv_refined.narrow(0, 0, n), out.uv_refined.narrow(0, n, n));
    const auto l_edit = perceptual_l1(target_features, out.final_image, *extractor_);
    const auto l_total = total_loss(l_warp, l_uvref, l_cons, l_edit, config_.weights);

    LossComponents c{scalar(l_warp), scalar(l_uvref), scalar(l_cons), scalar(l_edit), scalar(l_total)};
    const std::pair<const char*, double> named[] = {
        {"l_warp", c.warp}, {"l_uvref", c.uvref}, {"l_cons", c.cons}, {"l_edit", c.edit}, {"total", c.total}};
    for (const auto& [name, value] : named) {
        if (!std::isfinite(value)) {
            throw NonFiniteLossError(std::string("non-finite loss component ") + name + " = " + g17(value) +
                                     " at step " + std::to_string(step_));
        }
    }
    if (total != nullptr) {
        *total = l_total;
    }
    return c;
}

LossComponents Trainer::train_step(const std::vector<FramePair>& pairs)
{
    model_->train();
    const double ramp =
        config_.warmup_steps > 0 ? std::min(1.0, static_cast<double>(step_ + 1) / config_.warmup_steps) : 1.0;
    for (auto& group : optimizer_->param_groups()) {
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(config_.lr * ramp);
    }
    optimizer_->zero_grad();
    torch::Tensor total;
    const auto c = compute(pairs, &total);
    total.backward();
    optimizer_->step();
    ++step_;
    return c;
}

LossComponents Trainer::evaluate_loss(const std::vector<FramePair>& pairs)
{
    torch::NoGradGuard guard;
    return compute(pairs, nullptr);
}

void Trainer::train()
{
    const fs::path out_dir = config_.out_dir;
    fs::create_directories(out_dir);
    const auto log_path = out_dir / "loss.csv";
    std::ofstream log(log_path, step_ == 0 ? std::ios::trunc : std::ios::app);
    if (!log) {
        throw IoError("cannot write loss log " + log_path.string());
    }
    if (step_ == 0) {
        log << "step,l_warp,l_uvref,l_cons,l_edit,total\n";
    }
    while (step_ < config_.steps) {
        const auto c = train_step(sample_batch());
        char line[256];
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", step_, c.warp, c.uvref, c.cons, c.edit,
                      c.total);
        log << line;
        log.flush();
        if (step_ % config_.checkpoint_every == 0 || step_ == config_.steps) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06d.ifuv", step_);
            const auto ck = checkpoint();
            save_checkpoint(ck, out_dir / name);
            save_checkpoint(ck, out_dir / "checkpoint.ifuv");
        }
    }
}

Checkpoint Trainer::checkpoint() const
{
    Checkpoint ck;
    ck.put_text("config", config_.to_text());
    ck.put("trainer.step", torch::tensor({static_cast<int64_t>(step_)}, torch::kInt64));
    std::ostringstream rng_state;
    rng_state << rng_;
    ck.put_text("trainer.rng", rng_state.str());
    ck.put_module("model", *model_);
    const auto& basis = *data_->corpus.basis;
    ck.put("basis.mean_shape", basis.mean_shape);
    ck.put("basis.id_basis", basis.id_basis);
    ck.put("basis.exp_basis", basis.exp_basis);
    ck.put("basis.triangles", basis.triangles);
    ck.put("basis.uv_coords", basis.uv_coords);
    const auto& cam = data_->corpus.camera;
    ck.put("camera", torch::tensor({cam.scale, cam.principal_point[0], cam.principal_point[1]}, torch::kFloat32));
    const auto params = model_->parameters();
    const auto& state = optimizer_->state();
    for (size_t i = 0; i < params.size(); ++i) {
        const auto it = state.find(params[i].unsafeGetTensorImpl());
        if (it == state.end()) {
            continue;
        }
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const auto prefix = "adam." + std::to_string(i) + ".";
        ck.put(prefix + "step", torch::tensor({s.step()}, torch::kInt64));
        ck.put(prefix + "exp_avg", s.exp_avg());
        ck.put(prefix + "exp_avg_sq", s.exp_avg_sq());
    }
    return ck;
}

void Trainer::restore(const Checkpoint& ck)
{
    ck.load_module("model", *model_);
    step_ = static_cast<int>(ck.get("trainer.step").item<int64_t>());
    std::istringstream rng_state(ck.get_text("trainer.rng"));
    rng_state >> rng_;
    const auto params = model_->parameters();
    auto& state = optimizer_->state();
    state.clear();
    for (size_t i = 0; i < params.size(); ++i) {
        const auto prefix = "adam." + std::to_string(i) + ".";
        if (!ck.contains(prefix + "step")) {
            continue;
        }
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(ck.get(prefix + "step").item<int64_t>());
        s->exp_avg(ck.get(prefix + "exp_avg").clone());
        s->exp_avg_sq(ck.get(prefix + "exp_avg_sq").clone());
        state[params[i].unsafeGetTensorImpl()] = std::move(s);
    }
}

void Trainer::save(const fs::path& path) const
{
    save_checkpoint(checkpoint(), path);
}

LoadedModel load_model(const Checkpoint& ck)
{
    LoadedModel out;
    out.config = TrainConfig::parse(ck.get_text("config"), "<checkpoint config>");
    out.model = ReenactModel(out.config.window, out.config.base_channels);
    ck.load_module("model", *out.model);
    out.model->eval();
    MorphableBasis basis{ck.get("basis.mean_shape"), ck.get("basis.id_basis"), ck.get("basis.exp_basis"),
                         ck.get("basis.triangles"), ck.get("basis.uv_coords")};
    basis.validate();
    out.basis = std::make_shared<const MorphableBasis>(std::move(basis));
    const auto cam = ck.get("camera");
    out.camera.scale = cam[0].item<float>();
    out.camera.principal_point = {cam[1].item<float>(), cam[2].item<float>()};
    return out;
}

LoadedModel load_model(const fs::path& checkpoint_path)
{
    return load_model(load_checkpoint(checkpoint_path));
}

// --- inference ---------------------------------------------------------------

Reenactor::Reenactor(ReenactModel model, TrainConfig config, std::shared_ptr<const MorphableBasis> basis,
                     CameraConfig camera)
    : model_(std::move(model)), config_(std::move(config)), basis_(std::move(basis)), camera_(camera)
{
    if (!basis_) {
        throw ValidationError("reenactor needs a morphable basis");
    }
}

SourceState Reenactor::prepare(const torch::Tensor& image, const IdentityParams& identity,
                               const MotionParams& source_motion) const
{
    if (image.dim() != 3 || image.size(0) != 3 || image.size(1) != config_.resolution ||
        image.size(2) != config_.resolution) {
        throw ShapeError("source image must be 3×" + std::to_string(config_.resolution) + "×" +
                         std::to_string(config_.resolution));
    }
    const auto mesh = build_mesh(*basis_, identity, source_motion.exp);
    const auto lookup =
        compute_unwrap_lookup(mesh, project_vertices(mesh, source_motion, camera_), config_.uv_resolution);
    return SourceState{image.to(torch::kFloat32).contiguous(), identity, lookup.image_coords.to(torch::kFloat32),
                       lookup.validity.to(torch::kFloat32)};
}

PipelineOutputs Reenactor::run(const SourceState& source, const std::vector<MotionParams>& driving, int64_t t) const
{
    torch::NoGradGuard guard;
    const auto& target = driving.at(static_cast<size_t>(t));
    const auto mesh = build_mesh(*basis_, source.identity, target.exp);
    auto [uv, mask] = pixel_uv_coords(mesh, project_vertices(mesh, target, camera_), config_.resolution);
    const PipelineInputs in{source.image.unsqueeze(0),
                            window_tensor(driving, t, config_.window).unsqueeze(0),
                            source.lookup.unsqueeze(0),
                            source.valid.unsqueeze(0),
                            uv.to(torch::kFloat32).unsqueeze(0),
                            mask.to(torch::kFloat32).unsqueeze(0)};
    auto model = model_;
    return run_pipeline(model, in);
}

torch::Tensor Reenactor::reenact(const SourceState& source, const std::vector<MotionParams>& driving, int64_t t) const
{
    return run(source, driving, t).final_image.squeeze(0);
}

torch::Tensor Reenactor::reenact(const SourceState& source, const MotionParams& target) const
{
    return reenact(source, std::vector<MotionParams>{target}, 0);
}

// --- evaluation --------------------------------------------------------------

EvalResult evaluate(const Reenactor& reenactor, const TrainingSet& data, const EvalOptions& options)
{
    if (options.mode != "same" && options.mode != "cross") {
        throw ValidationError("evaluation mode must be 'same' or 'cross'");
    }
    const bool cross = options.mode == "cross";
    const ConvPyramidExtractor metric_extractor(4321);
    const IdentityEmbedder embedder;
    MotionFitOptions fit_options;
    fit_options.iterations = options.fit_iterations;

    std::vector<torch::Tensor> outputs, references, sources;
    std::vector<MotionParams> est_out, est_ref, gt_motion;
    double lpips = 0.0, pixel = 0.0, cs = 0.0;
    const auto n_clips = data.clips.size();
    for (size_t k = 0; k < n_clips; ++k) {
        const auto& src_clip = data.clips[k];
        size_t drive_index = k;
        if (cross) {
            drive_index = (k + 1) % n_clips;
            for (size_t step = 1; step < n_clips; ++step) {
                const auto cand = (k + step) % n_clips;
                if (data.clips[cand].identity != src_clip.identity) {
                    drive_index = cand;
                    break;
                }
            }
            if (data.clips[drive_index].identity == src_clip.identity) {
                throw ValidationError("cross-identity evaluation needs at least two identities");
            }
        }
        const auto& drive = data.clips[drive_index];
        int64_t lo = 1, hi = drive.size();
        if (options.split == "test") {
            lo = std::max<int64_t>(drive.n_train, 1);
        } else if (options.split == "train") {
            hi = drive.n_train;
        } else if (options.split != "all") {
            throw ValidationError("split must be test, train or all");
        }
        if (options.max_frames_per_clip > 0) {
            hi = std::min<int64_t>(hi, lo + options.max_frames_per_clip);
        }
        const auto& src_identity = data.corpus.identities[src_clip.identity].identity;
        const auto state = reenactor.prepare(src_clip.frames[0], src_identity, src_clip.motions[0]);
        const auto src_app = data.corpus.appearance(src_clip.identity);
        const auto drive_app = data.corpus.appearance(drive.identity);
        const auto src_embed = embedder.embed(state.image);
        for (int64_t t = lo; t < hi; ++t) {
            const auto out = reenactor.reenact(state, drive.motions, t);
            const auto ref = drive.frames[t];
            outputs.push_back(out);
            references.push_back(ref);
            sources.push_back(state.image);
            lpips += perceptual_distance(out, cross ? state.image : ref, metric_extractor);
            pixel += (out - ref).abs().mean().item<double>();
            const auto e_out = embedder.embed(out);
            cs += csim(std::span<const double>(src_embed.data_ptr<double>(), src_embed.numel()),
                       std::span<const double>(e_out.data_ptr<double>(), e_out.numel()));
            gt_motion.push_back(drive.motions[static_cast<size_t>(t)]);
            if (options.fit_iterations > 0) {
                est_out.push_back(fit_motion(out, src_app, fit_options).motion);
                est_ref.push_back(fit_motion(ref, drive_app, fit_options).motion);
            }
        }
    }
    const auto n = static_cast<int64_t>(outputs.size());
    if (n == 0) {
        throw ValidationError("evaluation split '" + options.split + "' is empty");
    }
    EvalResult result;
    auto& r = result.report;
    r.mode = options.mode;
    r.n_frames = n;
    r.lpips = lpips / static_cast<double>(n);
    r.csim = cs / static_cast<double>(n);
    if (n >= 2) {
        r.fid = fid(fid_features(torch::stack(outputs), metric_extractor),
                    fid_features(torch::stack(references), metric_extractor));
    }
    if (!cross) {
        r.pixel_l1 = pixel / static_cast<double>(n);
    }
    if (options.fit_iterations > 0) {
        r.aed = aed(est_out, est_ref);
        if (!cross) {
            r.apd = apd(est_out, est_ref);
        }
        result.aed_ground_truth = aed(est_out, gt_motion);
        result.aed_estimator_floor = aed(est_ref, gt_motion);
    } else if (!cross) {
        r.apd = 0.0;
    }
    result.outputs = std::move(outputs);
    return result;
}

} // namespace uvreenact
