#include "uvreenact/cli.hpp"

#include "uvreenact/audio_motion.hpp"
#include "uvreenact/data_io.hpp"
#include "uvreenact/errors.hpp"
#include "uvreenact/service.hpp"
#include "uvreenact/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>

namespace uvreenact {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& path, const std::string& what)
{
    if (!fs::exists(path)) {
        throw IoError(what + " not found: " + path.string());
    }
}

/// Source frame, identity and motion from a video directory (frame `index`) or a single PNG.
struct SourceInput
{
    torch::Tensor image;
    IdentityParams identity;
    MotionParams motion;
    fs::path video_dir;
};

SourceInput read_source(const fs::path& source, int64_t index, const std::string& identity_path,
                        const std::string& motion_path, int64_t id_dims)
{
    require_file(source, "source");
    SourceInput in;
    if (fs::is_directory(source)) {
        const auto video = load_video(source);
        if (index < 0 || index >= static_cast<int64_t>(video.frame_paths.size())) {
            throw ValidationError("source frame " + std::to_string(index) + " is out of range");
        }
        in.image = read_png(video.frame_paths[static_cast<size_t>(index)]);
        in.identity = video.identity;
        in.motion = video.motions[static_cast<size_t>(index)];
        in.video_dir = fs::canonical(source);
        return in;
    }
    in.image = read_png(source);
    if (!identity_path.empty()) {
        in.identity = read_identity_file(identity_path);
    } else {
        in.identity.alpha.assign(static_cast<size_t>(id_dims), 0.0f);
    }
    if (!motion_path.empty()) {
        in.motion = read_motion_file(motion_path).at(0);
    }
    return in;
}

void write_frames(const fs::path& out_dir, const std::vector<torch::Tensor>& frames, int64_t first_index)
{
    fs::create_directories(out_dir);
    for (size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(first_index + static_cast<int64_t>(i)));
        write_png(out_dir / name, frames[i]);
    }
}

int run_synth(const fs::path& out, const CorpusConfig& config)
{
    generate_synthetic_corpus(out, config);
    std::cout << "wrote " << config.n_identities << " identities × " << config.videos_per_identity << " videos × "
              << config.frames_per_video << " frames to " << out.string() << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::vector<std::string>& sets, const std::string& resume)
{
    TrainConfig config;
    std::optional<Checkpoint> resumed;
    if (!resume.empty()) {
        // The checkpoint's own config is the base, so architecture keys need not be repeated.
        require_file(resume, "checkpoint");
        resumed = load_checkpoint(resume);
        config = TrainConfig::parse(resumed->get_text("config"), resume);
    }
    if (!config_path.empty()) {
        require_file(config_path, "config");
        config = TrainConfig::from_file(config_path);
    }
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("--set expects key=value, got '" + kv + "'");
        }
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.validate();
    auto data = std::make_shared<const TrainingSet>(load_training_set(config));
    Trainer trainer(config, data);
    if (resumed) {
        trainer.restore(*resumed);
        std::cout << "resumed at step " << trainer.step() << "\n";
    }
    trainer.train();
    std::cout << "trained to step " << trainer.step() << "; checkpoint in " << config.out_dir << "\n";
    return 0;
}

int run_train_audio(const fs::path& out, const std::string& base, int pairs, uint64_t seed, int steps)
{
    Checkpoint ck;
    if (!base.empty()) {
        require_file(base, "checkpoint");
        ck = load_checkpoint(base);
    }
    AudioRegressor regressor;
    AudioTrainOptions options;
    options.seed = seed;
    options.max_steps = steps;
    const auto result = train_audio_regressor(regressor, make_synthetic_audio_pairs(pairs, seed), options);
    ck.put_module("audio", *regressor);
    save_checkpoint(ck, out);
    std::printf("audio regressor: %d steps, summed loss %.6g -> %s\n", result.steps, result.loss, out.c_str());
    return 0;
}

struct ReenactArgs
{
    std::string checkpoint;
    std::string source;
    std::string driver;
    std::string wav;
    std::string out;
    std::string identity;
    std::string source_motion;
    std::string audio_checkpoint;
    int64_t source_frame = 0;
};

int run_reenact(const ReenactArgs& args)
{
    require_file(args.checkpoint, "checkpoint");
    auto model = load_model(args.checkpoint);
    const Reenactor reenactor(model.model, model.config, model.basis, model.camera);
    const auto src = read_source(args.source, args.source_frame, args.identity, args.source_motion,
                                 model.basis->id_dims());
    const auto state = reenactor.prepare(src.image, src.identity, src.motion);

    require_file(args.driver, "driver");
    std::vector<MotionParams> driving;
    std::vector<fs::path> driver_frames;
    bool same_video = false;
    if (fs::is_directory(args.driver)) {
        const auto video = load_video(args.driver);
        driving = video.motions;
        driver_frames = video.frame_paths;
        same_video = !src.video_dir.empty() && fs::canonical(args.driver) == src.video_dir;
    } else {
        driving = read_motion_file(args.driver);
    }
    // Driving a video by itself skips the source frame.
    const int64_t first = same_video ? 1 : 0;
    std::vector<torch::Tensor> frames;
    double err = 0.0;
    for (int64_t t = first; t < static_cast<int64_t>(driving.size()); ++t) {
        frames.push_back(reenactor.reenact(state, driving, t));
        if (same_video) {
            err += (frames.back() - read_png(driver_frames[static_cast<size_t>(t)])).abs().mean().item<double>();
        }
    }
    write_frames(args.out, frames, first);
    std::cout << "wrote " << frames.size() << " frames to " << args.out << "\n";
    if (same_video && !frames.empty()) {
        std::printf("mean abs pixel error vs driver frames: %.6f\n", err / static_cast<double>(frames.size()));
    }
    return 0;
}

int run_audio_reenact(const ReenactArgs& args)
{
    require_file(args.checkpoint, "checkpoint");
    require_file(args.wav, "wav");
    const auto ck = load_checkpoint(args.checkpoint);
    auto model = load_model(ck);
    std::optional<AudioRegressor> audio;
    if (!args.audio_checkpoint.empty()) {
        require_file(args.audio_checkpoint, "audio checkpoint");
        audio = load_audio_regressor(load_checkpoint(args.audio_checkpoint));
    } else {
        audio = load_audio_regressor(ck);
    }
    if (!audio) {
        throw ValidationError("no audio regressor in the checkpoint; pass --audio-checkpoint");
    }
    const Reenactor reenactor(model.model, model.config, model.basis, model.camera);
    const auto src = read_source(args.source, args.source_frame, args.identity, args.source_motion,
                                 model.basis->id_dims());
    const auto state = reenactor.prepare(src.image, src.identity, src.motion);

    torch::Tensor pred;
    {
        torch::NoGradGuard guard;
        pred = predict_motion_sequence(audio_features(read_wav(args.wav)), *audio).contiguous();
    }
    std::vector<MotionParams> driving;
    for (int64_t t = 0; t < pred.size(0); ++t) {
        const float* row = pred[t].data_ptr<float>();
        driving.push_back(split_descriptor(std::span<const float>(row, kMotionDims)));
    }
    std::vector<torch::Tensor> frames;
    for (int64_t t = 0; t < static_cast<int64_t>(driving.size()); ++t) {
        frames.push_back(reenactor.reenact(state, driving, t));
    }
    write_frames(args.out, frames, 0);
    write_motion_file(fs::path(args.out) / "motion.jsonl", driving);
    std::cout << "wrote " << frames.size() << " frames to " << args.out << "\n";
    return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data_root, const EvalOptions& options,
             const std::string& report_path)
{
    require_file(checkpoint, "checkpoint");
    auto model = load_model(checkpoint);
    auto config = model.config;
    if (!data_root.empty()) {
        config.data_root = data_root;
    } else if (std::getenv("IFACEUV_DATA_ROOT") != nullptr) {
        config.data_root = default_data_root().string();
    }
    const auto data = load_training_set(config);
    const Reenactor reenactor(model.model, config, model.basis, model.camera);
    const auto result = evaluate(reenactor, data, options);
    const auto json = result.report.to_json();
    std::cout << json << "\n";
    if (options.fit_iterations > 0) {
        std::printf("aed vs ground-truth motion: %.6f (estimator floor %.6f)\n", result.aed_ground_truth,
                    result.aed_estimator_floor);
    }
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!(out << json << "\n")) {
            throw IoError("cannot write report " + report_path);
        }
    }
    return 0;
}

int run_serve(std::string checkpoint, const std::string& host, int port)
{
    if (checkpoint.empty()) {
        if (const char* env = std::getenv("IFACEUV_CHECKPOINT")) {
            checkpoint = env;
        }
    }
    if (checkpoint.empty()) {
        throw ValidationError("no checkpoint given (--checkpoint or IFACEUV_CHECKPOINT)");
    }
    require_file(checkpoint, "checkpoint");
    const auto ck = load_checkpoint(checkpoint);
    SessionService service(load_model(ck), load_audio_regressor(ck));
    std::cout << "serving " << checkpoint << " on http://" << host << ":" << port << std::endl;
    run_http_server(service, host, port);
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv)
{
    CLI::App app{"Face reenactment through UV-space editing"};
    app.require_subcommand(1);

    CorpusConfig corpus;
    std::string synth_out = default_data_root().string();
    auto* synth = app.add_subcommand("synth-data", "Generate the synthetic training corpus");
    synth->add_option("--out", synth_out, "Dataset root")->capture_default_str();
    synth->add_option("--identities", corpus.n_identities)->capture_default_str();
    synth->add_option("--videos", corpus.videos_per_identity)->capture_default_str();
    synth->add_option("--frames", corpus.frames_per_video)->capture_default_str();
    synth->add_option("--resolution", corpus.resolution)->capture_default_str();
    synth->add_option("--uv-resolution", corpus.uv_resolution)->capture_default_str();
    synth->add_option("--seed", corpus.seed)->capture_default_str();

    std::string config_path, resume;
    std::vector<std::string> sets;
    auto* train = app.add_subcommand("train", "Train the reenactment networks");
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--set", sets, "Override one config key (key=value)");
    train->add_option("--resume", resume, "Continue from this checkpoint");

    std::string audio_out, audio_base;
    int audio_pairs = 8, audio_steps = 5000;
    uint64_t audio_seed = 0;
    auto* train_audio = app.add_subcommand("train-audio", "Fit the audio-to-motion regressor on synthetic pairs");
    train_audio->add_option("--out", audio_out, "Output checkpoint")->required();
    train_audio->add_option("--checkpoint", audio_base, "Model checkpoint to extend with the regressor");
    train_audio->add_option("--pairs", audio_pairs)->capture_default_str();
    train_audio->add_option("--steps", audio_steps)->capture_default_str();
    train_audio->add_option("--seed", audio_seed)->capture_default_str();

    ReenactArgs re;
    auto add_source = [&re](CLI::App* cmd) {
        cmd->add_option("--checkpoint", re.checkpoint)->required();
        cmd->add_option("--source", re.source, "Video directory or PNG")->required();
        cmd->add_option("--out", re.out, "Output directory")->required();
        cmd->add_option("--source-frame", re.source_frame, "Frame index when --source is a video")
            ->capture_default_str();
        cmd->add_option("--identity", re.identity, "identity.json for a PNG source");
        cmd->add_option("--source-motion", re.source_motion, "motion.jsonl whose first line fits a PNG source");
    };
    auto* reenact = app.add_subcommand("reenact", "Drive a source face with a motion sequence");
    add_source(reenact);
    reenact->add_option("--driver", re.driver, "Video directory or motion.jsonl")->required();
    auto* audio_reenact = app.add_subcommand("audio-reenact", "Drive a source face from speech audio");
    add_source(audio_reenact);
    audio_reenact->add_option("--wav", re.wav)->required();
    audio_reenact->add_option("--audio-checkpoint", re.audio_checkpoint, "Checkpoint holding the regressor");

    std::string eval_checkpoint, eval_root, eval_report;
    EvalOptions eval_options;
    auto* eval = app.add_subcommand("eval", "Score reenactment on the corpus");
    eval->add_option("--checkpoint", eval_checkpoint)->required();
    eval->add_option("--split", eval_options.split)
        ->check(CLI::IsMember({"test", "train", "all"}))
        ->capture_default_str();
    eval->add_option("--mode", eval_options.mode)->check(CLI::IsMember({"same", "cross"}))->capture_default_str();
    eval->add_option("--data-root", eval_root);
    eval->add_option("--fit-iterations", eval_options.fit_iterations)->capture_default_str();
    eval->add_option("--max-frames", eval_options.max_frames_per_clip)->capture_default_str();
    eval->add_option("--report", eval_report, "Also write the JSON report here");

    std::string serve_checkpoint, host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    serve->add_option("--checkpoint", serve_checkpoint, "Defaults to $IFACEUV_CHECKPOINT");
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--host", host)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        if (synth->parsed()) {
            return run_synth(synth_out, corpus);
        }
        if (train->parsed()) {
            return run_train(config_path, sets, resume);
        }
        if (train_audio->parsed()) {
            return run_train_audio(audio_out, audio_base, audio_pairs, audio_seed, audio_steps);
        }
        if (reenact->parsed()) {
            return run_reenact(re);
        }
        if (audio_reenact->parsed()) {
            return run_audio_reenact(re);
        }
        if (eval->parsed()) {
            return run_eval(eval_checkpoint, eval_root, eval_options, eval_report);
        }
        if (serve->parsed()) {
            return run_serve(serve_checkpoint, host, port);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace uvreenact
