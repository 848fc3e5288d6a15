#include "uvreenact/data_io.hpp"
#include "uvreenact/diff_render.hpp"
#include "uvreenact/errors.hpp"
#include "uvreenact/uv_pipeline.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace uvreenact;
using uvreenact::testing::random_motion;
using uvreenact::testing::temp_dir;

namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<uint8_t>& bytes)
{
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint sample_checkpoint()
{
    torch::manual_seed(0);
    Checkpoint ck;
    ck.put("a.float", torch::randn({3, 4}));
    ck.put("b.double", torch::randn({2, 2, 2}, torch::kFloat64));
    ck.put("c.long", torch::randint(-1000, 1000, {5}, torch::kInt64));
    ck.put("d.byte", torch::randint(0, 255, {7}, torch::kUInt8));
    ck.put("e.scalar", torch::tensor(3.5f));
    ck.put_text("config", "resolution=64\nlr=0.0001\n");
    return ck;
}

CorpusConfig tiny_corpus()
{
    CorpusConfig c;
    c.n_identities = 2;
    c.frames_per_video = 3;
    c.resolution = 32;
    c.uv_resolution = 32;
    c.seed = 11;
    return c;
}

} // namespace

TEST(Checkpoint, RoundTripIsBitExact)
{
    const auto ck = sample_checkpoint();
    const auto path = temp_dir("ck") / "x.ifuv";
    save_checkpoint(ck, path);
    const auto back = load_checkpoint(path);
    ASSERT_EQ(back.entries.size(), ck.entries.size());
    for (size_t i = 0; i < ck.entries.size(); ++i) {
        EXPECT_EQ(back.entries[i].first, ck.entries[i].first);
        EXPECT_EQ(back.entries[i].second.scalar_type(), ck.entries[i].second.scalar_type());
        EXPECT_TRUE(torch::equal(back.entries[i].second, ck.entries[i].second)) << ck.entries[i].first;
    }
    EXPECT_EQ(back.get_text("config"), "resolution=64\nlr=0.0001\n");
    EXPECT_EQ(serialize_checkpoint(back), slurp(path));
}

TEST(Checkpoint, MissingEntryNamed)
{
    const auto ck = sample_checkpoint();
    try {
        ck.get("nope");
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
    }
}

TEST(Checkpoint, CorruptedMagic)
{
    auto bytes = serialize_checkpoint(sample_checkpoint());
    bytes[1] = 'X';
    EXPECT_THROW(parse_checkpoint(bytes), CheckpointMagicError);
}

TEST(Checkpoint, VersionMismatch)
{
    auto bytes = serialize_checkpoint(sample_checkpoint());
    bytes[4] = static_cast<uint8_t>(kCheckpointVersion + 1);
    EXPECT_THROW(parse_checkpoint(bytes), CheckpointVersionError);
}

TEST(Checkpoint, TruncationAtEveryLength)
{
    const auto bytes = serialize_checkpoint(sample_checkpoint());
    for (size_t n = 4; n < bytes.size(); n += 7) {
        const std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        EXPECT_THROW(parse_checkpoint(cut), CheckpointTruncatedError) << n;
    }
    const auto path = temp_dir("ck_trunc") / "t.ifuv";
    spit(path, std::vector<uint8_t>(bytes.begin(), bytes.end() - 3));
    EXPECT_THROW(load_checkpoint(path), CheckpointTruncatedError);
}

TEST(Checkpoint, ModuleRoundTrip)
{
    torch::manual_seed(1);
    torch::nn::Linear a(4, 3), b(4, 3);
    Checkpoint ck;
    ck.put_module("lin", *a);
    ck.load_module("lin", *b);
    EXPECT_TRUE(torch::equal(a->weight, b->weight));
    EXPECT_TRUE(torch::equal(a->bias, b->bias));
    torch::nn::Linear c(5, 3);
    EXPECT_THROW(ck.load_module("lin", *c), CheckpointError);
}

TEST(MotionFile, RoundTripIsExact)
{
    std::mt19937_64 rng(2);
    std::vector<MotionParams> seq;
    for (int i = 0; i < 20; ++i) {
        seq.push_back(random_motion(rng, 1.0, 1.0, 1.0));
    }
    seq[3].exp[5] = 1e-30f;
    seq[4].angle[0] = -123456.789f;
    const auto path = temp_dir("motion") / "m.jsonl";
    write_motion_file(path, seq);
    const auto back = read_motion_file(path);
    ASSERT_EQ(back.size(), seq.size());
    for (size_t i = 0; i < seq.size(); ++i) {
        EXPECT_EQ(back[i].exp, seq[i].exp);
        EXPECT_EQ(back[i].angle, seq[i].angle);
        EXPECT_EQ(back[i].trans, seq[i].trans);
    }
}

TEST(MotionFile, MissingTransNamesFieldAndLine)
{
    std::string zeros = "[0";
    for (int i = 1; i < 64; ++i) {
        zeros += ",0";
    }
    zeros += "]";
    const auto path = temp_dir("motion_bad") / "m.jsonl";
    {
        std::ofstream out(path);
        out << format_motion_line(MotionParams{}) << "\n";
        out << R"({"exp":)" << zeros << R"(,"angle":[0,0,0]})" << "\n";
    }
    try {
        read_motion_file(path);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("trans"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_motion_line("not json"), ParseError);
}

TEST(IdentityFile, RoundTrip)
{
    IdentityParams id{std::vector<float>{0.5f, -1.25f, 3.0f}};
    const auto path = temp_dir("identity") / "identity.json";
    write_identity_file(path, id);
    EXPECT_EQ(read_identity_file(path).alpha, id.alpha);
}

TEST(Png, SixteenBitRoundTrip)
{
    torch::manual_seed(3);
    const auto img = torch::rand({3, 9, 7}) * 2 - 1;
    const auto back = decode_png(encode_png(img));
    EXPECT_EQ(back.sizes(), img.sizes());
    EXPECT_LE((back - img).abs().max().item<float>(), 2.0f / 65535.0f);
}

TEST(SyntheticCorpus, CountsAndLayout)
{
    CorpusConfig c;
    c.n_identities = 4;
    c.frames_per_video = 32;
    c.resolution = 64;
    c.uv_resolution = 64;
    const auto root = temp_dir("corpus_counts");
    generate_synthetic_corpus(root, c);
    int frames = 0, identities = 0, motions = 0;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        const auto name = e.path().filename().string();
        frames += e.path().extension() == ".png" && name != "texture.png" && name != "background.png";
        identities += name == "identity.json";
        motions += name == "motion.jsonl";
    }
    EXPECT_EQ(frames, 128);
    EXPECT_EQ(identities, 4);
    EXPECT_EQ(motions, 4);
    const auto corpus = load_corpus(root);
    ASSERT_EQ(corpus.identities.size(), 4u);
    EXPECT_EQ(corpus.identities[0].videos[0].frame_paths.size(), 32u);
}

TEST(SyntheticCorpus, ByteIdenticalAcrossRuns)
{
    const auto a = temp_dir("corpus_a"), b = temp_dir("corpus_b");
    generate_synthetic_corpus(a, tiny_corpus());
    generate_synthetic_corpus(b, tiny_corpus());
    size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) {
            ++files;
            EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
        }
    }
    EXPECT_GT(files, 10u);
}

TEST(SyntheticCorpus, BoundedPerFrameDeltas)
{
    CorpusConfig c;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto traj = synthetic_motion_trajectory(64, c, seed);
        ASSERT_EQ(traj.size(), 64u);
        for (size_t t = 1; t < traj.size(); ++t) {
            const auto a = motion_descriptor(traj[t - 1]);
            const auto b = motion_descriptor(traj[t]);
            for (size_t k = 0; k < a.size(); ++k) {
                ASSERT_LE(std::abs(b[k] - a[k]), c.max_delta + 1e-6) << t << ":" << k;
            }
        }
    }
}

TEST(SyntheticCorpus, UnwritableRootThrows)
{
    const auto dir = temp_dir("corpus_blocked");
    spit(dir / "file", {1});
    EXPECT_THROW(generate_synthetic_corpus(dir / "file" / "sub", tiny_corpus()), IoError);
}

TEST(LoadVideo, CountMismatchThrows)
{
    const auto root = temp_dir("corpus_mismatch");
    generate_synthetic_corpus(root, tiny_corpus());
    const auto video = load_corpus(root).identities[0].videos[0];
    const auto dir = video.frame_paths.front().parent_path();
    auto motions = video.motions;
    motions.pop_back();
    write_motion_file(dir / "motion.jsonl", motions);
    EXPECT_THROW(load_video(dir), ValidationError);
}

TEST(SyntheticCorpus, UnwrapOfFrameReproducesTexture)
{
    // Resampling twice (texture → frame → texture) is exact only up to bilinear interpolation error.
    // The frame is rendered far finer than the texture, and only texels whose 2×2 image footprint shows
    // surface within a quarter texel of the texel centre are compared; footprints that straddle a
    // silhouette, an occlusion fold or a strongly foreshortened patch are skipped.
    CorpusConfig c = tiny_corpus();
    c.n_identities = 1;
    c.frames_per_video = 1;
    c.resolution = 2048;
    c.uv_resolution = 128;
    c.texture_frequency = 1.0;
    const auto root = temp_dir("corpus_refit");
    generate_synthetic_corpus(root, c);
    const auto corpus = load_corpus(root);
    const auto& id = corpus.identities[0];
    const auto& video = id.videos[0];
    const auto& motion = video.motions[0];
    const auto mesh = build_mesh(*corpus.basis, id.identity, motion.exp);
    const auto projected = project_vertices(mesh, motion, corpus.camera);
    const auto frame = read_png(video.frame_paths[0]);
    const auto uv = unwrap_uv(frame, mesh, motion, corpus.camera, c.uv_resolution);
    const auto lookup = compute_unwrap_lookup(mesh, projected, c.uv_resolution);
    const auto [pixel_uv, mask] = pixel_uv_coords(mesh, projected, c.resolution);

    const int64_t n = c.resolution, u = c.uv_resolution;
    const auto err = (uv.color - id.texture).abs().amax(0);
    const auto coords = lookup.image_coords.accessor<double, 3>();
    const auto puv = pixel_uv.to(torch::kFloat64).contiguous();
    const auto pa = puv.accessor<double, 3>();
    const auto ma = mask.to(torch::kFloat32).contiguous();
    const auto mk = ma.accessor<float, 2>();
    int64_t valid = 0, checked = 0;
    double worst = 0.0;
    for (int64_t r = 0; r < u; ++r) {
        for (int64_t q = 0; q < u; ++q) {
            if (lookup.validity[r][q].item<float>() < 0.5f) {
                continue;
            }
            ++valid;
            const double x = (coords[r][q][0] + 1.0) * 0.5 * static_cast<double>(n) - 0.5;
            const double y = (coords[r][q][1] + 1.0) * 0.5 * static_cast<double>(n) - 0.5;
            const double tu = (static_cast<double>(q) + 0.5) / static_cast<double>(u);
            const double tv = (static_cast<double>(r) + 0.5) / static_cast<double>(u);
            bool clean = true;
            for (int64_t dy = 0; dy <= 1 && clean; ++dy) {
                for (int64_t dx = 0; dx <= 1 && clean; ++dx) {
                    const auto yy = std::clamp<int64_t>(static_cast<int64_t>(std::floor(y)) + dy, 0, n - 1);
                    const auto xx = std::clamp<int64_t>(static_cast<int64_t>(std::floor(x)) + dx, 0, n - 1);
                    clean = mk[yy][xx] > 0.5f && std::abs(pa[yy][xx][0] - tu) * u <= 0.25 &&
                            std::abs(pa[yy][xx][1] - tv) * u <= 0.25;
                }
            }
            if (clean) {
                ++checked;
                worst = std::max(worst, static_cast<double>(err[r][q].item<float>()));
            }
        }
    }
    ASSERT_GT(valid, 4000);
    EXPECT_GE(static_cast<double>(checked), 0.5 * static_cast<double>(valid)) << checked << " of " << valid;
    EXPECT_LE(worst, 1e-3);
}
