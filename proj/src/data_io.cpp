#include "uvreenact/data_io.hpp"

#include "uvreenact/diff_render.hpp"
#include "uvreenact/errors.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace uvreenact {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'I', 'F', 'U', 'V'};

uint8_t dtype_code(torch::ScalarType t)
{
    switch (t) {
    case torch::kFloat32:
        return 0;
    case torch::kUInt8:
        return 1;
    case torch::kInt64:
        return 2;
    case torch::kFloat64:
        return 3;
    default:
        throw CheckpointError(std::string("unsupported checkpoint dtype ") + c10::toString(t));
    }
}

torch::ScalarType dtype_from_code(uint8_t code)
{
    switch (code) {
    case 0:
        return torch::kFloat32;
    case 1:
        return torch::kUInt8;
    case 2:
        return torch::kInt64;
    case 3:
        return torch::kFloat64;
    default:
        throw CheckpointError("unknown dtype code " + std::to_string(code));
    }
}

template <typename T>
void put_le(std::vector<uint8_t>& out, T value)
{
    uint8_t buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T)); // host is little-endian (x86-64, aarch64)
    out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader
{
public:
    explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

    const uint8_t* take(size_t n)
    {
        if (n > bytes_.size() - pos_) {
            throw CheckpointTruncatedError("checkpoint truncated at byte " + std::to_string(bytes_.size()) +
                                           " (needed " + std::to_string(n) + " more)");
        }
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    template <typename T>
    T get()
    {
        T value;
        std::memcpy(&value, take(sizeof(T)), sizeof(T));
        return value;
    }

private:
    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + ": file not found or unreadable");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, const void* data, size_t size)
{
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text)
{
    write_file_atomic(path, text.data(), text.size());
}

std::string format_g9(float v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

template <size_t N>
void append_array(std::string& out, const char* key, const std::array<float, N>& values)
{
    out += '"';
    out += key;
    out += "\":[";
    for (size_t i = 0; i < N; ++i) {
        if (i > 0) {
            out += ',';
        }
        out += format_g9(values[i]);
    }
    out += ']';
}

template <size_t N>
void read_array(const nlohmann::json& obj, const char* key, std::array<float, N>& dst, const std::string& source,
                std::size_t line)
{
    if (!obj.contains(key)) {
        throw ParseError(source, line, std::string("missing field '") + key + "'");
    }
    const auto& arr = obj.at(key);
    if (!arr.is_array() || arr.size() != N) {
        throw ParseError(source, line,
                         std::string("field '") + key + "' must be an array of " + std::to_string(N) + " numbers");
    }
    for (size_t i = 0; i < N; ++i) {
        if (!arr[i].is_number()) {
            throw ParseError(source, line, std::string("field '") + key + "' has a non-numeric entry");
        }
        dst[i] = arr[i].get<float>();
        if (!std::isfinite(dst[i])) {
            throw ParseError(source, line, std::string("field '") + key + "' has a non-finite entry");
        }
    }
}

std::vector<double> smooth_noise(int frames, double centre, double amplitude, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> period(48.0, 128.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(static_cast<size_t>(frames), centre);
    for (int j = 0; j < 2; ++j) {
        const double a = amplitude * normal(rng) / std::numbers::sqrt2;
        const double p = period(rng);
        const double ph = phase(rng);
        for (int t = 0; t < frames; ++t) {
            out[static_cast<size_t>(t)] += a * std::sin(2.0 * std::numbers::pi * t / p + ph);
        }
    }
    return out;
}

std::string identity_name(int i)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "id%04d", i);
    return buf;
}

std::string video_name(int i)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vid%03d", i);
    return buf;
}

std::string frame_name(int i)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.png", i);
    return buf;
}

} // namespace

// --- checkpoint ------------------------------------------------------------

void Checkpoint::put(const std::string& name, const torch::Tensor& value)
{
    auto stored = value.detach().cpu().contiguous().clone();
    for (auto& [n, t] : entries) {
        if (n == name) {
            t = stored;
            return;
        }
    }
    entries.emplace_back(name, stored);
}

bool Checkpoint::contains(const std::string& name) const
{
    return std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == name; });
}

const torch::Tensor& Checkpoint::get(const std::string& name) const
{
    for (const auto& [n, t] : entries) {
        if (n == name) {
            return t;
        }
    }
    throw CheckpointError("checkpoint has no entry '" + name + "'");
}

void Checkpoint::put_text(const std::string& name, const std::string& text)
{
    auto t = torch::empty({static_cast<int64_t>(text.size())}, torch::kUInt8);
    std::memcpy(t.data_ptr<uint8_t>(), text.data(), text.size());
    put(name, t);
}

std::string Checkpoint::get_text(const std::string& name) const
{
    const auto& t = get(name);
    if (t.scalar_type() != torch::kUInt8) {
        throw CheckpointError("entry '" + name + "' is not text");
    }
    return {reinterpret_cast<const char*>(t.data_ptr<uint8_t>()), static_cast<size_t>(t.numel())};
}

void Checkpoint::put_module(const std::string& prefix, const torch::nn::Module& module)
{
    for (const auto& p : module.named_parameters(true)) {
        put(prefix + "." + p.key(), p.value());
    }
    for (const auto& b : module.named_buffers(true)) {
        put(prefix + "." + b.key(), b.value());
    }
}

void Checkpoint::load_module(const std::string& prefix, torch::nn::Module& module) const
{
    torch::NoGradGuard guard;
    auto assign = [&](const std::string& key, torch::Tensor& dst) {
        const auto& src = get(prefix + "." + key);
        if (src.sizes() != dst.sizes()) {
            throw CheckpointError("entry '" + prefix + "." + key + "' has the wrong shape");
        }
        dst.copy_(src);
    };
    for (auto& p : module.named_parameters(true)) {
        assign(p.key(), p.value());
    }
    for (auto& b : module.named_buffers(true)) {
        assign(b.key(), b.value());
    }
}

std::vector<uint8_t> serialize_checkpoint(const Checkpoint& checkpoint)
{
    std::vector<uint8_t> out(kMagic, kMagic + 4);
    put_le<uint32_t>(out, kCheckpointVersion);
    put_le<uint32_t>(out, static_cast<uint32_t>(checkpoint.entries.size()));
    for (const auto& [name, tensor] : checkpoint.entries) {
        if (name.size() > 0xFFFF) {
            throw CheckpointError("entry name too long: " + name.substr(0, 40) + "...");
        }
        put_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(dtype_code(tensor.scalar_type()));
        if (tensor.dim() > 255) {
            throw CheckpointError("tensor rank too large for '" + name + "'");
        }
        out.push_back(static_cast<uint8_t>(tensor.dim()));
        for (auto d : tensor.sizes()) {
            put_le<uint32_t>(out, static_cast<uint32_t>(d));
        }
        const auto t = tensor.contiguous();
        const auto* p = static_cast<const uint8_t*>(t.data_ptr());
        out.insert(out.end(), p, p + t.nbytes());
    }
    return out;
}

Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes)
{
    if (bytes.size() < 4) {
        throw CheckpointTruncatedError("checkpoint shorter than its magic");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointMagicError("bad checkpoint magic (expected IFUV)");
    }
    Reader reader(bytes);
    reader.take(4);
    const auto version = reader.get<uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointVersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kCheckpointVersion) + ")");
    }
    const auto count = reader.get<uint32_t>();
    Checkpoint ck;
    for (uint32_t e = 0; e < count; ++e) {
        const auto name_len = reader.get<uint16_t>();
        const auto* name_p = reader.take(name_len);
        std::string name(reinterpret_cast<const char*>(name_p), name_len);
        const auto dtype = dtype_from_code(reader.get<uint8_t>());
        const auto rank = reader.get<uint8_t>();
        std::vector<int64_t> dims(rank);
        for (auto& d : dims) {
            d = reader.get<uint32_t>();
        }
        auto t = torch::empty(dims, dtype);
        const auto* data = reader.take(t.nbytes());
        std::memcpy(t.data_ptr(), data, t.nbytes());
        ck.entries.emplace_back(std::move(name), t);
    }
    return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path)
{
    const auto bytes = serialize_checkpoint(checkpoint);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    write_file_atomic(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const fs::path& path)
{
    if (!fs::exists(path)) {
        throw IoError("checkpoint not found: " + path.string());
    }
    return parse_checkpoint(read_file(path));
}

void save_basis(const MorphableBasis& basis, const fs::path& path)
{
    Checkpoint ck;
    ck.put("mean_shape", basis.mean_shape);
    ck.put("id_basis", basis.id_basis);
    ck.put("exp_basis", basis.exp_basis);
    ck.put("triangles", basis.triangles);
    ck.put("uv_coords", basis.uv_coords);
    save_checkpoint(ck, path);
}

MorphableBasis load_basis(const fs::path& path)
{
    const auto ck = load_checkpoint(path);
    MorphableBasis basis{ck.get("mean_shape"), ck.get("id_basis"), ck.get("exp_basis"),
                         ck.get("triangles").to(torch::kInt64), ck.get("uv_coords")};
    basis.validate();
    return basis;
}

// --- motion / identity files -------------------------------------------------

std::string format_motion_line(const MotionParams& motion)
{
    std::string out = "{";
    append_array(out, "exp", motion.exp);
    out += ',';
    append_array(out, "angle", motion.angle);
    out += ',';
    append_array(out, "trans", motion.trans);
    out += '}';
    return out;
}

MotionParams parse_motion_line(const std::string& text, const std::string& source, std::size_t line)
{
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) {
        throw ParseError(source, line, "expected a JSON object");
    }
    MotionParams m;
    read_array(obj, "exp", m.exp, source, line);
    read_array(obj, "angle", m.angle, source, line);
    read_array(obj, "trans", m.trans, source, line);
    return m;
}

void write_motion_file(const fs::path& path, const std::vector<MotionParams>& motions)
{
    std::string text;
    for (const auto& m : motions) {
        text += format_motion_line(m);
        text += '\n';
    }
    write_text_atomic(path, text);
}

std::vector<MotionParams> read_motion_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open motion file " + path.string());
    }
    std::vector<MotionParams> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        out.push_back(parse_motion_line(line, path.string(), number));
    }
    return out;
}

void write_identity_file(const fs::path& path, const IdentityParams& identity)
{
    std::string text = "{\"alpha\":[";
    for (size_t i = 0; i < identity.alpha.size(); ++i) {
        if (i > 0) {
            text += ',';
        }
        text += format_g9(identity.alpha[i]);
    }
    text += "]}\n";
    write_text_atomic(path, text);
}

IdentityParams read_identity_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open identity file " + path.string());
    }
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 1, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("alpha") || !obj["alpha"].is_array()) {
        throw ParseError(path.string(), 1, "missing field 'alpha'");
    }
    IdentityParams id;
    for (const auto& v : obj["alpha"]) {
        if (!v.is_number()) {
            throw ParseError(path.string(), 1, "field 'alpha' has a non-numeric entry");
        }
        id.alpha.push_back(v.get<float>());
    }
    return id;
}

// --- images ----------------------------------------------------------------

std::vector<uint8_t> encode_png(const torch::Tensor& image)
{
    if (image.dim() != 3 || image.size(0) != 3) {
        throw ShapeError("PNG export expects a 3×H×W image");
    }
    const auto h = static_cast<int>(image.size(1));
    const auto w = static_cast<int>(image.size(2));
    auto scaled = ((image.detach().to(torch::kFloat64).clamp(-1.0, 1.0) + 1.0) * (65535.0 / 2.0))
                      .round()
                      .to(torch::kInt32)
                      .permute({1, 2, 0})
                      .flip({2}) // RGB → BGR
                      .contiguous();
    cv::Mat mat(h, w, CV_16UC3);
    const auto* src = scaled.data_ptr<int32_t>();
    auto* dst = mat.ptr<uint16_t>();
    for (int64_t i = 0; i < scaled.numel(); ++i) {
        dst[i] = static_cast<uint16_t>(src[i]);
    }
    std::vector<uint8_t> out;
    if (!cv::imencode(".png", mat, out)) {
        throw IoError("PNG encoding failed");
    }
    return out;
}

torch::Tensor decode_png(const std::vector<uint8_t>& bytes)
{
    cv::Mat mat = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw ValidationError("not a decodable PNG image");
    }
    if (mat.channels() == 1) {
        cv::cvtColor(mat, mat, cv::COLOR_GRAY2BGR);
    } else if (mat.channels() == 4) {
        cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
    }
    const double max = mat.depth() == CV_16U ? 65535.0 : 255.0;
    cv::Mat f;
    mat.convertTo(f, CV_64FC3, 2.0 / max, -1.0);
    auto t = torch::from_blob(f.ptr<double>(), {f.rows, f.cols, 3}, torch::kFloat64).clone();
    return t.flip({2}).permute({2, 0, 1}).contiguous().to(torch::kFloat32);
}

void write_png(const fs::path& path, const torch::Tensor& image)
{
    const auto bytes = encode_png(image);
    write_file_atomic(path, bytes.data(), bytes.size());
}

torch::Tensor read_png(const fs::path& path)
{
    return decode_png(read_file(path));
}

// --- dataset ---------------------------------------------------------------

VideoRecord load_video(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw IoError("video directory not found: " + dir.string());
    }
    VideoRecord rec;
    rec.video_id = dir.filename().string();
    rec.identity_id = dir.parent_path().filename().string();
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".png") {
            rec.frame_paths.push_back(entry.path());
        }
    }
    std::sort(rec.frame_paths.begin(), rec.frame_paths.end());
    rec.motions = read_motion_file(dir / "motion.jsonl");
    const auto id_path = dir.parent_path() / "identity.json";
    if (fs::exists(id_path)) {
        rec.identity = read_identity_file(id_path);
    }
    if (rec.frame_paths.size() != rec.motions.size()) {
        throw ValidationError("video " + dir.string() + " has " + std::to_string(rec.frame_paths.size()) +
                              " frames but " + std::to_string(rec.motions.size()) + " motion rows");
    }
    return rec;
}

FaceAppearance Corpus::appearance(size_t identity) const
{
    const auto& rec = identities.at(identity);
    return FaceAppearance{basis, rec.identity, rec.texture, rec.background, camera};
}

Corpus load_corpus(const fs::path& root)
{
    const auto meta_path = root / "corpus.json";
    if (!fs::exists(meta_path)) {
        throw IoError("dataset not found: " + meta_path.string() + " is missing");
    }
    std::ifstream in(meta_path);
    const auto meta = nlohmann::json::parse(in);
    Corpus corpus;
    corpus.root = root;
    corpus.camera.scale = meta.at("camera_scale").get<float>();
    corpus.camera.principal_point = {meta.at("principal_point")[0].get<float>(),
                                     meta.at("principal_point")[1].get<float>()};
    corpus.basis = std::make_shared<const MorphableBasis>(load_basis(root / "basis.ifuv"));
    std::vector<fs::path> id_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "identity.json")) {
            id_dirs.push_back(entry.path());
        }
    }
    std::sort(id_dirs.begin(), id_dirs.end());
    for (const auto& dir : id_dirs) {
        IdentityRecord rec;
        rec.id = dir.filename().string();
        rec.identity = read_identity_file(dir / "identity.json");
        rec.texture = read_png(dir / "texture.png");
        rec.background = read_png(dir / "background.png");
        std::vector<fs::path> videos;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_directory()) {
                videos.push_back(entry.path());
            }
        }
        std::sort(videos.begin(), videos.end());
        for (const auto& v : videos) {
            rec.videos.push_back(load_video(v));
        }
        corpus.identities.push_back(std::move(rec));
    }
    if (corpus.identities.empty()) {
        throw ValidationError("dataset " + root.string() + " contains no identities");
    }
    return corpus;
}

fs::path default_data_root()
{
    if (const char* env = std::getenv("IFACEUV_DATA_ROOT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data";
}

std::vector<MotionParams> synthetic_motion_trajectory(int frames, const CorpusConfig& config, uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> tracks;
    for (int d = 0; d < kMotionDims; ++d) {
        const double spread = d < kExpDims ? config.exp_std : (d < kExpDims + 3 ? config.angle_std : config.trans_std);
        const double centre = spread * normal(rng);
        auto track = smooth_noise(frames, centre, config.drift * spread, rng);
        double worst = 0.0;
        for (int t = 1; t < frames; ++t) {
            worst = std::max(worst, std::abs(track[static_cast<size_t>(t)] - track[static_cast<size_t>(t - 1)]));
        }
        if (worst > config.max_delta) {
            const double k = config.max_delta / worst * 0.999;
            for (auto& v : track) {
                v = centre + (v - centre) * k;
            }
        }
        tracks.push_back(std::move(track));
    }
    std::vector<MotionParams> out(static_cast<size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        std::vector<float> row(kMotionDims);
        for (int d = 0; d < kMotionDims; ++d) {
            row[static_cast<size_t>(d)] = static_cast<float>(tracks[static_cast<size_t>(d)][static_cast<size_t>(t)]);
        }
        out[static_cast<size_t>(t)] = split_descriptor(row);
    }
    return out;
}

torch::Tensor synthetic_texture(int64_t uv_resolution, double max_frequency, uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> freq(-max_frequency, max_frequency);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> tone(-0.15, 0.15);
    const double base[3] = {0.45 + tone(rng), 0.1 + tone(rng), -0.1 + tone(rng)};
    struct Wave
    {
        double fx, fy, ph, amp[3];
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 6; ++k) {
        Wave w{freq(rng), freq(rng), phase(rng), {}};
        for (auto& a : w.amp) {
            a = 0.12 * tone(rng) / 0.15;
        }
        waves.push_back(w);
    }
    // Darker blobs where eyes and mouth sit in the UV layout.
    const double blobs[3][3] = {{0.36, 0.42, 0.06}, {0.64, 0.42, 0.06}, {0.5, 0.72, 0.07}};
    const auto u = uv_resolution;
    auto tex = torch::empty({3, u, u}, torch::kFloat32);
    auto a = tex.accessor<float, 3>();
    for (int64_t r = 0; r < u; ++r) {
        for (int64_t c = 0; c < u; ++c) {
            const double x = (c + 0.5) / u, y = (r + 0.5) / u;
            double blob = 0.0;
            for (const auto& b : blobs) {
                blob += std::exp(-0.5 * (std::pow((x - b[0]) / b[2], 2) + std::pow((y - b[1]) / b[2], 2)));
            }
            for (int ch = 0; ch < 3; ++ch) {
                double v = base[ch] - 0.6 * blob;
                for (const auto& w : waves) {
                    v += w.amp[ch] * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.ph);
                }
                a[ch][r][c] = static_cast<float>(0.9 * std::tanh(v));
            }
        }
    }
    return tex;
}

torch::Tensor synthetic_background(int64_t resolution, uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> freq(-4.0, 4.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> level(-0.5, 0.1);
    const double base[3] = {level(rng), level(rng), level(rng) + 0.2};
    const double fx = freq(rng), fy = freq(rng), ph = phase(rng);
    const double gx = freq(rng), gy = freq(rng), ph2 = phase(rng);
    const auto n = resolution;
    auto bg = torch::empty({3, n, n}, torch::kFloat32);
    auto a = bg.accessor<float, 3>();
    for (int64_t r = 0; r < n; ++r) {
        for (int64_t c = 0; c < n; ++c) {
            const double x = (c + 0.5) / n, y = (r + 0.5) / n;
            const double s1 = std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) + ph);
            const double s2 = std::sin(2.0 * std::numbers::pi * (gx * x + gy * y) + ph2);
            for (int ch = 0; ch < 3; ++ch) {
                a[ch][r][c] = static_cast<float>(std::clamp(base[ch] + 0.2 * s1 + 0.1 * (ch - 1) * s2, -0.95, 0.95));
            }
        }
    }
    return bg;
}

void generate_synthetic_corpus(const fs::path& root, const CorpusConfig& config)
{
    if (config.n_identities < 1 || config.videos_per_identity < 1 || config.frames_per_video < 1 ||
        config.resolution < 1 || config.uv_resolution < 1) {
        throw ValidationError("corpus counts and resolutions must all be >= 1");
    }
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) {
        throw IoError("cannot create dataset root " + root.string());
    }
    const auto basis = std::make_shared<const MorphableBasis>(make_synthetic_basis());
    save_basis(*basis, root / "basis.ifuv");
    CameraConfig camera;
    camera.scale = config.camera_scale;

    nlohmann::ordered_json meta;
    meta["resolution"] = config.resolution;
    meta["uv_resolution"] = config.uv_resolution;
    meta["camera_scale"] = camera.scale;
    meta["principal_point"] = {camera.principal_point[0], camera.principal_point[1]};
    meta["seed"] = config.seed;
    write_text_atomic(root / "corpus.json", meta.dump(2) + "\n");

    std::mt19937_64 seeds(config.seed);
    for (int i = 0; i < config.n_identities; ++i) {
        const auto id_dir = root / identity_name(i);
        fs::create_directories(id_dir);
        std::mt19937_64 rng(seeds());
        std::normal_distribution<double> normal(0.0, config.identity_std);
        IdentityParams identity;
        for (int64_t k = 0; k < basis->id_dims(); ++k) {
            identity.alpha.push_back(static_cast<float>(normal(rng)));
        }
        write_identity_file(id_dir / "identity.json", identity);
        const auto texture = synthetic_texture(config.uv_resolution, config.texture_frequency, rng());
        const auto background = synthetic_background(config.resolution, rng());
        write_png(id_dir / "texture.png", texture);
        write_png(id_dir / "background.png", background);
        // Render from the PNG-quantized assets so re-fitting sees exactly what was stored.
        const FaceAppearance app{basis, identity, decode_png(encode_png(texture)), decode_png(encode_png(background)),
                                 camera};
        for (int v = 0; v < config.videos_per_identity; ++v) {
            const auto vid_dir = id_dir / video_name(v);
            fs::create_directories(vid_dir);
            const auto motions = synthetic_motion_trajectory(config.frames_per_video, config, rng());
            write_motion_file(vid_dir / "motion.jsonl", motions);
            for (int f = 0; f < config.frames_per_video; ++f) {
                const auto& m = motions[static_cast<size_t>(f)];
                auto mesh = build_mesh(*basis, identity, m.exp);
                mesh.vertices = mesh.vertices.to(torch::kFloat64);
                const auto frame = render_frame(mesh, m, camera, app.texture.to(torch::kFloat64),
                                                app.background.to(torch::kFloat64));
                write_png(vid_dir / frame_name(f), frame.to(torch::kFloat32));
            }
        }
    }
}

} // namespace uvreenact
