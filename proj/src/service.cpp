#include "uvreenact/service.hpp"

#include "uvreenact/data_io.hpp"
#include "uvreenact/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <regex>

namespace uvreenact {

using nlohmann::json;

namespace {

/// Request rejected because of one named field.
struct FieldError
{
    std::string field;
    std::string message;
};

HttpResponse reply(int status, const json& body)
{
    return HttpResponse{status, body.dump()};
}

HttpResponse error(int status, const std::string& message, const std::string& field = "")
{
    json body{{"error", message}};
    if (!field.empty()) {
        body["field"] = field;
    }
    return reply(status, body);
}

std::vector<float> read_floats(const json& obj, const std::string& field, std::optional<size_t> expected)
{
    if (!obj.contains(field)) {
        throw FieldError{field, "missing field '" + field + "'"};
    }
    const auto& arr = obj.at(field);
    if (!arr.is_array()) {
        throw FieldError{field, "field '" + field + "' must be an array"};
    }
    if (expected && arr.size() != *expected) {
        throw FieldError{field, "field '" + field + "' must have " + std::to_string(*expected) + " values, got " +
                                    std::to_string(arr.size())};
    }
    std::vector<float> out;
    for (const auto& v : arr) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            throw FieldError{field, "field '" + field + "' must contain finite numbers"};
        }
        out.push_back(v.get<float>());
    }
    return out;
}

MotionParams read_motion(const json& obj)
{
    const auto exp = read_floats(obj, "exp", kExpDims);
    const auto angle = read_floats(obj, "angle", 3);
    const auto trans = read_floats(obj, "trans", 3);
    return split_descriptor(motion_descriptor(exp, angle, trans));
}

json motion_json(const MotionParams& m)
{
    return json{{"exp", m.exp}, {"angle", m.angle}, {"trans", m.trans}};
}

json parse_body(const std::string& body)
{
    try {
        auto obj = json::parse(body);
        if (!obj.is_object()) {
            throw FieldError{"body", "request body must be a JSON object"};
        }
        return obj;
    } catch (const json::parse_error&) {
        throw FieldError{"body", "request body is not valid JSON"};
    }
}

std::string read_string(const json& obj, const std::string& field)
{
    if (!obj.contains(field) || !obj.at(field).is_string()) {
        throw FieldError{field, "missing string field '" + field + "'"};
    }
    return obj.at(field).get<std::string>();
}

} // namespace

std::string base64_encode(const std::vector<uint8_t>& bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<size_t>(n));
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text)
{
    std::string clean;
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ') {
            clean.push_back(c);
        }
    }
    if (clean.size() % 4 != 0) {
        throw ValidationError("base64 length is not a multiple of 4");
    }
    std::vector<uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) {
        throw ValidationError("malformed base64");
    }
    size_t pad = 0;
    if (!clean.empty() && clean.back() == '=') {
        ++pad;
        if (clean.size() > 1 && clean[clean.size() - 2] == '=') {
            ++pad;
        }
    }
    out.resize(static_cast<size_t>(n) - pad);
    return out;
}

std::optional<AudioRegressor> load_audio_regressor(const Checkpoint& checkpoint)
{
    if (!checkpoint.contains("audio.head.weight")) {
        return std::nullopt;
    }
    const auto& head = checkpoint.get("audio.head.weight");
    const auto& input = checkpoint.get("audio.lstm.weight_ih_l0");
    AudioRegressor regressor(static_cast<int>(input.size(1)), static_cast<int>(head.size(1)));
    checkpoint.load_module("audio", *regressor);
    regressor->eval();
    return regressor;
}

SessionService::SessionService(LoadedModel model, std::optional<AudioRegressor> audio, size_t max_body_bytes)
    : reenactor_(model.model, model.config, model.basis, model.camera), audio_(std::move(audio)),
      max_body_bytes_(max_body_bytes), identity_dims_(model.basis->id_dims())
{
}

size_t SessionService::session_count() const
{
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const
{
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

HttpResponse SessionService::handle(const std::string& method, const std::string& path, const std::string& body)
{
    if (body.size() > max_body_bytes_) {
        return error(413, "payload of " + std::to_string(body.size()) + " bytes exceeds the limit of " +
                              std::to_string(max_body_bytes_));
    }
    static const std::regex session_re(R"(^/session/([A-Za-z0-9_-]+)(/(reenact|audio))?/?$)");
    try {
        if (path == "/session" || path == "/session/") {
            if (method != "POST") {
                return error(405, "use POST /session");
            }
            return create_session(body);
        }
        std::smatch m;
        if (!std::regex_match(path, m, session_re)) {
            return error(404, "no route for " + path);
        }
        const auto id = m[1].str();
        const auto action = m[3].str();
        if (action.empty() && method == "DELETE") {
            std::lock_guard lock(sessions_mutex_);
            if (sessions_.erase(id) == 0) {
                return error(404, "unknown session '" + id + "'");
            }
            return reply(200, json{{"session_id", id}, {"deleted", true}});
        }
        auto session = find(id);
        if (!session) {
            return error(404, "unknown session '" + id + "'");
        }
        std::lock_guard lock(session->mutex);
        if (action.empty()) {
            return method == "GET" ? describe(id, *session) : error(405, "use GET or DELETE on a session");
        }
        if (method != "POST") {
            return error(405, "use POST for /" + action);
        }
        return action == "reenact" ? reenact(*session, body) : audio(*session, body);
    } catch (const FieldError& e) {
        return error(400, e.message, e.field);
    } catch (const std::invalid_argument& e) {
        return error(400, e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

HttpResponse SessionService::create_session(const std::string& body)
{
    const auto req = parse_body(body);
    torch::Tensor image;
    try {
        image = decode_png(base64_decode(read_string(req, "source_png_base64")));
    } catch (const ValidationError& e) {
        throw FieldError{"source_png_base64", e.what()};
    }
    const auto res = reenactor_.config().resolution;
    if (image.size(1) != res || image.size(2) != res) {
        throw FieldError{"source_png_base64", "source image must be " + std::to_string(res) + "×" +
                                                  std::to_string(res)};
    }
    IdentityParams identity;
    if (req.contains("identity_coeffs")) {
        const auto alpha = read_floats(req, "identity_coeffs", static_cast<size_t>(identity_dims_));
        identity.alpha.assign(alpha.begin(), alpha.end());
    } else {
        identity.alpha.assign(static_cast<size_t>(identity_dims_), 0.0f);
    }
    MotionParams source_motion;
    if (req.contains("source_motion")) {
        if (!req["source_motion"].is_object()) {
            throw FieldError{"source_motion", "field 'source_motion' must be an object"};
        }
        try {
            source_motion = read_motion(req["source_motion"]);
        } catch (const FieldError& e) {
            throw FieldError{"source_motion." + e.field, e.message};
        }
    }
    auto session = std::make_shared<Session>();
    session->source = reenactor_.prepare(image, identity, source_motion);
    session->source_motion = source_motion;
    std::string id;
    {
        std::lock_guard lock(sessions_mutex_);
        id = "s" + std::to_string(next_id_++);
        sessions_[id] = session;
    }
    return reply(201, json{{"session_id", id}});
}

HttpResponse SessionService::reenact(Session& session, const std::string& body)
{
    const auto motion = read_motion(parse_body(body));
    const auto start = std::chrono::steady_clock::now();
    const auto frame = reenactor_.reenact(session.source, motion);
    const auto png = encode_png(frame);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    ++session.reenact_count;
    session.last_motion = motion;
    return reply(200, json{{"frame_png_base64", base64_encode(png)}, {"latency_ms", ms}});
}

HttpResponse SessionService::audio(Session& session, const std::string& body)
{
    (void)session;
    if (!audio_) {
        return error(409, "checkpoint has no audio regressor");
    }
    const auto req = parse_body(body);
    Waveform wave;
    try {
        wave = decode_wav(base64_decode(read_string(req, "wav_base64")));
    } catch (const std::invalid_argument& e) {
        throw FieldError{"wav_base64", e.what()};
    }
    torch::Tensor pred;
    {
        std::lock_guard lock(audio_mutex_);
        torch::NoGradGuard guard;
        pred = predict_motion_sequence(audio_features(wave), *audio_).contiguous();
    }
    json seq = json::array();
    for (int64_t t = 0; t < pred.size(0); ++t) {
        const auto row = pred[t];
        seq.push_back(motion_json(split_descriptor(
            std::vector<float>(row.data_ptr<float>(), row.data_ptr<float>() + kMotionDims))));
    }
    return reply(200, json{{"motion_sequence", seq}});
}

HttpResponse SessionService::describe(const std::string& id, Session& session)
{
    json body{{"session_id", id},
              {"resolution", reenactor_.config().resolution},
              {"identity_coeffs", session.source.identity.alpha},
              {"source_motion", motion_json(session.source_motion)},
              {"reenact_count", session.reenact_count}};
    if (session.last_motion) {
        body["last_motion"] = motion_json(*session.last_motion);
    }
    return reply(200, body);
}

void run_http_server(SessionService& service, const std::string& host, int port)
{
    httplib::Server server;
    server.set_payload_max_length(service.max_body_bytes());
    auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto out = service.handle(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    server.Post(R"(/session.*)", bridge);
    server.Get(R"(/session.*)", bridge);
    server.Delete(R"(/session.*)", bridge);
    if (!server.listen(host, port)) {
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

} // namespace uvreenact
