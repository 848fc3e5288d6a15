#pragma once

#include "uvreenact/audio_motion.hpp"
#include "uvreenact/trainer.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace uvreenact {

std::string base64_encode(const std::vector<uint8_t>& bytes);
/// Throws ValidationError on malformed input.
std::vector<uint8_t> base64_decode(const std::string& text);

struct HttpResponse
{
    int status = 200;
    std::string body; // JSON
};

/**
 * Session API over an immutable loaded checkpoint:
 *   POST   /session                {source_png_base64, identity_coeffs?, source_motion?} → {session_id}
 *   POST   /session/{id}/reenact   {exp[64], angle[3], trans[3]} → {frame_png_base64, latency_ms}
 *   POST   /session/{id}/audio     {wav_base64} → {motion_sequence}
 *   GET    /session/{id}           → session state
 *   DELETE /session/{id}
 * Errors are {"error": message, "field"?: name} with 400 / 404 / 405 / 409 / 413.
 */
class SessionService
{
public:
    SessionService(LoadedModel model, std::optional<AudioRegressor> audio, size_t max_body_bytes = 8u << 20);

    /// Transport-independent dispatch; safe to call concurrently.
    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

    size_t max_body_bytes() const { return max_body_bytes_; }
    size_t session_count() const;

private:
    struct Session
    {
        std::mutex mutex;
        SourceState source;
        MotionParams source_motion;
        int64_t reenact_count = 0;
        std::optional<MotionParams> last_motion;
    };

    HttpResponse create_session(const std::string& body);
    HttpResponse reenact(Session& session, const std::string& body);
    HttpResponse audio(Session& session, const std::string& body);
    HttpResponse describe(const std::string& id, Session& session);
    std::shared_ptr<Session> find(const std::string& id) const;

    Reenactor reenactor_;
    std::optional<AudioRegressor> audio_;
    std::mutex audio_mutex_;
    size_t max_body_bytes_;
    int64_t identity_dims_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    uint64_t next_id_ = 1;
};

/// Loads the reenactment model and, when present, the "audio." regressor from one checkpoint.
std::optional<AudioRegressor> load_audio_regressor(const Checkpoint& checkpoint);

/// Blocks serving HTTP on 127.0.0.1:port until the process is stopped.
void run_http_server(SessionService& service, const std::string& host, int port);

} // namespace uvreenact
