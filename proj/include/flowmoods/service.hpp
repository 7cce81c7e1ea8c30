#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "json.hpp"

#include "flowmoods/error.hpp"
#include "flowmoods/pipeline.hpp"
#include "flowmoods/session.hpp"

namespace flowmoods {

struct ServiceConfig {
    SessionConfig session;
    /// Sessions idle for longer than this are dropped.
    std::chrono::seconds idle_timeout{24 * 3600};
    /// Used by reload requests that do not name a directory.
    std::filesystem::path snapshot_dir;
};

/// HTTP status used for an error code.
int http_status(ErrorCode code) noexcept;

struct Reply {
    int status = 200;
    nlohmann::json body;
};

// Transport-independent request handlers. All methods are safe to call
// concurrently. Calls on one session are serialized; calls on distinct
// sessions run in parallel. Each session keeps the artifact set it started
// with until it ends.
class Service {
public:
    using Clock = std::chrono::steady_clock;

    Service(std::shared_ptr<const ModelStack> stack, ServiceConfig config);

    Reply moods() const;
    Reply health() const;
    /// Body: {user_id, mood: id or null, seed?}.
    Reply start(const nlohmann::json& body);
    Reply next(const std::string& session_id);
    /// Body: {event_id, kind, song_id}. A repeated event_id returns the first
    /// reply without applying the event again.
    Reply feedback(const std::string& session_id, const nlohmann::json& body);
    Reply get(const std::string& session_id) const;
    /// Body: {snapshot_dir?}. On failure the current artifacts stay in place.
    Reply reload(const nlohmann::json& body);

    /// Loads `dir` and swaps it in atomically. Throws like load_stack.
    void reload_artifacts(const std::filesystem::path& dir);
    std::shared_ptr<const ModelStack> artifacts() const;

    /// Drops sessions idle since before now - idle_timeout; returns how many.
    std::size_t evict_idle(Clock::time_point now);
    std::size_t session_count() const;
    /// Copy of a session's state, taken under its lock. Throws not_found.
    SessionState snapshot(const std::string& session_id) const;

private:
    struct Live {
        mutable std::mutex mutex;
        SessionState state;
        std::shared_ptr<const ModelStack> stack;
        std::map<std::string, nlohmann::json> applied_events;
        Clock::time_point last_used;
    };

    std::shared_ptr<Live> find(const std::string& session_id) const;
    nlohmann::json track_json(const std::string& song_id, const SessionState& state, const ModelStack& stack) const;
    std::string new_session_id();

    ServiceConfig config_;
    mutable std::mutex stack_mutex_;
    std::shared_ptr<const ModelStack> stack_;
    mutable std::shared_mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Live>> sessions_;
    std::atomic<std::uint64_t> counter_{0};
    std::uint64_t nonce_;
};

/// Error reply with body {code, message}.
Reply error_reply(const Error& error);

// HTTP binding of Service under /v1.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to host:port (port 0 picks a free port) and returns the port,
    /// or throws io_error.
    int bind(const std::string& host, int port);
    /// Serves the files under `dir` at `/`. Throws io_error when it is not a directory.
    void mount_static(const std::filesystem::path& dir);
    /// Blocks until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; a bare port binds to 127.0.0.1.
std::pair<std::string, int> parse_listen_address(const std::string& text);

}  // namespace flowmoods
