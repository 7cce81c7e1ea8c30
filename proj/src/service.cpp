#include "flowmoods/service.hpp"

#include <random>

#include "flowmoods/random.hpp"

namespace flowmoods {

using nlohmann::json;

namespace {

Reply ok(json body) { return Reply{200, std::move(body)}; }

const json& require_object(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::invalid_argument, "request body must be a JSON object");
    return body;
}

std::string require_string(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
        throw Error(ErrorCode::invalid_argument, std::string("field '") + key + "' must be a non-empty string");
    }
    return it->get<std::string>();
}

template <typename F>
Reply guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return error_reply(e);
    }
}

}  // namespace

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::not_found:
            return 404;
        case ErrorCode::ineligible_user:
            return 403;
        case ErrorCode::session_exhausted:
        case ErrorCode::empty_pool:
            return 409;
        case ErrorCode::invalid_argument:
        case ErrorCode::parse_error:
        case ErrorCode::dimension_mismatch:
            return 400;
        default:
            return 500;
    }
}

Reply error_reply(const Error& error) {
    return Reply{http_status(error.code()), json{{"code", error_code_name(error.code())}, {"message", error.what()}}};
}

Service::Service(std::shared_ptr<const ModelStack> stack, ServiceConfig config)
    : config_(std::move(config)), stack_(std::move(stack)), nonce_(std::random_device{}()) {
    validate(config_.session);
    if (!stack_) throw Error(ErrorCode::missing_artifact, "service started without artifacts");
}

std::shared_ptr<const ModelStack> Service::artifacts() const {
    std::lock_guard lock(stack_mutex_);
    return stack_;
}

void Service::reload_artifacts(const std::filesystem::path& dir) {
    auto fresh = std::make_shared<const ModelStack>(load_stack(dir));
    std::lock_guard lock(stack_mutex_);
    stack_ = std::move(fresh);
}

std::string Service::new_session_id() {
    const auto n = counter_.fetch_add(1) + 1;
    static constexpr char kHex[] = "0123456789abcdef";
    const auto tag = derive_seed(nonce_, n);
    std::string id = "sess-" + std::to_string(n) + "-";
    for (int shift = 28; shift >= 0; shift -= 4) id += kHex[(tag >> shift) & 0xf];
    return id;
}

std::shared_ptr<Service::Live> Service::find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::not_found, "unknown session '" + session_id + "'");
    return it->second;
}

json Service::track_json(const std::string& song_id, const SessionState& state, const ModelStack& stack) const {
    const auto& song = stack.catalog->song(song_id);
    const auto* artist = stack.catalog->find_artist(song.artist_id);
    json track{{"song_id", song.song_id},
               {"title", song.title},
               {"artist", artist ? artist->name : song.artist_id},
               {"artist_id", song.artist_id}};
    if (state.mood) {
        if (const auto s = stack.scores->score(song_id, *state.mood)) track["mood_score"] = *s;
    }
    return track;
}

Reply Service::moods() const {
    json out = json::array();
    for (Mood m : kAllMoods) {
        out.push_back({{"id", mood_id(m)}, {"name", mood_display_name(m)}, {"description", mood_description(m)}});
    }
    return ok(std::move(out));
}

Reply Service::health() const {
    return ok({{"status", "ok"}, {"model_version", artifacts()->model_version}, {"sessions", session_count()}});
}

Reply Service::start(const json& body) {
    return guarded([&] {
        require_object(body);
        const auto user_id = require_string(body, "user_id");
        std::optional<Mood> mood;
        if (const auto it = body.find("mood"); it != body.end() && !it->is_null()) {
            if (!it->is_string()) throw Error(ErrorCode::invalid_argument, "field 'mood' must be a mood id or null");
            mood = parse_mood_id(it->get<std::string>());
            if (!mood) throw Error(ErrorCode::invalid_argument, "unknown mood '" + it->get<std::string>() + "'");
        }
        const auto id = new_session_id();
        std::uint64_t seed = derive_seed(nonce_, counter_.load());
        if (const auto it = body.find("seed"); it != body.end() && !it->is_null()) {
            if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
                throw Error(ErrorCode::invalid_argument, "field 'seed' must be a non-negative integer");
            }
            seed = it->get<std::uint64_t>();
        }

        auto live = std::make_shared<Live>();
        live->stack = artifacts();
        const auto deps = live->stack->deps(config_.session);
        live->state = start_session(user_id, mood, deps, seed, id);
        const auto first = next_track(live->state, deps);
        const auto now = Clock::now();
        live->last_used = now;
        json reply{{"session_id", id},
                   {"track", track_json(first, live->state, *live->stack)},
                   {"fallback_active", live->state.fallback_active}};
        evict_idle(now);
        {
            std::unique_lock lock(sessions_mutex_);
            sessions_.emplace(id, std::move(live));
        }
        return ok(std::move(reply));
    });
}

Reply Service::next(const std::string& session_id) {
    return guarded([&] {
        const auto live = find(session_id);
        std::lock_guard lock(live->mutex);
        const auto deps = live->stack->deps(config_.session);
        const auto song = next_track(live->state, deps);
        live->last_used = Clock::now();
        return ok({{"track", track_json(song, live->state, *live->stack)},
                   {"fallback_active", live->state.fallback_active}});
    });
}

Reply Service::feedback(const std::string& session_id, const json& body) {
    return guarded([&] {
        require_object(body);
        const auto event_id = require_string(body, "event_id");
        const auto kind_text = require_string(body, "kind");
        const auto song_id = require_string(body, "song_id");
        const auto kind = parse_feedback_kind(kind_text);
        if (!kind) throw Error(ErrorCode::invalid_argument, "unknown feedback kind '" + kind_text + "'");

        const auto live = find(session_id);
        std::lock_guard lock(live->mutex);
        live->last_used = Clock::now();
        if (const auto it = live->applied_events.find(event_id); it != live->applied_events.end()) {
            return ok(it->second);
        }
        const auto deps = live->stack->deps(config_.session);
        const auto timestamp =
            std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
        apply_feedback(live->state, {*kind, song_id, timestamp}, deps);
        json reply{{"ok", true}};
        if (*kind == FeedbackKind::like || *kind == FeedbackKind::skip) {
            reply["artist_weight"] = live->state.artist_weight(live->stack->catalog->song(song_id).artist_id);
        }
        live->applied_events.emplace(event_id, reply);
        return ok(std::move(reply));
    });
}

Reply Service::get(const std::string& session_id) const {
    return guarded([&] {
        const auto live = find(session_id);
        std::lock_guard lock(live->mutex);
        const auto& s = live->state;
        json out{{"session_id", s.session_id},
                 {"user_id", s.user_id},
                 {"mood", s.mood ? json(std::string(mood_id(*s.mood))) : json(nullptr)},
                 {"fallback_active", s.fallback_active},
                 {"model_version", live->stack->model_version},
                 {"artist_weights", s.artist_weights},
                 {"excluded_songs", s.excluded_songs},
                 {"excluded_artists", s.excluded_artists},
                 {"history", s.history},
                 {"plays", s.history.size()}};
        out["track"] = s.history.empty() ? json(nullptr) : track_json(s.history.back(), s, *live->stack);
        json queue = json::array();
        for (const auto& id : s.queue) queue.push_back(track_json(id, s, *live->stack));
        out["queue"] = std::move(queue);
        return ok(std::move(out));
    });
}

Reply Service::reload(const json& body) {
    return guarded([&] {
        auto dir = config_.snapshot_dir;
        if (body.is_object()) {
            if (const auto it = body.find("snapshot_dir"); it != body.end() && !it->is_null()) {
                if (!it->is_string()) throw Error(ErrorCode::invalid_argument, "field 'snapshot_dir' must be a string");
                dir = it->get<std::string>();
            }
        }
        if (dir.empty()) throw Error(ErrorCode::invalid_argument, "no snapshot directory configured");
        reload_artifacts(dir);
        return ok({{"ok", true}, {"model_version", artifacts()->model_version}});
    });
}

std::size_t Service::evict_idle(Clock::time_point now) {
    std::unique_lock lock(sessions_mutex_);
    std::size_t dropped = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        bool idle = false;
        {
            std::lock_guard session_lock(it->second->mutex);
            idle = now - it->second->last_used > config_.idle_timeout;
        }
        if (idle) {
            it = sessions_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    return dropped;
}

std::size_t Service::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

SessionState Service::snapshot(const std::string& session_id) const {
    const auto live = find(session_id);
    std::lock_guard lock(live->mutex);
    return live->state;
}

}  // namespace flowmoods
