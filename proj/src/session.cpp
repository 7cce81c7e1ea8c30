#include "flowmoods/session.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "json.hpp"

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/random.hpp"

namespace flowmoods {

using nlohmann::json;

namespace {

// Floor for the affinity term of the queue priority so artist weights always
// act multiplicatively in the intended direction.
constexpr double kMinPriorityBase = 1e-6;

std::vector<std::string> top_by_popularity(std::vector<std::string> ids,
                                           const std::unordered_map<std::string, double>& popularity,
                                           std::size_t size) {
    const auto pop = [&](const std::string& id) {
        const auto it = popularity.find(id);
        return it == popularity.end() ? 0.0 : it->second;
    };
    std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
        const double pa = pop(a), pb = pop(b);
        if (pa != pb) return pa > pb;
        return a < b;
    });
    if (ids.size() > size) ids.resize(size);
    return ids;
}

// Everything a refill must avoid for one session.
class SessionFilter {
public:
    SessionFilter(const SessionState* session, const SessionDeps& deps) : session_(session), deps_(deps) {
        if (!session) return;
        const auto window = std::min(session->history.size(), deps.config.no_repeat_window);
        recent_.insert(session->history.end() - static_cast<std::ptrdiff_t>(window), session->history.end());
        queued_.insert(session->queue.begin(), session->queue.end());
    }

    bool mood_ok(const std::string& song_id, std::optional<Mood> mood, double tau) const {
        if (!mood) return true;
        if (!deps_.scores) return false;
        const auto s = deps_.scores->score(song_id, *mood);
        return s && *s >= tau;
    }

    bool session_ok(const std::string& song_id) const {
        if (!session_) return true;
        if (recent_.count(song_id) || queued_.count(song_id) || session_->excluded_songs.count(song_id) ||
            session_->skipped_songs.count(song_id)) {
            return false;
        }
        if (!session_->excluded_artists.empty()) {
            const auto* song = deps_.catalog->find_song(song_id);
            if (!song || session_->excluded_artists.count(song->artist_id)) return false;
        }
        return true;
    }

    void mark_queued(const std::string& song_id) { queued_.insert(song_id); }

private:
    const SessionState* session_;
    const SessionDeps& deps_;
    std::unordered_set<std::string> recent_;
    std::unordered_set<std::string> queued_;
};

double session_tau(const SessionConfig& config, std::optional<Mood> mood) {
    return mood ? config.tau[mood_index(*mood)] : 0.0;
}

bool has_user_vector(const SessionDeps& deps, const std::string& user_id) {
    return deps.space && deps.index && deps.space->users().contains(user_id);
}

void refill_from_fallback(SessionState& s, const SessionDeps& deps, SessionFilter& filter) {
    if (!deps.fallback) return;
    const auto& pool = deps.fallback->pool(s.mood);
    if (pool.empty()) return;
    std::size_t added = 0;
    for (std::size_t step = 0; step < pool.size() && added < deps.config.refill_batch; ++step) {
        const auto& id = pool[(s.fallback_cursor + step) % pool.size()];
        if (!deps.catalog->find_song(id)) continue;
        if (!filter.session_ok(id) || !filter.mood_ok(id, s.mood, s.threshold)) continue;
        s.queue.push_back(id);
        filter.mark_queued(id);
        ++added;
        if (added == deps.config.refill_batch) {
            s.fallback_cursor = (s.fallback_cursor + step + 1) % pool.size();
            return;
        }
    }
    s.fallback_cursor = (s.fallback_cursor + 1) % pool.size();
}

void refill(SessionState& s, const SessionDeps& deps) {
    SessionFilter filter(&s, deps);
    const auto& cfg = deps.config;
    const auto before = s.queue.size();
    ++s.refill_count;

    if (!s.fallback_active && has_user_vector(deps, s.user_id)) {
        const auto favorites_wanted =
            static_cast<std::size_t>(std::lround(cfg.favorites_ratio * static_cast<double>(cfg.refill_batch)));
        const auto& user = deps.catalog->user(s.user_id);
        std::vector<std::string> favorites;
        for (const auto& id : user.favorite_song_ids) {
            if (filter.session_ok(id) && filter.mood_ok(id, s.mood, s.threshold)) favorites.push_back(id);
        }
        Rng rng(derive_seed(s.rng_seed, s.refill_count));
        rng.shuffle(favorites);
        std::size_t added = 0;
        for (std::size_t i = 0; i < favorites.size() && added < favorites_wanted; ++i) {
            s.queue.push_back(favorites[i]);
            filter.mark_queued(favorites[i]);
            ++added;
        }
        for (const auto& nb : candidate_pool(s.user_id, s.mood, deps, &s)) {
            if (added >= cfg.refill_batch) break;
            if (!filter.session_ok(nb.song_id)) continue;
            s.queue.push_back(nb.song_id);
            filter.mark_queued(nb.song_id);
            ++added;
        }
        if (s.queue.size() > before) return;
    }
    // Personalized candidates are used up (or never existed).
    s.fallback_active = true;
    refill_from_fallback(s, deps, filter);
}

double priority_base(const SessionState& s, const SessionDeps& deps, const std::string& song_id) {
    if (!deps.space) return kMinPriorityBase;
    const auto u = deps.space->users().find(s.user_id);
    const auto v = deps.space->songs().find(song_id);
    if (u == VectorTable::npos || v == VectorTable::npos) return kMinPriorityBase;
    return std::max(dot(deps.space->users().row(u), deps.space->songs().row(v)), kMinPriorityBase);
}

}  // namespace

void validate(const SessionConfig& c) {
    for (double t : c.tau) {
        if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::invalid_argument, "tau must lie in [0, 1]");
    }
    if (!(c.favorites_ratio >= 0.0 && c.favorites_ratio <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "favorites_ratio must lie in [0, 1]");
    }
    if (c.artist_spacing < 1) throw Error(ErrorCode::invalid_argument, "artist_spacing must be >= 1");
    if (!(c.like_boost > 1.0)) throw Error(ErrorCode::invalid_argument, "like_boost must be > 1");
    if (!(c.skip_penalty > 0.0 && c.skip_penalty < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "skip_penalty must lie in (0, 1)");
    }
    if (c.candidate_k == 0 || c.refill_batch == 0) {
        throw Error(ErrorCode::invalid_argument, "candidate_k and refill_batch must be >= 1");
    }
}

std::vector<std::string> build_fallback_pool(Mood mood, const MoodScoreTable& scores,
                                             const std::unordered_map<std::string, double>& popularity, double tau,
                                             std::size_t size) {
    std::vector<std::string> qualifying;
    for (const auto& id : scores.song_ids()) {
        const auto s = scores.score(id, mood);
        if (s && *s >= tau) qualifying.push_back(id);
    }
    if (qualifying.empty()) {
        throw Error(ErrorCode::empty_pool, "no song scores at or above the threshold for mood " +
                                               std::string(mood_name(mood)) + "; fallback pool would be empty");
    }
    return top_by_popularity(std::move(qualifying), popularity, size);
}

std::vector<std::string> build_regular_pool(const Catalog& catalog,
                                            const std::unordered_map<std::string, double>& popularity,
                                            std::size_t size) {
    std::vector<std::string> ids;
    ids.reserve(catalog.songs().size());
    for (const auto& s : catalog.songs()) ids.push_back(s.song_id);
    return top_by_popularity(std::move(ids), popularity, size);
}

FallbackPool build_fallback_pools(const Catalog& catalog, const MoodScoreTable& scores,
                                  const std::unordered_map<std::string, double>& popularity,
                                  const std::array<double, kMoodCount>& tau, std::size_t size) {
    FallbackPool pool;
    pool.model_version = scores.model_version();
    pool.tau = tau;
    for (Mood m : kAllMoods) {
        pool.pools[mood_index(m)] = build_fallback_pool(m, scores, popularity, tau[mood_index(m)], size);
    }
    pool.regular = build_regular_pool(catalog, popularity, size);
    return pool;
}

void save_fallback_pool(const FallbackPool& pool, const std::filesystem::path& path) {
    json doc;
    doc["snapshot_version"] = kFallbackSnapshotVersion;
    doc["model_version"] = pool.model_version;
    json tau = json::object();
    json pools = json::object();
    for (Mood m : kAllMoods) {
        tau[std::string(mood_name(m))] = pool.tau[mood_index(m)];
        pools[std::string(mood_name(m))] = pool.pools[mood_index(m)];
    }
    doc["tau"] = tau;
    doc["pools"] = pools;
    doc["regular"] = pool.regular;
    write_file_atomically(path, doc.dump(2) + "\n");
}

FallbackPool load_fallback_pool(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": " + e.what());
    }
    try {
        const int version = doc.at("snapshot_version").get<int>();
        if (version != kFallbackSnapshotVersion) {
            throw Error(ErrorCode::version_mismatch, path.string() + ": fallback snapshot version " +
                                                         std::to_string(version) + " is not supported (supported version " +
                                                         std::to_string(kFallbackSnapshotVersion) + ")");
        }
        FallbackPool pool;
        pool.model_version = doc.at("model_version").get<std::string>();
        for (Mood m : kAllMoods) {
            const std::string key(mood_name(m));
            pool.tau[mood_index(m)] = doc.at("tau").at(key).get<double>();
            pool.pools[mood_index(m)] = doc.at("pools").at(key).get<std::vector<std::string>>();
        }
        pool.regular = doc.at("regular").get<std::vector<std::string>>();
        return pool;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": " + e.what());
    }
}

std::string_view feedback_kind_name(FeedbackKind kind) noexcept {
    switch (kind) {
        case FeedbackKind::like: return "like";
        case FeedbackKind::skip: return "skip";
        case FeedbackKind::exclude_song: return "exclude_song";
        case FeedbackKind::exclude_artist: return "exclude_artist";
    }
    return "like";
}

std::optional<FeedbackKind> parse_feedback_kind(std::string_view text) noexcept {
    for (auto k : {FeedbackKind::like, FeedbackKind::skip, FeedbackKind::exclude_song, FeedbackKind::exclude_artist}) {
        if (feedback_kind_name(k) == text) return k;
    }
    return std::nullopt;
}

double SessionState::artist_weight(const std::string& artist_id) const {
    const auto it = artist_weights.find(artist_id);
    return it == artist_weights.end() ? 1.0 : it->second;
}

NeighborList candidate_pool(const std::string& user_id, std::optional<Mood> mood, const SessionDeps& deps,
                            const SessionState* session) {
    if (!has_user_vector(deps, user_id)) {
        throw Error(ErrorCode::not_found, "user '" + user_id + "' has no embedding vector");
    }
    const auto& cfg = deps.config;
    const auto q = deps.space->users().vector(user_id);
    const auto n_probe = cfg.n_probe != 0 ? cfg.n_probe : deps.index->default_n_probe();
    const double tau = session ? session->threshold : session_tau(cfg, mood);
    SessionFilter filter(session, deps);
    NeighborList out;
    for (auto& nb : deps.index->query(q, cfg.candidate_k, n_probe)) {
        if (!deps.catalog->find_song(nb.song_id)) continue;
        if (!filter.mood_ok(nb.song_id, mood, tau) || !filter.session_ok(nb.song_id)) continue;
        out.push_back(std::move(nb));
    }
    return out;
}

SessionState start_session(const std::string& user_id, std::optional<Mood> mood, const SessionDeps& deps,
                           std::uint64_t seed, std::string session_id) {
    if (!deps.catalog) throw Error(ErrorCode::missing_artifact, "session engine has no catalog");
    validate(deps.config);
    const auto& user = deps.catalog->user(user_id);
    if (!eligible_for_flow(user, deps.config.eligibility_threshold)) {
        throw Error(ErrorCode::ineligible_user,
                    "user '" + user_id + "' has " +
                        std::to_string(user.favorite_song_ids.size() + user.favorite_artist_ids.size()) +
                        " favorites; at least " + std::to_string(deps.config.eligibility_threshold) + " are required");
    }

    SessionState s;
    s.session_id = session_id.empty() ? user_id + "-" + std::to_string(seed) : std::move(session_id);
    s.user_id = user_id;
    s.mood = mood;
    s.rng_seed = seed;
    s.threshold = session_tau(deps.config, mood);

    if (has_user_vector(deps, user_id)) {
        s.fallback_active = candidate_pool(user_id, mood, deps, &s).size() < deps.config.min_candidates;
    } else {
        s.fallback_active = true;
    }
    if (s.fallback_active && (!deps.fallback || deps.fallback->pool(mood).empty())) {
        throw Error(ErrorCode::empty_pool, "fallback needed for user '" + user_id + "' but the " +
                                               (mood ? std::string(mood_name(*mood)) : std::string("regular")) +
                                               " fallback pool is empty");
    }
    refill(s, deps);
    return s;
}

std::string next_track(SessionState& s, const SessionDeps& deps) {
    const auto& cfg = deps.config;
    if (s.queue.empty()) refill(s, deps);
    if (s.queue.empty()) {
        throw Error(ErrorCode::session_exhausted,
                    "session '" + s.session_id + "' has no playable candidates left and the fallback pool is exhausted");
    }

    std::unordered_set<std::string> recent_artists;
    const auto spacing = std::min(cfg.artist_spacing, s.history.size());
    for (std::size_t i = s.history.size() - spacing; i < s.history.size(); ++i) {
        recent_artists.insert(deps.catalog->song(s.history[i]).artist_id);
    }

    std::size_t best = s.queue.size();
    double best_priority = 0.0;
    bool best_spaced = false;
    for (std::size_t i = 0; i < s.queue.size(); ++i) {
        const auto& artist = deps.catalog->song(s.queue[i]).artist_id;
        const bool spaced = !recent_artists.count(artist);
        const double priority = priority_base(s, deps, s.queue[i]) * s.artist_weight(artist);
        // Well-spaced songs always beat crowded ones; earlier entries win ties.
        if (best == s.queue.size() || (spaced && !best_spaced) || (spaced == best_spaced && priority > best_priority)) {
            best = i;
            best_priority = priority;
            best_spaced = spaced;
        }
    }

    std::string chosen = s.queue[best];
    s.queue.erase(s.queue.begin() + static_cast<std::ptrdiff_t>(best));
    s.history.push_back(chosen);
    if (s.queue.size() < cfg.refill_below) refill(s, deps);
    return chosen;
}

void apply_feedback(SessionState& s, const FeedbackEvent& event, const SessionDeps& deps) {
    if (std::find(s.history.begin(), s.history.end(), event.song_id) == s.history.end()) {
        throw Error(ErrorCode::invalid_argument,
                    "song '" + event.song_id + "' was never played in session '" + s.session_id + "'");
    }
    const auto artist = deps.catalog->song(event.song_id).artist_id;
    const auto purge = [&](auto&& matches) {
        s.queue.erase(std::remove_if(s.queue.begin(), s.queue.end(), matches), s.queue.end());
    };
    switch (event.kind) {
        case FeedbackKind::like:
            s.artist_weights[artist] = s.artist_weight(artist) * deps.config.like_boost;
            break;
        case FeedbackKind::skip:
            s.artist_weights[artist] = s.artist_weight(artist) * deps.config.skip_penalty;
            s.skipped_songs.insert(event.song_id);
            purge([&](const std::string& id) { return id == event.song_id; });
            break;
        case FeedbackKind::exclude_song:
            s.excluded_songs.insert(event.song_id);
            purge([&](const std::string& id) { return id == event.song_id; });
            break;
        case FeedbackKind::exclude_artist:
            s.excluded_artists.insert(artist);
            purge([&](const std::string& id) { return deps.catalog->song(id).artist_id == artist; });
            break;
    }
    if (s.queue.size() < deps.config.refill_below) refill(s, deps);
}

json session_to_json(const SessionState& s) {
    return json{
        {"snapshot_version", kSessionSnapshotVersion},
        {"session_id", s.session_id},
        {"user_id", s.user_id},
        {"mood", s.mood ? json(std::string(mood_id(*s.mood))) : json(nullptr)},
        {"queue", s.queue},
        {"history", s.history},
        {"artist_weights", s.artist_weights},
        {"excluded_songs", s.excluded_songs},
        {"excluded_artists", s.excluded_artists},
        {"skipped_songs", s.skipped_songs},
        {"fallback_active", s.fallback_active},
        {"rng_seed", s.rng_seed},
        {"threshold", s.threshold},
        {"fallback_cursor", s.fallback_cursor},
        {"refill_count", s.refill_count},
    };
}

SessionState session_from_json(const json& doc) {
    try {
        const int version = doc.at("snapshot_version").get<int>();
        if (version != kSessionSnapshotVersion) {
            throw Error(ErrorCode::version_mismatch, "session snapshot version " + std::to_string(version) +
                                                         " is not supported (supported version " +
                                                         std::to_string(kSessionSnapshotVersion) + ")");
        }
        SessionState s;
        s.session_id = doc.at("session_id").get<std::string>();
        s.user_id = doc.at("user_id").get<std::string>();
        if (const auto& m = doc.at("mood"); !m.is_null()) {
            s.mood = parse_mood_id(m.get<std::string>());
            if (!s.mood) throw Error(ErrorCode::corrupt_file, "session snapshot has an unknown mood");
        }
        s.queue = doc.at("queue").get<std::vector<std::string>>();
        s.history = doc.at("history").get<std::vector<std::string>>();
        s.artist_weights = doc.at("artist_weights").get<std::map<std::string, double>>();
        s.excluded_songs = doc.at("excluded_songs").get<std::set<std::string>>();
        s.excluded_artists = doc.at("excluded_artists").get<std::set<std::string>>();
        s.skipped_songs = doc.at("skipped_songs").get<std::set<std::string>>();
        s.fallback_active = doc.at("fallback_active").get<bool>();
        s.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
        s.threshold = doc.at("threshold").get<double>();
        s.fallback_cursor = doc.at("fallback_cursor").get<std::size_t>();
        s.refill_count = doc.at("refill_count").get<std::uint64_t>();
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_file, std::string("invalid session snapshot: ") + e.what());
    }
}

void save_session(const SessionState& session, const std::filesystem::path& path) {
    write_file_atomically(path, session_to_json(session).dump() + "\n");
}

SessionState load_session(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": " + e.what());
    }
    return session_from_json(doc);
}

}  // namespace flowmoods
