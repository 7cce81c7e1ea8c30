#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "flowmoods/ann_index.hpp"
#include "flowmoods/catalog.hpp"
#include "flowmoods/embedding.hpp"
#include "flowmoods/mood.hpp"
#include "flowmoods/mood_classifier.hpp"

namespace flowmoods {

struct SessionConfig {
    /// Per-mood threshold; a song qualifies when its score is >= tau.
    std::array<double, kMoodCount> tau = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    std::size_t candidate_k = 500;
    /// Fewer qualifying neighbors than this at session start activates fallback.
    std::size_t min_candidates = 50;
    /// Share of each refill drawn from the user's favorite songs.
    double favorites_ratio = 0.3;
    /// Same artist not within the last W plays when avoidable.
    std::size_t artist_spacing = 3;
    double like_boost = 1.5;
    double skip_penalty = 0.5;
    std::size_t no_repeat_window = 100;
    std::size_t refill_batch = 10;
    /// Queue is refilled when it falls below this length.
    std::size_t refill_below = 5;
    /// Cells probed per candidate query; 0 uses the index default.
    std::size_t n_probe = 0;
    std::size_t eligibility_threshold = kDefaultEligibilityThreshold;
};

/// Throws invalid_argument on out-of-range settings.
void validate(const SessionConfig& config);

// Pre-selected, popularity-ranked songs per mood, plus a mood-agnostic list
// for regular sessions.
struct FallbackPool {
    std::string model_version;
    std::array<double, kMoodCount> tau = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    std::array<std::vector<std::string>, kMoodCount> pools;
    std::vector<std::string> regular;

    const std::vector<std::string>& pool(std::optional<Mood> mood) const {
        return mood ? pools[mood_index(*mood)] : regular;
    }
    bool operator==(const FallbackPool&) const = default;
};

/// Top-`size` songs by popularity (ties by id) among those scoring >= tau.
/// Throws empty_pool naming the mood when nothing qualifies.
std::vector<std::string> build_fallback_pool(Mood mood, const MoodScoreTable& scores,
                                             const std::unordered_map<std::string, double>& popularity, double tau,
                                             std::size_t size = 200);
/// Most popular catalog songs, used when no mood is selected.
std::vector<std::string> build_regular_pool(const Catalog& catalog,
                                            const std::unordered_map<std::string, double>& popularity,
                                            std::size_t size = 200);
FallbackPool build_fallback_pools(const Catalog& catalog, const MoodScoreTable& scores,
                                  const std::unordered_map<std::string, double>& popularity,
                                  const std::array<double, kMoodCount>& tau, std::size_t size = 200);

inline constexpr int kFallbackSnapshotVersion = 1;
void save_fallback_pool(const FallbackPool& pool, const std::filesystem::path& path);
FallbackPool load_fallback_pool(const std::filesystem::path& path);

// Shared, read-only inputs of the session engine. The space and index may be
// null, in which case every session runs from the fallback pool.
struct SessionDeps {
    std::shared_ptr<const Catalog> catalog;
    std::shared_ptr<const EmbeddingSpace> space;
    std::shared_ptr<const AnnIndex> index;
    std::shared_ptr<const MoodScoreTable> scores;
    std::shared_ptr<const FallbackPool> fallback;
    SessionConfig config;
};

enum class FeedbackKind { like, skip, exclude_song, exclude_artist };

std::string_view feedback_kind_name(FeedbackKind kind) noexcept;
std::optional<FeedbackKind> parse_feedback_kind(std::string_view text) noexcept;

struct FeedbackEvent {
    FeedbackKind kind = FeedbackKind::like;
    std::string song_id;
    std::int64_t timestamp = 0;
};

struct SessionState {
    std::string session_id;
    std::string user_id;
    /// Absent for a regular, mood-agnostic session.
    std::optional<Mood> mood;
    std::vector<std::string> queue;
    /// Every played song in order; the last entry is the current track.
    std::vector<std::string> history;
    std::map<std::string, double> artist_weights;
    std::set<std::string> excluded_songs;
    std::set<std::string> excluded_artists;
    /// Skipped songs are barred for the rest of the session.
    std::set<std::string> skipped_songs;
    bool fallback_active = false;
    std::uint64_t rng_seed = 0;
    /// Threshold applied to this session (0 when no mood is set).
    double threshold = 0.0;
    std::size_t fallback_cursor = 0;
    std::uint64_t refill_count = 0;

    double artist_weight(const std::string& artist_id) const;
    bool operator==(const SessionState&) const = default;
};

/// Throws not_found (unknown user), ineligible_user, empty_pool (fallback
/// needed but the pool is empty).
SessionState start_session(const std::string& user_id, std::optional<Mood> mood, const SessionDeps& deps,
                           std::uint64_t seed, std::string session_id = {});

/// ANN neighbors of the user in affinity order with unscored and below-threshold
/// songs removed (when a mood is set). With a session, its exclusions, skips,
/// queue and recent history are removed as well. Throws not_found when the
/// user has no vector.
NeighborList candidate_pool(const std::string& user_id, std::optional<Mood> mood, const SessionDeps& deps,
                            const SessionState* session = nullptr);

/// Plays the next song. Throws session_exhausted when neither candidates nor
/// the fallback pool can supply a track.
std::string next_track(SessionState& session, const SessionDeps& deps);

/// Throws invalid_argument when the song was never played in this session.
void apply_feedback(SessionState& session, const FeedbackEvent& event, const SessionDeps& deps);

inline constexpr int kSessionSnapshotVersion = 1;
nlohmann::json session_to_json(const SessionState& session);
/// Throws version_mismatch or corrupt_file.
SessionState session_from_json(const nlohmann::json& doc);
void save_session(const SessionState& session, const std::filesystem::path& path);
SessionState load_session(const std::filesystem::path& path);

}  // namespace flowmoods
