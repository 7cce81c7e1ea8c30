#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowmoods/catalog.hpp"
#include "flowmoods/mood.hpp"
#include "flowmoods/session.hpp"

namespace flowmoods {

inline constexpr std::size_t kDaysPerWeek = 7;
/// Base intensity per mood (outer index) and weekday (inner index, 0 = Monday).
using MoodTimeProfile = std::array<std::array<double, kDaysPerWeek>, kMoodCount>;

/// Motivation leads every day, Party rises Friday to Sunday, Focus is a
/// weekday mood and Chill gains on Sundays.
MoodTimeProfile default_mood_time_profile();

struct SimConfig {
    std::size_t n_users = 1000;
    std::size_t n_songs = 3000;
    std::size_t n_artists = 300;
    std::size_t n_days = 14;
    std::size_t n_genres = 8;
    MoodTimeProfile mood_time_profile = default_mood_time_profile();
    /// Share of sessions started from the wheel center (no mood).
    double regular_flow_share = 0.1;

    // Audio embedding generator: each mood owns a unit anchor direction and a
    // song's embedding is sum_m strength * intensity_m * anchor_m + genre
    // component + N(0, noise^2) per dimension.
    double anchor_strength = 4.0;
    double genre_strength = 2.0;
    double embedding_noise = 0.35;
    /// Probability that a song carries a second strong mood.
    double multi_mood_rate = 0.15;
    /// Labels are positive when the anchor projection is >= 0.5 + margin and
    /// negative when <= 0.5 - margin; songs in between stay unlabeled.
    double label_margin = 0.15;
    /// Half positive, half negative.
    std::size_t labels_per_mood = 600;

    // Listening history used to train the embedding space.
    std::size_t interactions_per_user = 60;
    std::size_t favorites_per_user = 20;

    // Session behavior.
    std::size_t sessions_per_user_day = 1;
    double mean_session_length = 14.0;
    /// Skip probability is skip_max / (1 + exp(skip_slope * affinity)).
    double skip_max = 0.6;
    double skip_slope = 4.0;
    double like_probability = 0.05;
    double exclude_artist_probability = 0.003;
    std::int64_t seconds_per_track = 180;

    /// 2022-04-04T00:00:00Z, a Monday.
    std::int64_t start_timestamp = 1649030400;
    std::uint64_t seed = 7;
};

/// Throws invalid_argument for inconsistent settings, including more labels
/// per mood than songs.
void validate(const SimConfig& config);

struct World {
    Catalog catalog;
    std::vector<InteractionEvent> interactions;
    std::vector<MoodLabel> labels;
    std::array<std::vector<double>, kMoodCount> mood_anchors;
    /// Generator intensity per song (catalog order) and mood.
    std::vector<std::array<double, kMoodCount>> mood_intensity;
};

World generate_world(const SimConfig& config);

struct StreamRecord {
    std::int64_t timestamp = 0;
    std::string user_id;
    std::string song_id;
    std::optional<Mood> mood;
    std::string session_id;

    bool operator==(const StreamRecord&) const = default;
};

using StreamLog = std::vector<StreamRecord>;

struct SimulationResult {
    StreamLog log;
    std::size_t sessions_started = 0;
    std::size_t session_errors = 0;
    std::size_t skips = 0;
    std::size_t likes = 0;
};

/// Replays n_days of mood-conditioned sessions through the session engine.
/// Session errors end that user's listening for the day and are counted.
SimulationResult simulate_days(const World& world, const SessionDeps& deps, const SimConfig& config);

void save_stream_log(const StreamLog& log, const std::filesystem::path& path);
StreamLog load_stream_log(const std::filesystem::path& path);

struct DayShares {
    std::int64_t day = 0;  // days since 1970-01-01 (UTC)
    std::string date;      // YYYY-MM-DD
    std::size_t weekday = 0;  // 0 = Monday
    /// True when the day only has regular (mood-less) streams.
    bool empty = false;
    std::array<double, kMoodCount> shares{};
    std::size_t mood_streams = 0;
    std::size_t total_streams = 0;
};

/// Per-day share of mood-tagged streams. Days with only regular streams are
/// kept as empty-day markers. Throws invalid_argument on an empty log.
std::vector<DayShares> mood_distribution(const StreamLog& log);

/// CSV day,mood,share; an empty day is written as a single "day,,"
/// row.
void save_distribution(const std::vector<DayShares>& days, const std::filesystem::path& path);

struct UsageShapeCheck {
    bool motivation_top_every_day = false;
    bool party_weekend_above_weekday = false;
    bool focus_weekday_above_weekend = false;
    bool chill_sunday_at_least_weekly_mean = false;

    bool all() const noexcept {
        return motivation_top_every_day && party_weekend_above_weekday && focus_weekday_above_weekend &&
               chill_sunday_at_least_weekly_mean;
    }
};

/// The four ordinal usage claims: Motivation leads every day; Party's mean
/// Fri-Sun share beats Mon-Thu; Focus's Mon-Fri share beats Sat-Sun; each
/// Sunday's Chill share is at least the mean of its week.
UsageShapeCheck check_usage_shape(const std::vector<DayShares>& days);

std::string civil_date(std::int64_t days_since_epoch);
std::size_t weekday_of(std::int64_t days_since_epoch);

}  // namespace flowmoods
