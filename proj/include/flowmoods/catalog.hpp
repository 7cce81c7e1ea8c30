#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowmoods/mood.hpp"

namespace flowmoods {

inline constexpr std::size_t kAudioEmbeddingDim = 256;
inline constexpr std::size_t kDefaultEligibilityThreshold = 16;

struct Artist {
    std::string artist_id;
    std::string name;
};

struct Song {
    std::string song_id;
    std::string artist_id;
    std::string title;
    std::optional<std::vector<double>> audio_embedding;
};

struct User {
    std::string user_id;
    std::set<std::string> favorite_song_ids;
    std::set<std::string> favorite_artist_ids;
};

struct InteractionEvent {
    std::string user_id;
    std::string song_id;
    double weight = 0.0;
    std::int64_t timestamp = 0;

    bool operator==(const InteractionEvent&) const = default;
};

struct MoodLabel {
    std::string song_id;
    Mood mood = Mood::Chill;
    bool positive = false;

    bool operator==(const MoodLabel&) const = default;
};

// Immutable, referentially consistent collection of artists, songs and users.
// Instances are built through CatalogBuilder or load_catalog().
class Catalog {
public:
    Catalog() = default;

    std::span<const Artist> artists() const noexcept { return artists_; }
    std::span<const Song> songs() const noexcept { return songs_; }
    std::span<const User> users() const noexcept { return users_; }

    const Artist* find_artist(const std::string& id) const;
    const Song* find_song(const std::string& id) const;
    const User* find_user(const std::string& id) const;

    // Throwing lookups (ErrorCode::not_found).
    const Artist& artist(const std::string& id) const;
    const Song& song(const std::string& id) const;
    const User& user(const std::string& id) const;

private:
    friend class CatalogBuilder;

    std::vector<Artist> artists_;
    std::vector<Song> songs_;
    std::vector<User> users_;
    std::unordered_map<std::string, std::size_t> artist_index_;
    std::unordered_map<std::string, std::size_t> song_index_;
    std::unordered_map<std::string, std::size_t> user_index_;
};

// Accumulates records and validates them. Duplicate ids and malformed
// embeddings fail at add time; cross references are checked by build().
// The optional line number is carried into diagnostics.
class CatalogBuilder {
public:
    void add_artist(Artist artist, std::size_t line = 0);
    void add_song(Song song, std::size_t line = 0);
    void add_user(User user, std::size_t line = 0);
    Catalog build() &&;

private:
    Catalog catalog_;
    std::vector<std::size_t> song_lines_;
    std::vector<std::size_t> user_lines_;
};

/// Reads the newline-delimited JSON catalog format (docs/formats.md).
Catalog load_catalog(const std::filesystem::path& path);
void save_catalog(const Catalog& catalog, const std::filesystem::path& path);

/// True iff favorite songs plus favorite artists reach `threshold`.
bool eligible_for_flow(const User& user, std::size_t threshold = kDefaultEligibilityThreshold) noexcept;

struct InteractionLoad {
    std::vector<InteractionEvent> events;  // sorted by timestamp, stable for ties
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

/// CSV user_id,song_id,weight,timestamp. Rows with unknown ids are dropped and
/// reported; rows that fail to parse are errors.
InteractionLoad load_interactions(const std::filesystem::path& path, const Catalog& catalog);
void save_interactions(std::span<const InteractionEvent> events, const std::filesystem::path& path);

struct LabelLoad {
    std::vector<MoodLabel> labels;
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

/// CSV song_id,mood,label with label in {0,1}. A second label for the same
/// (song, mood) pair is an error.
LabelLoad load_labels(const std::filesystem::path& path, const Catalog& catalog);
void save_labels(std::span<const MoodLabel> labels, const std::filesystem::path& path);

/// Sum of interaction weights per song; used as the popularity signal.
std::unordered_map<std::string, double> song_popularity(std::span<const InteractionEvent> events);

}  // namespace flowmoods
