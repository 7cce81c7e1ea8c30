#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace flowmoods {

enum class Mood : std::uint8_t { Chill, Focus, Melancholy, Motivation, Party, YouAndMe };

inline constexpr std::size_t kMoodCount = 6;
inline constexpr std::array<Mood, kMoodCount> kAllMoods = {
    Mood::Chill, Mood::Focus, Mood::Melancholy, Mood::Motivation, Mood::Party, Mood::YouAndMe,
};

constexpr std::size_t mood_index(Mood mood) noexcept { return static_cast<std::size_t>(mood); }

/// Enumerant spelling used in label and score files ("YouAndMe").
std::string_view mood_name(Mood mood) noexcept;
/// Lower-case identifier used by the HTTP API ("you_and_me").
std::string_view mood_id(Mood mood) noexcept;
/// Human label shown on the wheel ("You & Me").
std::string_view mood_display_name(Mood mood) noexcept;
/// Public product description of the mood.
std::string_view mood_description(Mood mood) noexcept;

std::optional<Mood> parse_mood_name(std::string_view text) noexcept;
std::optional<Mood> parse_mood_id(std::string_view text) noexcept;

}  // namespace flowmoods
