#include "flowmoods/mood.hpp"

namespace flowmoods {

namespace {

struct MoodInfo {
    std::string_view name;
    std::string_view id;
    std::string_view display;
    std::string_view description;
};

constexpr std::array<MoodInfo, kMoodCount> kMoodInfo = {{
    {"Chill", "chill", "Chill",
     "Time to kick back? Relax with your favorite artists that help you unwind and let go."},
    {"Focus", "focus", "Focus",
     "No distractions, please! Let us help you stay in your zone with the right kind of music to help you "
     "achieve your goal."},
    {"Melancholy", "melancholy", "Melancholy",
     "We all get the blues now and then. If you are in the mood for a good cry or want to wallow in sorrow "
     "– let it all out here."},
    {"Motivation", "motivation", "Motivation",
     "Need a little nudge? Make workouts a joyful experience with a power mix to keep you moving."},
    {"Party", "party", "Party",
     "Whether it’s a party of one or party of more, get in the spirit with an endless mix of "
     "crowd-pleasing music to get you dancing."},
    {"YouAndMe", "you_and_me", "You & Me",
     "Feeling a little frisky? Let us set the mood for romance with feel-good tracks that you and your "
     "partner will love."},
}};

}  // namespace

std::string_view mood_name(Mood mood) noexcept { return kMoodInfo[mood_index(mood)].name; }
std::string_view mood_id(Mood mood) noexcept { return kMoodInfo[mood_index(mood)].id; }
std::string_view mood_display_name(Mood mood) noexcept { return kMoodInfo[mood_index(mood)].display; }
std::string_view mood_description(Mood mood) noexcept { return kMoodInfo[mood_index(mood)].description; }

std::optional<Mood> parse_mood_name(std::string_view text) noexcept {
    for (Mood m : kAllMoods) {
        if (kMoodInfo[mood_index(m)].name == text) return m;
    }
    return std::nullopt;
}

std::optional<Mood> parse_mood_id(std::string_view text) noexcept {
    for (Mood m : kAllMoods) {
        if (kMoodInfo[mood_index(m)].id == text) return m;
    }
    return std::nullopt;
}

}  // namespace flowmoods
