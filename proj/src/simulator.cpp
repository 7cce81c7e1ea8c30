#include "flowmoods/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/random.hpp"
#include "flowmoods/text_util.hpp"

namespace flowmoods {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;
constexpr std::size_t kMoodBlock = 24;  // embedding dims owned by each mood anchor

std::string padded(char prefix, std::size_t n, int width) {
    std::string digits = std::to_string(n);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return std::string(1, prefix) + digits;
}

std::vector<double> random_unit(Rng& rng, std::size_t begin, std::size_t end) {
    std::vector<double> v(kAudioEmbeddingDim, 0.0);
    double norm = 0.0;
    for (std::size_t j = begin; j < end; ++j) {
        v[j] = rng.normal();
        norm += v[j] * v[j];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::size_t geometric_length(Rng& rng, double mean) {
    if (mean <= 1.0) return 1;
    const double p = 1.0 / mean;
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    return 1 + static_cast<std::size_t>(std::floor(std::log(u) / std::log(1.0 - p)));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

MoodTimeProfile default_mood_time_profile() {
    MoodTimeProfile p{};
    //                                 Mon   Tue   Wed   Thu   Fri   Sat   Sun
    p[mood_index(Mood::Chill)] = {0.14, 0.14, 0.14, 0.14, 0.14, 0.15, 0.20};
    p[mood_index(Mood::Focus)] = {0.20, 0.20, 0.20, 0.20, 0.18, 0.07, 0.07};
    p[mood_index(Mood::Melancholy)] = {0.09, 0.09, 0.09, 0.09, 0.08, 0.08, 0.09};
    p[mood_index(Mood::Motivation)] = {0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.30};
    p[mood_index(Mood::Party)] = {0.08, 0.08, 0.08, 0.08, 0.16, 0.20, 0.16};
    p[mood_index(Mood::YouAndMe)] = {0.08, 0.08, 0.08, 0.08, 0.09, 0.10, 0.09};
    return p;
}

void validate(const SimConfig& c) {
    if (c.n_songs == 0 || c.n_artists == 0 || c.n_genres == 0) {
        throw Error(ErrorCode::invalid_argument, "simulation needs at least one song, artist and genre");
    }
    if (c.labels_per_mood > c.n_songs) {
        throw Error(ErrorCode::invalid_argument, "config demands " + std::to_string(c.labels_per_mood) +
                                                     " labels per mood but the catalog has only " +
                                                     std::to_string(c.n_songs) + " songs");
    }
    if (c.labels_per_mood < 200) {
        throw Error(ErrorCode::invalid_argument, "labels_per_mood must be >= 200 (100 positives and 100 negatives)");
    }
    for (std::size_t day = 0; day < kDaysPerWeek; ++day) {
        double total = 0.0;
        for (std::size_t m = 0; m < kMoodCount; ++m) {
            const double v = c.mood_time_profile[m][day];
            if (!(v >= 0.0)) throw Error(ErrorCode::invalid_argument, "mood intensities must be >= 0");
            total += v;
        }
        if (total <= 0.0) {
            throw Error(ErrorCode::invalid_argument, "every weekday needs at least one mood with positive intensity");
        }
    }
    if (!(c.regular_flow_share >= 0.0 && c.regular_flow_share <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "regular_flow_share must lie in [0, 1]");
    }
    if (!(c.label_margin >= 0.0 && c.label_margin < 0.5)) {
        throw Error(ErrorCode::invalid_argument, "label_margin must lie in [0, 0.5)");
    }
    if (!(c.anchor_strength > 0.0) || !(c.embedding_noise >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "anchor_strength must be > 0 and embedding_noise >= 0");
    }
}

World generate_world(const SimConfig& c) {
    validate(c);
    Rng rng(derive_seed(c.seed, 0));
    World world;

    for (Mood m : kAllMoods) {
        const auto begin = mood_index(m) * kMoodBlock;
        world.mood_anchors[mood_index(m)] = random_unit(rng, begin, begin + kMoodBlock);
    }
    std::vector<std::vector<double>> genre_anchors;
    std::vector<std::array<double, kMoodCount>> genre_mood_bias(c.n_genres);
    for (std::size_t g = 0; g < c.n_genres; ++g) {
        genre_anchors.push_back(random_unit(rng, kMoodCount * kMoodBlock, kAudioEmbeddingDim));
        for (auto& w : genre_mood_bias[g]) w = rng.uniform(0.2, 1.0);
    }

    CatalogBuilder builder;
    std::vector<std::size_t> artist_genre(c.n_artists);
    for (std::size_t a = 0; a < c.n_artists; ++a) {
        artist_genre[a] = rng.uniform_index(c.n_genres);
        builder.add_artist({padded('a', a, 4), "Artist " + std::to_string(a)});
    }

    std::vector<std::vector<std::size_t>> songs_by_genre(c.n_genres);
    std::vector<std::size_t> song_artist(c.n_songs);
    std::vector<double> song_appeal(c.n_songs);
    world.mood_intensity.resize(c.n_songs);
    for (std::size_t s = 0; s < c.n_songs; ++s) {
        const auto artist = rng.uniform_index(c.n_artists);
        const auto genre = artist_genre[artist];
        song_artist[s] = artist;
        songs_by_genre[genre].push_back(s);
        song_appeal[s] = 1.0 / (1.0 + rng.uniform_index(20));

        auto& intensity = world.mood_intensity[s];
        const auto primary = rng.categorical(genre_mood_bias[genre]);
        for (std::size_t m = 0; m < kMoodCount; ++m) {
            if (m == primary || rng.bernoulli(c.multi_mood_rate)) {
                intensity[m] = rng.uniform(0.65, 1.0);
            } else {
                intensity[m] = rng.uniform(0.0, 0.4);
            }
        }
        std::vector<double> emb(kAudioEmbeddingDim);
        for (auto& x : emb) x = c.embedding_noise * rng.normal();
        for (std::size_t m = 0; m < kMoodCount; ++m) {
            for (std::size_t j = 0; j < kAudioEmbeddingDim; ++j) {
                emb[j] += c.anchor_strength * intensity[m] * world.mood_anchors[m][j];
            }
        }
        for (std::size_t j = 0; j < kAudioEmbeddingDim; ++j) emb[j] += c.genre_strength * genre_anchors[genre][j];
        builder.add_song({padded('s', s, 5), padded('a', artist, 4), "Song " + std::to_string(s), std::move(emb)});
    }

    std::vector<std::map<std::size_t, double>> plays(c.n_users);
    for (std::size_t u = 0; u < c.n_users; ++u) {
        const auto g1 = rng.uniform_index(c.n_genres);
        const auto g2 = rng.uniform_index(c.n_genres);
        for (std::size_t k = 0; k < c.interactions_per_user; ++k) {
            const double r = rng.uniform();
            const auto genre = r < 0.7 ? g1 : (r < 0.9 ? g2 : rng.uniform_index(c.n_genres));
            const auto& pool = songs_by_genre[genre].empty() ? songs_by_genre[g1] : songs_by_genre[genre];
            if (pool.empty()) continue;
            std::vector<double> weights(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i) weights[i] = song_appeal[pool[i]];
            const auto song = pool[rng.categorical(weights)];
            const auto timestamp =
                c.start_timestamp - 1 - static_cast<std::int64_t>(rng.uniform_index(30 * kSecondsPerDay));
            const double weight = static_cast<double>(1 + rng.uniform_index(5));
            plays[u][song] += weight;
            world.interactions.push_back({padded('u', u, 5), padded('s', song, 5), weight, timestamp});
        }
        std::vector<std::pair<double, std::size_t>> ranked;
        for (const auto& [song, w] : plays[u]) ranked.emplace_back(w, song);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        User user{padded('u', u, 5), {}, {}};
        for (std::size_t i = 0; i < ranked.size() && i < c.favorites_per_user; ++i) {
            user.favorite_song_ids.insert(padded('s', ranked[i].second, 5));
            if (i < 3) user.favorite_artist_ids.insert(padded('a', song_artist[ranked[i].second], 4));
        }
        builder.add_user(std::move(user));
    }
    std::stable_sort(world.interactions.begin(), world.interactions.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    world.catalog = std::move(builder).build();

    // Labels from the anchor projection, with an ambiguity band around 0.5.
    const auto songs = world.catalog.songs();
    for (Mood m : kAllMoods) {
        const auto mi = mood_index(m);
        std::vector<std::size_t> positives, negatives;
        for (std::size_t s = 0; s < songs.size(); ++s) {
            const double proximity = dot(*songs[s].audio_embedding, world.mood_anchors[mi]) / c.anchor_strength;
            if (proximity >= 0.5 + c.label_margin) positives.push_back(s);
            if (proximity <= 0.5 - c.label_margin) negatives.push_back(s);
        }
        const auto half = c.labels_per_mood / 2;
        if (positives.size() < half || negatives.size() < c.labels_per_mood - half) {
            throw Error(ErrorCode::invalid_argument,
                        "only " + std::to_string(positives.size()) + " clear positives and " +
                            std::to_string(negatives.size()) + " clear negatives for mood " +
                            std::string(mood_name(m)) + "; lower labels_per_mood or label_margin");
        }
        rng.shuffle(positives);
        rng.shuffle(negatives);
        for (std::size_t i = 0; i < half; ++i) world.labels.push_back({songs[positives[i]].song_id, m, true});
        for (std::size_t i = 0; i < c.labels_per_mood - half; ++i) {
            world.labels.push_back({songs[negatives[i]].song_id, m, false});
        }
    }
    return world;
}

SimulationResult simulate_days(const World& world, const SessionDeps& deps, const SimConfig& c) {
    validate(c);
    SimulationResult result;
    const auto first_day = floor_div(c.start_timestamp, kSecondsPerDay);
    const auto users = world.catalog.users();
    for (std::size_t day = 0; day < c.n_days; ++day) {
        const auto weekday = weekday_of(first_day + static_cast<std::int64_t>(day));
        const std::int64_t day_start = (first_day + static_cast<std::int64_t>(day)) * kSecondsPerDay;
        std::vector<double> intensities(kMoodCount);
        for (std::size_t m = 0; m < kMoodCount; ++m) intensities[m] = c.mood_time_profile[m][weekday];

        for (std::size_t u = 0; u < users.size(); ++u) {
            const auto& user = users[u];
            Rng rng(derive_seed(derive_seed(c.seed, 1000 + day), u));
            for (std::size_t k = 0; k < c.sessions_per_user_day; ++k) {
                std::optional<Mood> mood;
                if (!rng.bernoulli(c.regular_flow_share)) mood = kAllMoods[rng.categorical(intensities)];
                const std::int64_t start = day_start + 6 * 3600 + static_cast<std::int64_t>(rng.uniform_index(16 * 3600));
                const auto length = geometric_length(rng, c.mean_session_length);
                const auto session_seed = rng.next();
                const std::string session_id =
                    "d" + std::to_string(day) + "-" + user.user_id + "-" + std::to_string(k);
                bool failed = false;
                try {
                    auto session = start_session(user.user_id, mood, deps, session_seed, session_id);
                    ++result.sessions_started;
                    for (std::size_t t = 0; t < length; ++t) {
                        // Sessions end at midnight so each stream belongs to its simulated day.
                        const auto timestamp = start + static_cast<std::int64_t>(t) * c.seconds_per_track;
                        if (timestamp >= day_start + kSecondsPerDay) break;
                        const auto song = next_track(session, deps);
                        result.log.push_back({timestamp, user.user_id, song, mood, session_id});
                        double aff = 0.0;
                        if (deps.space && deps.space->users().contains(user.user_id) &&
                            deps.space->songs().contains(song)) {
                            aff = affinity(*deps.space, user.user_id, song);
                        }
                        const double p_skip = c.skip_max / (1.0 + std::exp(c.skip_slope * aff));
                        if (rng.bernoulli(p_skip)) {
                            apply_feedback(session, {FeedbackKind::skip, song, timestamp}, deps);
                            ++result.skips;
                        } else if (rng.bernoulli(c.like_probability)) {
                            apply_feedback(session, {FeedbackKind::like, song, timestamp}, deps);
                            ++result.likes;
                        }
                        if (rng.bernoulli(c.exclude_artist_probability)) {
                            apply_feedback(session, {FeedbackKind::exclude_artist, song, timestamp}, deps);
                        }
                    }
                } catch (const Error&) {
                    ++result.session_errors;
                    failed = true;
                }
                if (failed) break;
            }
        }
    }
    std::stable_sort(result.log.begin(), result.log.end(), [](const auto& a, const auto& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.session_id < b.session_id;
    });
    return result;
}

void save_stream_log(const StreamLog& log, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "timestamp,user_id,song_id,mood,session_id\n";
    for (const auto& r : log) {
        out << r.timestamp << ',' << r.user_id << ',' << r.song_id << ',' << (r.mood ? mood_name(*r.mood) : "") << ','
            << r.session_id << '\n';
    }
    write_file_atomically(path, out.str());
}

StreamLog load_stream_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string() + ": file missing or unreadable");
    StreamLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty() || (line_no == 1 && line.starts_with("timestamp"))) continue;
        const auto cols = text::split(text::trim(line), ',');
        StreamRecord r;
        if (cols.size() != 5 || !text::parse_int64(cols[0], r.timestamp)) {
            throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(line_no) +
                                                    ": expected timestamp,user_id,song_id,mood,session_id",
                        line_no);
        }
        r.user_id = std::string(cols[1]);
        r.song_id = std::string(cols[2]);
        if (!cols[3].empty()) {
            r.mood = parse_mood_name(cols[3]);
            if (!r.mood) {
                throw Error(ErrorCode::parse_error,
                            path.string() + ":" + std::to_string(line_no) + ": unknown mood '" + std::string(cols[3]) + "'",
                            line_no);
            }
        }
        r.session_id = std::string(cols[4]);
        log.push_back(std::move(r));
    }
    return log;
}

std::string civil_date(std::int64_t z) {
    // Days-from-civil inverse (proleptic Gregorian).
    z += 719468;
    const std::int64_t era = floor_div(z, 146097);
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y + (m <= 2)), m, d);
    return buf;
}

std::size_t weekday_of(std::int64_t days_since_epoch) {
    // 1970-01-01 was a Thursday (index 3 with Monday = 0).
    const auto r = (days_since_epoch + 3) % 7;
    return static_cast<std::size_t>(r < 0 ? r + 7 : r);
}

std::vector<DayShares> mood_distribution(const StreamLog& log) {
    if (log.empty()) throw Error(ErrorCode::invalid_argument, "cannot compute a mood distribution from an empty log");
    std::map<std::int64_t, std::pair<std::array<std::size_t, kMoodCount>, std::size_t>> counts;
    for (const auto& r : log) {
        auto& [per_mood, total] = counts[floor_div(r.timestamp, kSecondsPerDay)];
        ++total;
        if (r.mood) ++per_mood[mood_index(*r.mood)];
    }
    std::vector<DayShares> days;
    for (const auto& [day, entry] : counts) {
        const auto& [per_mood, total] = entry;
        DayShares d;
        d.day = day;
        d.date = civil_date(day);
        d.weekday = weekday_of(day);
        d.total_streams = total;
        d.mood_streams = std::accumulate(per_mood.begin(), per_mood.end(), std::size_t{0});
        d.empty = d.mood_streams == 0;
        if (!d.empty) {
            for (std::size_t m = 0; m < kMoodCount; ++m) {
                d.shares[m] = static_cast<double>(per_mood[m]) / static_cast<double>(d.mood_streams);
            }
        }
        days.push_back(d);
    }
    return days;
}

void save_distribution(const std::vector<DayShares>& days, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "day,mood,share\n";
    for (const auto& d : days) {
        if (d.empty) {
            out << d.date << ",,\n";
            continue;
        }
        for (Mood m : kAllMoods) out << d.date << ',' << mood_name(m) << ',' << text::format_fixed(d.shares[mood_index(m)], 6) << '\n';
    }
    write_file_atomically(path, out.str());
}

UsageShapeCheck check_usage_shape(const std::vector<DayShares>& days) {
    UsageShapeCheck check;
    const auto motivation = mood_index(Mood::Motivation);
    const auto share = [](const DayShares& d, Mood m) { return d.shares[mood_index(m)]; };
    const auto mean_over = [&](Mood m, auto&& pick) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& d : days) {
            if (d.empty || !pick(d.weekday)) continue;
            sum += share(d, m);
            ++n;
        }
        return n == 0 ? std::optional<double>() : std::optional<double>(sum / static_cast<double>(n));
    };

    std::size_t non_empty = 0;
    check.motivation_top_every_day = true;
    for (const auto& d : days) {
        if (d.empty) continue;
        ++non_empty;
        for (std::size_t m = 0; m < kMoodCount; ++m) {
            if (m != motivation && !(d.shares[motivation] > d.shares[m])) check.motivation_top_every_day = false;
        }
    }
    if (non_empty == 0) check.motivation_top_every_day = false;

    const auto party_weekend = mean_over(Mood::Party, [](std::size_t w) { return w >= 4; });
    const auto party_weekday = mean_over(Mood::Party, [](std::size_t w) { return w <= 3; });
    check.party_weekend_above_weekday = party_weekend && party_weekday && *party_weekend > *party_weekday;

    const auto focus_weekday = mean_over(Mood::Focus, [](std::size_t w) { return w <= 4; });
    const auto focus_weekend = mean_over(Mood::Focus, [](std::size_t w) { return w >= 5; });
    check.focus_weekday_above_weekend = focus_weekday && focus_weekend && *focus_weekday > *focus_weekend;

    // Each Sunday against the mean of its own Monday-to-Sunday week.
    bool any_sunday = false;
    check.chill_sunday_at_least_weekly_mean = true;
    for (const auto& sunday : days) {
        if (sunday.empty || sunday.weekday != 6) continue;
        any_sunday = true;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& d : days) {
            if (!d.empty && d.day <= sunday.day && d.day > sunday.day - 7) {
                sum += share(d, Mood::Chill);
                ++n;
            }
        }
        if (share(sunday, Mood::Chill) < sum / static_cast<double>(n)) check.chill_sunday_at_least_weekly_mean = false;
    }
    if (!any_sunday) check.chill_sunday_at_least_weekly_mean = false;
    return check;
}

}  // namespace flowmoods
