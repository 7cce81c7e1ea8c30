#include "flowmoods/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/text_util.hpp"

namespace flowmoods {

using nlohmann::json;

namespace {

std::string at_line(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

std::string line_suffix(std::size_t line) {
    return line == 0 ? std::string() : " (line " + std::to_string(line) + ")";
}

template <class T>
const T* lookup(const std::vector<T>& items, const std::unordered_map<std::string, std::size_t>& index,
                const std::string& id) {
    const auto it = index.find(id);
    return it == index.end() ? nullptr : &items[it->second];
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string() + ": file missing or unreadable");
    return in;
}

bool is_header(std::string_view line, std::string_view first_column) {
    return text::trim(text::split(line, ',').front()) == first_column;
}

}  // namespace

const Artist* Catalog::find_artist(const std::string& id) const { return lookup(artists_, artist_index_, id); }
const Song* Catalog::find_song(const std::string& id) const { return lookup(songs_, song_index_, id); }
const User* Catalog::find_user(const std::string& id) const { return lookup(users_, user_index_, id); }

const Artist& Catalog::artist(const std::string& id) const {
    if (const auto* a = find_artist(id)) return *a;
    throw Error(ErrorCode::not_found, "unknown artist_id '" + id + "'");
}

const Song& Catalog::song(const std::string& id) const {
    if (const auto* s = find_song(id)) return *s;
    throw Error(ErrorCode::not_found, "unknown song_id '" + id + "'");
}

const User& Catalog::user(const std::string& id) const {
    if (const auto* u = find_user(id)) return *u;
    throw Error(ErrorCode::not_found, "unknown user_id '" + id + "'");
}

void CatalogBuilder::add_artist(Artist artist, std::size_t line) {
    if (artist.artist_id.empty()) throw Error(ErrorCode::parse_error, "empty artist_id" + line_suffix(line), line);
    auto [it, inserted] = catalog_.artist_index_.emplace(artist.artist_id, catalog_.artists_.size());
    if (!inserted) {
        throw Error(ErrorCode::duplicate_id, "duplicate artist_id '" + artist.artist_id + "'" + line_suffix(line), line);
    }
    catalog_.artists_.push_back(std::move(artist));
}

void CatalogBuilder::add_song(Song song, std::size_t line) {
    if (song.song_id.empty()) throw Error(ErrorCode::parse_error, "empty song_id" + line_suffix(line), line);
    if (song.audio_embedding) {
        const auto& emb = *song.audio_embedding;
        if (emb.size() != kAudioEmbeddingDim) {
            throw Error(ErrorCode::dimension_mismatch,
                        "song '" + song.song_id + "' has an audio embedding of dimension " +
                            std::to_string(emb.size()) + ", expected " + std::to_string(kAudioEmbeddingDim) +
                            line_suffix(line),
                        line);
        }
        if (!std::all_of(emb.begin(), emb.end(), [](double v) { return std::isfinite(v); })) {
            throw Error(ErrorCode::parse_error,
                        "song '" + song.song_id + "' has a non-finite embedding value" + line_suffix(line), line);
        }
    }
    auto [it, inserted] = catalog_.song_index_.emplace(song.song_id, catalog_.songs_.size());
    if (!inserted) {
        throw Error(ErrorCode::duplicate_id, "duplicate song_id '" + song.song_id + "'" + line_suffix(line), line);
    }
    catalog_.songs_.push_back(std::move(song));
    song_lines_.push_back(line);
}

void CatalogBuilder::add_user(User user, std::size_t line) {
    if (user.user_id.empty()) throw Error(ErrorCode::parse_error, "empty user_id" + line_suffix(line), line);
    auto [it, inserted] = catalog_.user_index_.emplace(user.user_id, catalog_.users_.size());
    if (!inserted) {
        throw Error(ErrorCode::duplicate_id, "duplicate user_id '" + user.user_id + "'" + line_suffix(line), line);
    }
    catalog_.users_.push_back(std::move(user));
    user_lines_.push_back(line);
}

Catalog CatalogBuilder::build() && {
    for (std::size_t i = 0; i < catalog_.songs_.size(); ++i) {
        const auto& s = catalog_.songs_[i];
        if (!catalog_.find_artist(s.artist_id)) {
            throw Error(ErrorCode::dangling_reference,
                        "song '" + s.song_id + "' references unknown artist_id '" + s.artist_id + "'" +
                            line_suffix(song_lines_[i]),
                        song_lines_[i]);
        }
    }
    for (std::size_t i = 0; i < catalog_.users_.size(); ++i) {
        const auto& u = catalog_.users_[i];
        for (const auto& id : u.favorite_song_ids) {
            if (!catalog_.find_song(id)) {
                throw Error(ErrorCode::dangling_reference,
                            "user '" + u.user_id + "' lists unknown favorite song '" + id + "'" +
                                line_suffix(user_lines_[i]),
                            user_lines_[i]);
            }
        }
        for (const auto& id : u.favorite_artist_ids) {
            if (!catalog_.find_artist(id)) {
                throw Error(ErrorCode::dangling_reference,
                            "user '" + u.user_id + "' lists unknown favorite artist '" + id + "'" +
                                line_suffix(user_lines_[i]),
                            user_lines_[i]);
            }
        }
    }
    return std::move(catalog_);
}

Catalog load_catalog(const std::filesystem::path& path) {
    auto in = open_input(path);
    CatalogBuilder builder;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        json record;
        try {
            record = json::parse(body);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::parse_error, at_line(path, line_no) + "malformed JSON record: " + e.what(), line_no);
        }
        try {
            const auto type = record.at("type").get<std::string>();
            if (type == "artist") {
                builder.add_artist({record.at("artist_id").get<std::string>(), record.value("name", std::string())},
                                   line_no);
            } else if (type == "song") {
                Song song{record.at("song_id").get<std::string>(), record.at("artist_id").get<std::string>(),
                          record.value("title", std::string()), std::nullopt};
                if (auto it = record.find("audio_embedding"); it != record.end() && !it->is_null()) {
                    song.audio_embedding = it->get<std::vector<double>>();
                }
                builder.add_song(std::move(song), line_no);
            } else if (type == "user") {
                User user{record.at("user_id").get<std::string>(), {}, {}};
                if (auto it = record.find("favorite_song_ids"); it != record.end()) {
                    user.favorite_song_ids = it->get<std::set<std::string>>();
                }
                if (auto it = record.find("favorite_artist_ids"); it != record.end()) {
                    user.favorite_artist_ids = it->get<std::set<std::string>>();
                }
                builder.add_user(std::move(user), line_no);
            } else {
                throw Error(ErrorCode::parse_error, at_line(path, line_no) + "unknown record type '" + type + "'",
                            line_no);
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error, at_line(path, line_no) + "invalid record: " + e.what(), line_no);
        } catch (const Error& e) {
            if (e.line() != 0 && e.code() != ErrorCode::parse_error) {
                throw Error(e.code(), path.string() + ": " + e.what(), e.line());
            }
            throw;
        }
    }
    try {
        return std::move(builder).build();
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what(), e.line());
    }
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& a : catalog.artists()) {
        out << json{{"type", "artist"}, {"artist_id", a.artist_id}, {"name", a.name}}.dump() << '\n';
    }
    for (const auto& s : catalog.songs()) {
        json record{{"type", "song"}, {"song_id", s.song_id}, {"artist_id", s.artist_id}, {"title", s.title}};
        if (s.audio_embedding) record["audio_embedding"] = *s.audio_embedding;
        out << record.dump() << '\n';
    }
    for (const auto& u : catalog.users()) {
        out << json{{"type", "user"},
                    {"user_id", u.user_id},
                    {"favorite_song_ids", u.favorite_song_ids},
                    {"favorite_artist_ids", u.favorite_artist_ids}}
                   .dump()
            << '\n';
    }
    write_file_atomically(path, out.str());
}

bool eligible_for_flow(const User& user, std::size_t threshold) noexcept {
    return user.favorite_song_ids.size() + user.favorite_artist_ids.size() >= threshold;
}

InteractionLoad load_interactions(const std::filesystem::path& path, const Catalog& catalog) {
    auto in = open_input(path);
    InteractionLoad result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        if (line_no == 1 && is_header(line, "user_id")) continue;
        const auto cols = text::split(line, ',');
        InteractionEvent ev;
        if (cols.size() != 4 || !text::parse_double(cols[2], ev.weight) || !text::parse_int64(cols[3], ev.timestamp)) {
            throw Error(ErrorCode::parse_error,
                        at_line(path, line_no) + "expected user_id,song_id,weight,timestamp", line_no);
        }
        if (ev.weight < 0.0) {
            throw Error(ErrorCode::parse_error, at_line(path, line_no) + "negative interaction weight", line_no);
        }
        ev.user_id = std::string(text::trim(cols[0]));
        ev.song_id = std::string(text::trim(cols[1]));
        if (!catalog.find_user(ev.user_id) || !catalog.find_song(ev.song_id)) {
            ++result.dropped;
            result.warnings.push_back(at_line(path, line_no) + "dropped event for unknown " +
                                      (catalog.find_user(ev.user_id) ? "song '" + ev.song_id + "'"
                                                                     : "user '" + ev.user_id + "'"));
            continue;
        }
        result.events.push_back(std::move(ev));
    }
    std::stable_sort(result.events.begin(), result.events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return result;
}

void save_interactions(std::span<const InteractionEvent> events, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "user_id,song_id,weight,timestamp\n";
    for (const auto& ev : events) {
        out << ev.user_id << ',' << ev.song_id << ',' << json(ev.weight).dump() << ',' << ev.timestamp << '\n';
    }
    write_file_atomically(path, out.str());
}

LabelLoad load_labels(const std::filesystem::path& path, const Catalog& catalog) {
    auto in = open_input(path);
    LabelLoad result;
    std::set<std::pair<std::string, Mood>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        if (line_no == 1 && is_header(line, "song_id")) continue;
        const auto cols = text::split(line, ',');
        std::int64_t flag = -1;
        if (cols.size() != 3 || !text::parse_int64(cols[2], flag) || (flag != 0 && flag != 1)) {
            throw Error(ErrorCode::parse_error, at_line(path, line_no) + "expected song_id,mood,label with label 0 or 1",
                        line_no);
        }
        const auto mood = parse_mood_name(text::trim(cols[1]));
        if (!mood) {
            throw Error(ErrorCode::parse_error,
                        at_line(path, line_no) + "unknown mood '" + std::string(text::trim(cols[1])) + "'", line_no);
        }
        MoodLabel label{std::string(text::trim(cols[0])), *mood, flag == 1};
        if (!seen.emplace(label.song_id, label.mood).second) {
            throw Error(ErrorCode::duplicate_id,
                        at_line(path, line_no) + "second label for song '" + label.song_id + "' and mood " +
                            std::string(mood_name(label.mood)),
                        line_no);
        }
        if (!catalog.find_song(label.song_id)) {
            ++result.dropped;
            result.warnings.push_back(at_line(path, line_no) + "dropped label for unknown song '" + label.song_id + "'");
            continue;
        }
        result.labels.push_back(std::move(label));
    }
    return result;
}

void save_labels(std::span<const MoodLabel> labels, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "song_id,mood,label\n";
    for (const auto& l : labels) out << l.song_id << ',' << mood_name(l.mood) << ',' << (l.positive ? 1 : 0) << '\n';
    write_file_atomically(path, out.str());
}

std::unordered_map<std::string, double> song_popularity(std::span<const InteractionEvent> events) {
    std::unordered_map<std::string, double> popularity;
    for (const auto& ev : events) popularity[ev.song_id] += ev.weight;
    return popularity;
}

}  // namespace flowmoods
