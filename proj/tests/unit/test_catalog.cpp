#include <algorithm>

#include "flowmoods/catalog.hpp"
#include "flowmoods/mood.hpp"
#include "support.hpp"

namespace flowmoods {
namespace {

using testing::embedding_json;
using testing::expect_error;
using testing::TempDir;
using testing::write_text;

std::string small_catalog() {
    std::string s;
    s += R"({"type":"artist","artist_id":"a1","name":"One"})" "\n";
    s += R"({"type":"artist","artist_id":"a2","name":"Two"})" "\n";
    for (int i = 1; i <= 3; ++i) {
        s += R"({"type":"song","song_id":"s)" + std::to_string(i) + R"(","artist_id":"a)" +
             std::to_string(i == 3 ? 2 : 1) + R"(","title":"t","audio_embedding":)" + embedding_json(256) + "}\n";
    }
    s += R"({"type":"user","user_id":"u1","favorite_song_ids":["s1","s2"],"favorite_artist_ids":["a2"]})" "\n";
    return s;
}

User user_with(std::size_t songs, std::size_t artists) {
    User u{"u", {}, {}};
    for (std::size_t i = 0; i < songs; ++i) u.favorite_song_ids.insert("s" + std::to_string(i));
    for (std::size_t i = 0; i < artists; ++i) u.favorite_artist_ids.insert("a" + std::to_string(i));
    return u;
}

TEST(Mood, ExactlySixWithProductDescriptions) {
    ASSERT_EQ(kAllMoods.size(), 6u);
    EXPECT_EQ(mood_description(Mood::Chill),
              "Time to kick back? Relax with your favorite artists that help you unwind and let go.");
    EXPECT_EQ(mood_description(Mood::Focus),
              "No distractions, please! Let us help you stay in your zone with the right kind of music to help you "
              "achieve your goal.");
    EXPECT_EQ(mood_description(Mood::Melancholy),
              "We all get the blues now and then. If you are in the mood for a good cry or want to wallow in sorrow "
              "\u2013 let it all out here.");
    EXPECT_EQ(mood_description(Mood::Motivation),
              "Need a little nudge? Make workouts a joyful experience with a power mix to keep you moving.");
    EXPECT_EQ(mood_description(Mood::Party),
              "Whether it\u2019s a party of one or party of more, get in the spirit with an endless mix of "
              "crowd-pleasing music to get you dancing.");
    EXPECT_EQ(mood_description(Mood::YouAndMe),
              "Feeling a little frisky? Let us set the mood for romance with feel-good tracks that you and your "
              "partner will love.");
    EXPECT_EQ(mood_display_name(Mood::YouAndMe), "You & Me");
    for (Mood m : kAllMoods) {
        EXPECT_EQ(parse_mood_name(mood_name(m)), m);
        EXPECT_EQ(parse_mood_id(mood_id(m)), m);
    }
    EXPECT_FALSE(parse_mood_name("Sleep"));
}

TEST(LoadCatalog, CountsEntities) {
    TempDir dir;
    write_text(dir / "c.jsonl", small_catalog());
    const auto c = load_catalog(dir / "c.jsonl");
    EXPECT_EQ(c.songs().size(), 3u);
    EXPECT_EQ(c.artists().size(), 2u);
    EXPECT_EQ(c.users().size(), 1u);
    EXPECT_EQ(c.song("s3").artist_id, "a2");
}

TEST(LoadCatalog, ShortEmbeddingNamesSong) {
    TempDir dir;
    write_text(dir / "c.jsonl", R"({"type":"artist","artist_id":"a1"})" "\n"
                                R"({"type":"song","song_id":"bad-song","artist_id":"a1","audio_embedding":)" +
                                    embedding_json(255) + "}\n");
    const auto e = expect_error([&] { load_catalog(dir / "c.jsonl"); });
    EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    EXPECT_NE(std::string(e.what()).find("bad-song"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("255"), std::string::npos);
}

TEST(LoadCatalog, DuplicateSongReportsSecondLine) {
    TempDir dir;
    write_text(dir / "c.jsonl", R"({"type":"artist","artist_id":"a1"})" "\n"
                                R"({"type":"song","song_id":"s1","artist_id":"a1"})" "\n"
                                "\n"
                                R"({"type":"song","song_id":"s1","artist_id":"a1"})" "\n");
    const auto e = expect_error([&] { load_catalog(dir / "c.jsonl"); });
    EXPECT_EQ(e.code(), ErrorCode::duplicate_id);
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
}

TEST(LoadCatalog, DanglingArtist) {
    TempDir dir;
    write_text(dir / "c.jsonl", R"({"type":"song","song_id":"s1","artist_id":"ghost"})" "\n");
    EXPECT_EQ(expect_error([&] { load_catalog(dir / "c.jsonl"); }).code(), ErrorCode::dangling_reference);
}

TEST(LoadCatalog, DanglingFavorite) {
    TempDir dir;
    write_text(dir / "c.jsonl", R"({"type":"artist","artist_id":"a1"})" "\n"
                                R"({"type":"user","user_id":"u1","favorite_song_ids":["nope"]})" "\n");
    EXPECT_EQ(expect_error([&] { load_catalog(dir / "c.jsonl"); }).code(), ErrorCode::dangling_reference);
}

TEST(LoadCatalog, MissingFileAndMalformedRecord) {
    TempDir dir;
    EXPECT_EQ(expect_error([&] { load_catalog(dir / "absent.jsonl"); }).code(), ErrorCode::io_error);
    write_text(dir / "c.jsonl", R"({"type":"artist","artist_id":"a1"})" "\n{not json\n");
    const auto e = expect_error([&] { load_catalog(dir / "c.jsonl"); });
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_EQ(e.line(), 2u);
}

TEST(LoadCatalog, RoundTrip) {
    TempDir dir;
    write_text(dir / "c.jsonl", small_catalog());
    const auto c = load_catalog(dir / "c.jsonl");
    save_catalog(c, dir / "d.jsonl");
    const auto d = load_catalog(dir / "d.jsonl");
    ASSERT_EQ(d.songs().size(), c.songs().size());
    for (std::size_t i = 0; i < c.songs().size(); ++i) {
        EXPECT_EQ(c.songs()[i].song_id, d.songs()[i].song_id);
        EXPECT_EQ(c.songs()[i].audio_embedding, d.songs()[i].audio_embedding);
    }
    EXPECT_EQ(d.user("u1").favorite_artist_ids, c.user("u1").favorite_artist_ids);
}

TEST(Eligibility, Examples) {
    EXPECT_TRUE(eligible_for_flow(user_with(16, 0)));
    EXPECT_TRUE(eligible_for_flow(user_with(10, 6)));
    EXPECT_FALSE(eligible_for_flow(user_with(0, 0)));
    EXPECT_FALSE(eligible_for_flow(user_with(10, 5)));
}

TEST(Eligibility, MonotoneUnderAddedFavorites) {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 500; ++trial) {
        auto u = user_with(gen() % 20, gen() % 20);
        const bool before = eligible_for_flow(u);
        if (gen() % 2) {
            u.favorite_song_ids.insert("extra-song");
        } else {
            u.favorite_artist_ids.insert("extra-artist");
        }
        if (before) EXPECT_TRUE(eligible_for_flow(u));
    }
}

class InteractionsTest : public ::testing::Test {
protected:
    void SetUp() override {
        write_text(dir / "c.jsonl", small_catalog());
        catalog = load_catalog(dir / "c.jsonl");
    }
    TempDir dir;
    Catalog catalog;
};

TEST_F(InteractionsTest, FiveValidRows) {
    write_text(dir / "i.csv", "user_id,song_id,weight,timestamp\nu1,s1,1,10\nu1,s2,2,11\nu1,s3,1,12\nu1,s1,4,13\nu1,s2,0,14\n");
    const auto r = load_interactions(dir / "i.csv", catalog);
    EXPECT_EQ(r.events.size(), 5u);
    EXPECT_EQ(r.warnings.size(), 0u);
}

TEST_F(InteractionsTest, UnknownSongDroppedWithWarning) {
    write_text(dir / "i.csv", "u1,s1,1,10\nu1,s2,2,11\nu1,zz,1,12\nu1,s1,4,13\nu1,s2,1,14\n");
    const auto r = load_interactions(dir / "i.csv", catalog);
    EXPECT_EQ(r.events.size(), 4u);
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_EQ(r.dropped, 1u);
}

TEST_F(InteractionsTest, SortedPermutationOfValidRows) {
    std::mt19937 gen(11);
    std::vector<InteractionEvent> valid;
    std::string csv;
    const char* songs[] = {"s1", "s2", "s3", "unknown"};
    for (int i = 0; i < 200; ++i) {
        const std::string song = songs[gen() % 4];
        const auto ts = static_cast<std::int64_t>(gen() % 50);
        const double w = static_cast<double>(gen() % 5);
        csv += "u1," + song + "," + std::to_string(w) + "," + std::to_string(ts) + "\n";
        if (song != "unknown") valid.push_back({"u1", song, w, ts});
    }
    write_text(dir / "i.csv", csv);
    const auto r = load_interactions(dir / "i.csv", catalog);
    ASSERT_EQ(r.events.size(), valid.size());
    EXPECT_TRUE(std::is_sorted(r.events.begin(), r.events.end(),
                               [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
    const auto key = [](const InteractionEvent& e) { return std::make_tuple(e.timestamp, e.song_id, e.weight); };
    std::vector<std::tuple<std::int64_t, std::string, double>> got, want;
    for (const auto& e : r.events) got.push_back(key(e));
    for (const auto& e : valid) want.push_back(key(e));
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
}

TEST_F(InteractionsTest, RejectsBadRows) {
    write_text(dir / "i.csv", "u1,s1,1,10\nu1,s1,abc,11\n");
    auto e = expect_error([&] { load_interactions(dir / "i.csv", catalog); });
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_EQ(e.line(), 2u);
    write_text(dir / "i.csv", "u1,s1,-1,10\n");
    EXPECT_EQ(expect_error([&] { load_interactions(dir / "i.csv", catalog); }).code(), ErrorCode::parse_error);
}

TEST_F(InteractionsTest, LabelsRejectDuplicatePair) {
    write_text(dir / "l.csv", "song_id,mood,label\ns1,Party,1\ns2,Party,0\ns1,Party,0\n");
    const auto e = expect_error([&] { load_labels(dir / "l.csv", catalog); });
    EXPECT_EQ(e.code(), ErrorCode::duplicate_id);
    EXPECT_EQ(e.line(), 4u);
}

TEST_F(InteractionsTest, LabelsParseAndRoundTrip) {
    write_text(dir / "l.csv", "s1,Party,1\ns1,YouAndMe,0\nghost,Chill,1\n");
    const auto r = load_labels(dir / "l.csv", catalog);
    ASSERT_EQ(r.labels.size(), 2u);
    EXPECT_EQ(r.dropped, 1u);
    EXPECT_EQ(r.labels[1].mood, Mood::YouAndMe);
    EXPECT_FALSE(r.labels[1].positive);
    save_labels(r.labels, dir / "m.csv");
    const auto again = load_labels(dir / "m.csv", catalog);
    ASSERT_EQ(again.labels.size(), 2u);
    EXPECT_EQ(again.labels[0].song_id, "s1");
    write_text(dir / "bad.csv", "s1,party,1\n");
    EXPECT_EQ(expect_error([&] { load_labels(dir / "bad.csv", catalog); }).code(), ErrorCode::parse_error);
}

}  // namespace
}  // namespace flowmoods
