#include <algorithm>
#include <map>

#include "fixtures.hpp"
#include "flowmoods/pipeline.hpp"
#include "support.hpp"

namespace flowmoods {
namespace {

using testing::expect_error;
using testing::TempDir;

std::vector<LabeledEmbedding> tagged(std::size_t positives, std::size_t negatives) {
    std::vector<LabeledEmbedding> out;
    for (std::size_t i = 0; i < positives + negatives; ++i) {
        // Feature 0 carries a unique tag so rows can be traced through the split.
        LabeledEmbedding e{std::vector<double>(kAudioEmbeddingDim, 0.0), i < positives};
        e.embedding[0] = static_cast<double>(i);
        out.push_back(e);
    }
    return out;
}

TEST(SplitHoldout, StratifiedCeilingPerClass) {
    const auto split = split_holdout(tagged(33, 17), 0.2, 5);
    std::size_t hold_pos = 0, hold_neg = 0;
    for (const auto& e : split.holdout) (e.positive ? hold_pos : hold_neg)++;
    EXPECT_EQ(hold_pos, 7u);  // ceil(6.6)
    EXPECT_EQ(hold_neg, 4u);  // ceil(3.4)
    EXPECT_EQ(split.train.size() + split.holdout.size(), 50u);
    std::vector<double> tags;
    for (const auto* part : {&split.train, &split.holdout}) {
        for (const auto& e : *part) tags.push_back(e.embedding[0]);
    }
    std::sort(tags.begin(), tags.end());
    for (std::size_t i = 0; i < tags.size(); ++i) EXPECT_EQ(tags[i], static_cast<double>(i));
}

TEST(SplitHoldout, DeterministicAndSeedDependent) {
    const auto a = split_holdout(tagged(40, 40), 0.25, 1);
    const auto b = split_holdout(tagged(40, 40), 0.25, 1);
    const auto c = split_holdout(tagged(40, 40), 0.25, 2);
    const auto tags = [](const LabeledSplit& s) {
        std::vector<double> t;
        for (const auto& e : s.holdout) t.push_back(e.embedding[0]);
        return t;
    };
    EXPECT_EQ(tags(a), tags(b));
    EXPECT_NE(tags(a), tags(c));
}

TEST(ModelVersion, FnvReferenceValues) {
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
    EXPECT_EQ(fnv1a("bar", fnv1a("foo")), fnv1a("foobar"));
    EXPECT_EQ(format_model_version(0x85944171f73967e8ULL), "m85944171f73967e8");
    EXPECT_EQ(format_model_version(1), "m0000000000000001");
}

TEST(Manifest, RoundTripAndMissing) {
    TempDir dir;
    PipelineManifest m{"mabc", 7, {{"--trees", "50"}, {"--dim", "32"}}};
    save_manifest(m, dir / "manifest.json");
    const auto back = load_manifest(dir / "manifest.json");
    EXPECT_EQ(back.model_version, "mabc");
    EXPECT_EQ(back.seed, 7u);
    auto expected = m.overrides;
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(back.overrides, expected);
    const auto e = expect_error([&] { load_manifest(dir / "nope.json"); });
    EXPECT_EQ(e.code(), ErrorCode::missing_artifact);
    EXPECT_NE(std::string(e.what()).find("ingest"), std::string::npos);
}

class PipelineWorld : public ::testing::Test {
protected:
    static void SetUpTestSuite() { world_ = new fixtures::SmallStack(fixtures::small_stack(4, "m-pipe")); }
    static void TearDownTestSuite() {
        delete world_;
        world_ = nullptr;
    }
    static fixtures::SmallStack* world_;
};

fixtures::SmallStack* PipelineWorld::world_ = nullptr;

TEST_F(PipelineWorld, VersionStampedEverywhere) {
    const auto& st = world_->stack;
    EXPECT_EQ(st.model_version, "m-pipe");
    EXPECT_EQ(st.space->model_version(), "m-pipe");
    EXPECT_EQ(st.forests->model_version, "m-pipe");
    EXPECT_EQ(st.scores->model_version(), "m-pipe");
    EXPECT_EQ(st.index->model_version(), "m-pipe");
    EXPECT_EQ(st.fallback->model_version, "m-pipe");
    for (Mood m : kAllMoods) {
        EXPECT_FALSE(st.fallback->pool(m).empty()) << mood_name(m);
        for (const auto& id : st.fallback->pool(m)) EXPECT_GE(*st.scores->score(id, m), 0.5);
    }
    EXPECT_FALSE(st.fallback->regular.empty());
    EXPECT_EQ(st.index->size(), st.space->songs().size());
}

TEST_F(PipelineWorld, SaveLoadRoundTrip) {
    TempDir dir;
    const auto& w = world_->world;
    save_stack(world_->stack, w.interactions, w.labels, dir.path());
    const auto back = load_stack(dir.path());
    EXPECT_EQ(back.model_version, "m-pipe");
    EXPECT_TRUE(*back.space == *world_->stack.space);
    EXPECT_TRUE(*back.index == *world_->stack.index);
    EXPECT_TRUE(*back.fallback == *world_->stack.fallback);
    EXPECT_EQ(back.catalog->songs().size(), world_->stack.catalog->songs().size());
    for (Mood m : kAllMoods) EXPECT_TRUE(back.forests->at(m) == world_->stack.forests->at(m));
}

TEST_F(PipelineWorld, MissingArtifactNamesProducer) {
    const std::map<std::string, std::string> producers{
        {artifact::catalog, "ingest"},           {artifact::manifest, "ingest"},
        {artifact::embeddings, "train-embeddings"}, {artifact::forests, "train-moods"},
        {artifact::scores, "score-catalog"},     {artifact::index, "build-index"},
        {artifact::fallback, "build-fallback"},
    };
    const auto& w = world_->world;
    for (const auto& [file, producer] : producers) {
        TempDir dir;
        save_stack(world_->stack, w.interactions, w.labels, dir.path());
        std::filesystem::remove(dir / file);
        const auto e = expect_error([&] { load_stack(dir.path()); });
        EXPECT_EQ(e.code(), ErrorCode::missing_artifact) << file;
        EXPECT_NE(std::string(e.what()).find(file), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find(producer), std::string::npos) << e.what();
    }
}

TEST_F(PipelineWorld, MismatchedStampsNameBoth) {
    TempDir dir;
    const auto& w = world_->world;
    save_stack(world_->stack, w.interactions, w.labels, dir.path());
    auto index = load_index(dir / artifact::index);
    index.set_model_version("m-stale");
    save_index(index, dir / artifact::index);
    const auto e = expect_error([&] { load_stack(dir.path()); });
    EXPECT_EQ(e.code(), ErrorCode::inconsistent_snapshot);
    EXPECT_NE(std::string(e.what()).find("m-stale"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("m-pipe"), std::string::npos);
}

TEST_F(PipelineWorld, HoldoutMetricsReproduce) {
    const auto& w = world_->world;
    const auto trained = train_mood_forests(w.catalog, w.labels, world_->config, "m-pipe");
    const auto again = evaluate_mood_forests(trained.forests, w.catalog, w.labels, world_->config);
    for (Mood m : kAllMoods) {
        ASSERT_TRUE(trained.holdout[mood_index(m)]);
        ASSERT_TRUE(again[mood_index(m)]);
        EXPECT_EQ(trained.holdout[mood_index(m)]->auc, again[mood_index(m)]->auc);
        EXPECT_GE(trained.holdout[mood_index(m)]->auc, 0.9) << mood_name(m);
        EXPECT_TRUE(trained.forests.at(m) == world_->stack.forests->at(m));
    }
}

TEST_F(PipelineWorld, MoodsWithoutLabelsAreLeftOut) {
    const auto& w = world_->world;
    std::vector<MoodLabel> labels;
    for (const auto& l : w.labels) {
        if (l.mood != Mood::Focus) labels.push_back(l);
    }
    const auto trained = train_mood_forests(w.catalog, labels, world_->config, "m");
    EXPECT_FALSE(trained.forests.forests[mood_index(Mood::Focus)]);
    EXPECT_FALSE(trained.holdout[mood_index(Mood::Focus)]);
    EXPECT_TRUE(trained.forests.forests[mood_index(Mood::Party)]);
}

}  // namespace
}  // namespace flowmoods
