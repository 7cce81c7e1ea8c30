#include <algorithm>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "flowmoods/mood_classifier.hpp"
#include "support.hpp"

namespace flowmoods {
namespace {

using testing::expect_error;
using testing::TempDir;

// Positives have feature 0 in (1, 3], negatives in [-3, -1); the other
// features are N(0, 1) noise.
std::vector<LabeledEmbedding> separable(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledEmbedding> out;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledEmbedding e;
        e.positive = i % 2 == 0;
        e.embedding.resize(kAudioEmbeddingDim);
        for (auto& x : e.embedding) x = rng.normal();
        e.embedding[0] = e.positive ? rng.uniform(1.0001, 3.0) : rng.uniform(-3.0, -1.0001);
        out.push_back(std::move(e));
    }
    return out;
}

double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -1.0;
};

// Exhaustive search over every feature and every midpoint threshold.
Split best_gini_split(const std::vector<LabeledEmbedding>& data) {
    const std::size_t n = data.size();
    std::size_t total_pos = 0;
    for (const auto& e : data) total_pos += e.positive;
    const double parent = gini(total_pos, n);
    Split best;
    for (std::size_t f = 0; f < kAudioEmbeddingDim; ++f) {
        std::vector<double> values;
        for (const auto& e : data) values.push_back(e.embedding[f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double t = 0.5 * (values[i] + values[i + 1]);
            std::size_t nl = 0, pl = 0;
            for (const auto& e : data) {
                if (e.embedding[f] <= t) {
                    ++nl;
                    pl += e.positive;
                }
            }
            const std::size_t nr = n - nl, pr = total_pos - pl;
            const double child = (static_cast<double>(nl) * gini(pl, nl) + static_cast<double>(nr) * gini(pr, nr)) /
                                 static_cast<double>(n);
            const double gain = parent - child;
            if (gain > best.gain) best = {static_cast<int>(f), t, gain};
        }
    }
    return best;
}

double accuracy(const RandomForest& forest, const std::vector<LabeledEmbedding>& data) {
    std::size_t correct = 0;
    for (const auto& e : data) correct += (score(forest, e.embedding) >= 0.5) == e.positive;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TEST(TrainForest, SeparableTrainingAccuracyIsOne) {
    const auto data = separable(200, 1);
    const auto forest = train_forest(data, Mood::Party, {}, 7);
    EXPECT_DOUBLE_EQ(accuracy(forest, data), 1.0);
    EXPECT_EQ(forest.n_trees(), 100u);
    EXPECT_EQ(forest.summary.n_positive, 100u);
    EXPECT_EQ(forest.summary.n_negative, 100u);
    ASSERT_TRUE(forest.summary.oob_estimate);
    EXPECT_GE(*forest.summary.oob_estimate, 0.0);
    EXPECT_LE(*forest.summary.oob_estimate, 1.0);
}

TEST(TrainForest, SingleClassRejected) {
    auto data = separable(20, 2);
    for (auto& e : data) e.positive = true;
    EXPECT_EQ(expect_error([&] { train_forest(data, Mood::Chill, {}, 1); }).code(), ErrorCode::single_class);
}

TEST(TrainForest, InconsistentDimensionRejected) {
    auto data = separable(20, 2);
    data[5].embedding.pop_back();
    EXPECT_EQ(expect_error([&] { train_forest(data, Mood::Chill, {}, 1); }).code(), ErrorCode::dimension_mismatch);
}

TEST(TrainForest, StumpMatchesExhaustiveGiniSearch) {
    const auto data = separable(200, 3);
    ForestConfig config;
    config.n_trees = 1;
    config.max_depth = 1;
    config.feature_subsample = kAudioEmbeddingDim;
    config.bootstrap = false;
    const auto forest = train_forest(data, Mood::Focus, config, 11);
    ASSERT_EQ(forest.trees.size(), 1u);
    const auto& root = forest.trees[0].nodes[0];
    const auto oracle = best_gini_split(data);
    EXPECT_EQ(oracle.feature, 0);
    EXPECT_EQ(root.feature, oracle.feature);
    EXPECT_NEAR(root.threshold, oracle.threshold, 1e-12);
    EXPECT_GT(root.threshold, -1.0);
    EXPECT_LT(root.threshold, 1.0);
    EXPECT_EQ(forest.trees[0].depth(), 1u);
}

TEST(TrainForest, BootstrapStumpStillSplitsFeatureZero) {
    const auto data = separable(200, 4);
    ForestConfig config;
    config.n_trees = 1;
    config.max_depth = 1;
    config.feature_subsample = kAudioEmbeddingDim;
    const auto forest = train_forest(data, Mood::Focus, config, 12);
    const auto& root = forest.trees[0].nodes[0];
    EXPECT_EQ(root.feature, 0);
    EXPECT_GT(root.threshold, -1.0);
    EXPECT_LT(root.threshold, 1.0);
}

TEST(TrainForest, FreshPositivesScoreHigh) {
    const auto forest = train_forest(separable(200, 5), Mood::Party, {}, 3);
    auto fresh = separable(200, 99);
    std::size_t n = 0;
    double worst = 1.0;
    for (const auto& e : fresh) {
        if (!e.positive) continue;
        ++n;
        worst = std::min(worst, score(forest, e.embedding));
    }
    EXPECT_EQ(n, 100u);
    EXPECT_GT(worst, 0.9);
}

TEST(TrainForest, DeterministicAndOrderSensitiveOnlyThroughInput) {
    auto data = separable(120, 6);
    ForestConfig config;
    config.n_trees = 10;
    const auto a = train_forest(data, Mood::Chill, config, 21);
    const auto b = train_forest(data, Mood::Chill, config, 21);
    EXPECT_TRUE(a == b);
    std::reverse(data.begin(), data.end());
    const auto c = train_forest(data, Mood::Chill, config, 21);
    std::reverse(data.begin(), data.end());
    const auto d = train_forest(data, Mood::Chill, config, 21);
    EXPECT_TRUE(a == d);
    (void)c;
}

TEST(TrainForest, TreeStructureInvariants) {
    const auto forest = train_forest(separable(200, 7), Mood::Chill, {}, 5);
    for (const auto& tree : forest.trees) {
        EXPECT_LE(tree.depth(), forest.config.max_depth);
        for (const auto& node : tree.nodes) {
            EXPECT_GE(node.positive_fraction, 0.0);
            EXPECT_LE(node.positive_fraction, 1.0);
            if (node.is_leaf()) continue;
            EXPECT_LT(node.feature, static_cast<int>(kAudioEmbeddingDim));
            ASSERT_GE(node.left, 0);
            ASSERT_GE(node.right, 0);
            EXPECT_LT(static_cast<std::size_t>(node.left), tree.nodes.size());
            EXPECT_LT(static_cast<std::size_t>(node.right), tree.nodes.size());
        }
    }
}

RandomForest handmade(std::vector<double> leaf_fractions) {
    RandomForest f;
    f.n_features = kAudioEmbeddingDim;
    for (double v : leaf_fractions) {
        DecisionTree t;
        t.nodes.push_back({0, 0.0, 1, 2, 0.5, 2});
        t.nodes.push_back({-1, 0.0, -1, -1, v, 1});
        t.nodes.push_back({-1, 0.0, -1, -1, v, 1});
        t.max_depth = 1;
        f.trees.push_back(t);
    }
    return f;
}

TEST(Score, MeanOfLeafFractions) {
    const std::vector<double> x(kAudioEmbeddingDim, 0.3);
    EXPECT_DOUBLE_EQ(score(handmade({1.0, 1.0, 1.0}), x), 1.0);
    EXPECT_DOUBLE_EQ(score(handmade({1.0, 0.0}), x), 0.5);
    const std::vector<double> short_x(10, 0.0);
    EXPECT_EQ(expect_error([&] { score(handmade({1.0}), short_x); }).code(), ErrorCode::dimension_mismatch);
}

TEST(Score, FuzzedInputsStayInRangeAndWithinTreeBounds) {
    const auto forest = train_forest(separable(200, 8), Mood::Party, {}, 9);
    Rng rng(1234);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> x(kAudioEmbeddingDim);
        const double scale = std::pow(10.0, rng.uniform(-3.0, 6.0));
        for (auto& v : x) v = scale * rng.normal();
        const double s = score(forest, x);
        ASSERT_GE(s, 0.0);
        ASSERT_LE(s, 1.0);
        if (i % 100 == 0) {
            double lo = 1.0, hi = 0.0;
            for (const auto& t : forest.trees) {
                lo = std::min(lo, t.predict(x));
                hi = std::max(hi, t.predict(x));
            }
            EXPECT_LE(lo, s + 1e-12);
            EXPECT_GE(hi, s - 1e-12);
        }
    }
}

TEST(Evaluate, PerfectAndConstantScores) {
    const std::vector<double> perfect{1.0, 1.0, 0.0, 0.0, 1.0};
    const bool labels_raw[] = {true, true, false, false, true};
    const std::span<const bool> labels(labels_raw);
    auto m = evaluate_scores(perfect, labels);
    EXPECT_DOUBLE_EQ(m.auc, 1.0);
    EXPECT_DOUBLE_EQ(m.accuracy_at_half, 1.0);
    const std::vector<double> flat(5, 0.5);
    m = evaluate_scores(flat, labels);
    EXPECT_DOUBLE_EQ(m.auc, 0.5);
    EXPECT_EQ(m.true_positive + m.false_positive + m.true_negative + m.false_negative, 5u);
    const bool one_class[] = {true, true, true, true, true};
    EXPECT_EQ(expect_error([&] { evaluate_scores(flat, std::span<const bool>(one_class)); }).code(),
              ErrorCode::single_class);
}

TEST(Evaluate, AucMatchesPairCounting) {
    Rng rng(5);
    std::vector<double> scores;
    std::vector<char> labels;
    for (int i = 0; i < 300; ++i) {
        labels.push_back(rng.bernoulli(0.4));
        // Coarse values so ties occur.
        scores.push_back(std::round(rng.uniform() * 10.0) / 10.0 + (labels.back() ? 0.1 : 0.0));
    }
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (!labels[i] || labels[j]) continue;
            pairs += 1.0;
            wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
        }
    }
    std::unique_ptr<bool[]> flags(new bool[labels.size()]);
    for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i];
    const auto m = evaluate_scores(scores, std::span<const bool>(flags.get(), labels.size()));
    EXPECT_NEAR(m.auc, wins / pairs, 1e-12);
}

TEST(Evaluate, SeparableHoldout) {
    const auto forest = train_forest(separable(200, 10), Mood::Party, {}, 4);
    const auto holdout = separable(100, 11);
    EXPECT_GE(evaluate(forest, holdout).auc, 0.95);
}

Catalog embedded_catalog(std::size_t n, std::size_t without_embedding, std::uint64_t seed) {
    Rng rng(seed);
    CatalogBuilder b;
    b.add_artist({"a", "A"});
    for (std::size_t i = 0; i < n; ++i) {
        Song s{fixtures::id('s', i), "a", "t", std::nullopt};
        if (i >= without_embedding) {
            s.audio_embedding = std::vector<double>(kAudioEmbeddingDim);
            for (auto& x : *s.audio_embedding) x = rng.normal();
        }
        b.add_song(std::move(s));
    }
    return std::move(b).build();
}

MoodForests six_forests(std::uint64_t seed) {
    MoodForests forests;
    forests.model_version = "m1";
    ForestConfig config;
    config.n_trees = 8;
    for (Mood m : kAllMoods) {
        forests.forests[mood_index(m)] = train_forest(separable(80, seed + mood_index(m)), m, config, seed);
    }
    return forests;
}

TEST(ScoreCatalog, CountsSkipsAndMatchesPointwise) {
    const auto forests = six_forests(30);
    const auto full = score_catalog(forests, embedded_catalog(10, 0, 1));
    EXPECT_EQ(full.table.size(), 60u);
    const auto catalog = embedded_catalog(10, 2, 2);
    const auto partial = score_catalog(forests, catalog);
    EXPECT_EQ(partial.table.size(), 48u);
    EXPECT_EQ(partial.skipped, (std::vector<std::string>{"s0", "s1"}));
    EXPECT_EQ(partial.table.model_version(), "m1");
    for (const auto& song : catalog.songs()) {
        for (Mood m : kAllMoods) {
            const auto got = partial.table.score(song.song_id, m);
            if (!song.audio_embedding) {
                EXPECT_FALSE(got);
                continue;
            }
            ASSERT_TRUE(got);
            EXPECT_EQ(*got, score(forests.at(m), *song.audio_embedding));
        }
    }
}

TEST(ScoreCatalog, MissingForestNamesTrainMoods) {
    auto forests = six_forests(31);
    forests.forests[mood_index(Mood::Melancholy)].reset();
    const auto e = expect_error([&] { score_catalog(forests, embedded_catalog(3, 0, 3)); });
    EXPECT_EQ(e.code(), ErrorCode::missing_artifact);
    EXPECT_NE(std::string(e.what()).find("Melancholy"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("train-moods"), std::string::npos);
}

// Mood signal spread over a 64-feature block, as audio anchors are.
std::vector<LabeledEmbedding> block_signal(std::size_t block, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledEmbedding> out;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledEmbedding e;
        e.positive = i % 2 == 0;
        e.embedding.resize(kAudioEmbeddingDim);
        for (auto& x : e.embedding) x = rng.normal();
        for (std::size_t f = 64 * block; f < 64 * (block + 1); ++f) e.embedding[f] += e.positive ? 2.0 : -2.0;
        out.push_back(std::move(e));
    }
    return out;
}

TEST(ScoreCatalog, SongMayScoreHighForSeveralMoods) {
    // Nothing normalizes across moods, so a song carrying both signals scores
    // high for both.
    MoodForests forests;
    for (Mood m : kAllMoods) forests.forests[mood_index(m)] = train_forest(block_signal(2, 200, 40), m, {}, 1);
    forests.forests[mood_index(Mood::Chill)] = train_forest(block_signal(0, 200, 41), Mood::Chill, {}, 2);
    forests.forests[mood_index(Mood::Party)] = train_forest(block_signal(1, 200, 42), Mood::Party, {}, 3);
    Rng rng(43);
    std::vector<double> song(kAudioEmbeddingDim);
    for (auto& x : song) x = rng.normal();
    for (std::size_t f = 0; f < 128; ++f) song[f] += 2.0;
    for (std::size_t f = 128; f < 192; ++f) song[f] -= 2.0;
    CatalogBuilder b;
    b.add_artist({"a", "A"});
    b.add_song({"both", "a", "t", song});
    const auto table = score_catalog(forests, std::move(b).build()).table;
    EXPECT_GT(*table.score("both", Mood::Chill), 0.8);
    EXPECT_GT(*table.score("both", Mood::Party), 0.8);
    EXPECT_LT(*table.score("both", Mood::Focus), 0.2);
}

TEST(ScoreTable, RejectsOutOfRange) {
    MoodScoreTable t("v");
    EXPECT_EQ(expect_error([&] { t.set("s", Mood::Chill, 1.5); }).code(), ErrorCode::invalid_argument);
    EXPECT_EQ(expect_error([&] { t.set("s", Mood::Chill, std::nan("")); }).code(), ErrorCode::invalid_argument);
    t.set("s", Mood::Chill, 0.25);
    EXPECT_EQ(t.size(), 1u);
    EXPECT_FALSE(t.score("s", Mood::Party));
}

TEST(Snapshots, ForestsAndScoresRoundTrip) {
    TempDir dir;
    const auto forests = six_forests(50);
    save_forests(forests, dir / "f.snap");
    const auto loaded = load_forests(dir / "f.snap");
    EXPECT_EQ(loaded.model_version, "m1");
    for (Mood m : kAllMoods) EXPECT_TRUE(loaded.at(m) == forests.at(m));

    const auto table = score_catalog(forests, embedded_catalog(20, 0, 5)).table;
    save_scores(table, dir / "s.csv");
    const auto text = testing::read_text(dir / "s.csv");
    EXPECT_EQ(text.rfind("# model_version=m1\nsong_id,mood,score\n", 0), 0u);
    const auto back = load_scores(dir / "s.csv");
    EXPECT_EQ(back.model_version(), "m1");
    EXPECT_EQ(back.size(), table.size());
    for (const auto& id : table.song_ids()) {
        for (Mood m : kAllMoods) EXPECT_EQ(*back.score(id, m), *table.score(id, m));
    }
}

TEST(Snapshots, ForestCorruptionDetected) {
    TempDir dir;
    save_forests(six_forests(60), dir / "f.snap");
    const auto bytes = testing::read_text(dir / "f.snap");
    testing::write_text(dir / "t.snap", bytes.substr(0, bytes.size() / 3));
    EXPECT_EQ(expect_error([&] { load_forests(dir / "t.snap"); }).code(), ErrorCode::corrupt_file);
    auto wrong = bytes;
    wrong[8] = 9;
    testing::write_text(dir / "v.snap", wrong);
    EXPECT_EQ(expect_error([&] { load_forests(dir / "v.snap"); }).code(), ErrorCode::version_mismatch);
}

TEST(SeparableWorld, SixMoodsReachHighAuc) {
    auto config = fixtures::small_world_config(8);
    config.n_songs = 1500;
    const auto world = generate_world(config);
    for (Mood m : kAllMoods) {
        const auto examples = labeled_examples(world.catalog, world.labels, m);
        std::vector<LabeledEmbedding> train, holdout;
        for (std::size_t i = 0; i < examples.size(); ++i) (i % 5 == 0 ? holdout : train).push_back(examples[i]);
        ForestConfig fc;
        fc.n_trees = 40;
        const auto forest = train_forest(train, m, fc, 1);
        EXPECT_GE(evaluate(forest, holdout).auc, 0.95) << mood_name(m);
    }
}

}  // namespace
}  // namespace flowmoods
