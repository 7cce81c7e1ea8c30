#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowmoods/catalog.hpp"
#include "flowmoods/mood.hpp"

namespace flowmoods {

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    /// Minimum number of (bootstrap) samples in each child of a split.
    std::size_t min_leaf = 2;
    /// Features examined per split; 16 = ceil(sqrt(256)).
    std::size_t feature_subsample = 16;
    bool bootstrap = true;

    bool operator==(const ForestConfig&) const = default;
};

struct TreeNode {
    /// Split feature, or -1 for a leaf.
    std::int32_t feature = -1;
    /// Samples with x[feature] <= threshold go left.
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    /// Fraction of positive training samples that reached this node.
    double positive_fraction = 0.0;
    std::uint32_t sample_count = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t max_depth = 0;

    const TreeNode& leaf_for(std::span<const double> x) const;
    double predict(std::span<const double> x) const { return leaf_for(x).positive_fraction; }
    std::size_t depth() const;
    bool operator==(const DecisionTree&) const = default;
};

struct TrainingSummary {
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
    /// Out-of-bag accuracy at threshold 0.5 (bootstrap only).
    std::optional<double> oob_estimate;

    bool operator==(const TrainingSummary&) const = default;
};

struct RandomForest {
    Mood mood = Mood::Chill;
    ForestConfig config;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;
    TrainingSummary summary;

    std::size_t n_trees() const noexcept { return trees.size(); }
    bool operator==(const RandomForest&) const = default;
};

struct LabeledEmbedding {
    std::vector<double> embedding;
    bool positive = false;
};

/// Bagged CART forest with Gini splits. Tree t is grown from seed
/// derive_seed(seed, t); split ties resolve to the lowest feature index, then
/// the lowest threshold. Throws single_class, dimension_mismatch, invalid_argument.
RandomForest train_forest(std::span<const LabeledEmbedding> labeled, Mood mood, const ForestConfig& config,
                          std::uint64_t seed);

/// Mean leaf positive fraction over the trees, always in [0, 1].
double score(const RandomForest& forest, std::span<const double> embedding);

struct EvalMetrics {
    double auc = 0.0;
    double accuracy_at_half = 0.0;
    std::size_t true_positive = 0;
    std::size_t false_positive = 0;
    std::size_t true_negative = 0;
    std::size_t false_negative = 0;
};

/// AUC by the rank-sum statistic with average ranks for ties; a score >= 0.5
/// counts as a positive prediction. Throws single_class when a class is missing.
EvalMetrics evaluate_scores(std::span<const double> scores, std::span<const bool> labels);
EvalMetrics evaluate(const RandomForest& forest, std::span<const LabeledEmbedding> holdout);

// Catalog-wide scores, one per (song, mood). Scores are never normalized
// across moods, so one song may score high for several.
class MoodScoreTable {
public:
    explicit MoodScoreTable(std::string model_version = {}) : model_version_(std::move(model_version)) {}

    /// Throws invalid_argument for scores outside [0, 1].
    void set(const std::string& song_id, Mood mood, double value);
    std::optional<double> score(const std::string& song_id, Mood mood) const;
    /// Number of stored (song, mood) entries.
    std::size_t size() const noexcept { return entries_; }
    std::vector<std::string> song_ids() const;  // sorted
    const std::string& model_version() const noexcept { return model_version_; }
    void set_model_version(std::string v) { model_version_ = std::move(v); }

    bool operator==(const MoodScoreTable& other) const;

private:
    std::string model_version_;
    std::unordered_map<std::string, std::array<double, kMoodCount>> scores_;  // NaN = absent
    std::size_t entries_ = 0;
};

struct MoodForests {
    std::string model_version;
    std::array<std::optional<RandomForest>, kMoodCount> forests;

    const RandomForest& at(Mood mood) const;
};

struct CatalogScoring {
    MoodScoreTable table;
    std::vector<std::string> skipped;  // songs without an audio embedding
};

/// Scores every embedded song for all six moods. Throws missing_artifact
/// naming the first mood without a forest.
CatalogScoring score_catalog(const MoodForests& forests, const Catalog& catalog);

inline constexpr std::uint32_t kForestSnapshotVersion = 1;
void save_forests(const MoodForests& forests, const std::filesystem::path& path);
MoodForests load_forests(const std::filesystem::path& path);

/// CSV song_id,mood,score with six decimals, preceded by a
/// "# model_version=<stamp>" line.
void save_scores(const MoodScoreTable& table, const std::filesystem::path& path);
MoodScoreTable load_scores(const std::filesystem::path& path);

/// Labeled examples for one mood drawn from the catalog (songs without
/// embeddings are skipped).
std::vector<LabeledEmbedding> labeled_examples(const Catalog& catalog, std::span<const MoodLabel> labels, Mood mood);

}  // namespace flowmoods
