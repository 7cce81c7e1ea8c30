#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowmoods/ann_index.hpp"
#include "flowmoods/catalog.hpp"
#include "flowmoods/embedding.hpp"
#include "flowmoods/mood_classifier.hpp"
#include "flowmoods/session.hpp"

namespace flowmoods {

struct PipelineConfig {
    TrainingConfig embedding;
    ForestConfig forest;
    IndexConfig index;
    SessionConfig session;
    /// Fraction of each class held out per mood for evaluation.
    double holdout_fraction = 0.2;
    std::size_t fallback_size = 200;
    std::uint64_t seed = 42;
};

struct LabeledSplit {
    std::vector<LabeledEmbedding> train;
    std::vector<LabeledEmbedding> holdout;
};

/// Stratified split: each class is shuffled with `seed` and ceil(fraction * n)
/// of it goes to the holdout.
LabeledSplit split_holdout(std::vector<LabeledEmbedding> examples, double fraction, std::uint64_t seed);

struct MoodTraining {
    MoodForests forests;
    std::array<std::optional<EvalMetrics>, kMoodCount> holdout;
    double seconds = 0.0;
};

/// Trains one forest per mood that has labels in both classes. Moods without
/// any labels are left out; a mood with a single class raises single_class.
MoodTraining train_mood_forests(const Catalog& catalog, std::span<const MoodLabel> labels,
                                const PipelineConfig& config, const std::string& model_version);

/// Per-mood holdout metrics of already trained forests, on the same split
/// train_mood_forests used.
std::array<std::optional<EvalMetrics>, kMoodCount> evaluate_mood_forests(const MoodForests& forests,
                                                                         const Catalog& catalog,
                                                                         std::span<const MoodLabel> labels,
                                                                         const PipelineConfig& config);

/// Every artifact the session engine needs, stamped with one model version.
struct ModelStack {
    std::string model_version;
    std::shared_ptr<const Catalog> catalog;
    std::shared_ptr<const EmbeddingSpace> space;
    std::shared_ptr<const MoodForests> forests;
    std::shared_ptr<const MoodScoreTable> scores;
    std::shared_ptr<const AnnIndex> index;
    std::shared_ptr<const FallbackPool> fallback;

    SessionDeps deps(const SessionConfig& config) const {
        return SessionDeps{catalog, space, index, scores, fallback, config};
    }
};

/// In-memory run of the whole training pipeline.
ModelStack build_stack(Catalog catalog, std::span<const InteractionEvent> events, std::span<const MoodLabel> labels,
                       const PipelineConfig& config, const std::string& model_version);

/// Stable FNV-1a digest of `bytes`, continuing from `seed`.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
/// "m" followed by 16 hex digits.
std::string format_model_version(std::uint64_t digest);

// Names of the artifacts inside a work or snapshot directory.
namespace artifact {
inline constexpr const char* catalog = "catalog.jsonl";
inline constexpr const char* interactions = "interactions.csv";
inline constexpr const char* labels = "labels.csv";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* embeddings = "embeddings.snap";
inline constexpr const char* forests = "forests.snap";
inline constexpr const char* eval = "eval.json";
inline constexpr const char* scores = "scores.csv";
inline constexpr const char* index = "index.snap";
inline constexpr const char* fallback = "fallback.json";
inline constexpr const char* streams = "streams.csv";
inline constexpr const char* distribution = "distribution.csv";
}  // namespace artifact

struct PipelineManifest {
    std::string model_version;
    std::uint64_t seed = 0;
    /// Flag and config-file values that differed from the defaults, as given.
    std::vector<std::pair<std::string, std::string>> overrides;
};

inline constexpr int kManifestVersion = 1;
void save_manifest(const PipelineManifest& manifest, const std::filesystem::path& path);
/// Throws missing_artifact naming `ingest` when the file is absent.
PipelineManifest load_manifest(const std::filesystem::path& path);

/// Writes every artifact of `stack` into `dir`.
void save_stack(const ModelStack& stack, std::span<const InteractionEvent> events, std::span<const MoodLabel> labels,
                const std::filesystem::path& dir);

/// Loads the serving artifacts of a snapshot directory. Throws
/// missing_artifact naming the file and the subcommand that produces it, and
/// inconsistent_snapshot naming both stamps when model versions disagree.
ModelStack load_stack(const std::filesystem::path& dir);

}  // namespace flowmoods
