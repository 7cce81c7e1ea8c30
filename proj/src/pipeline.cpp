#include "flowmoods/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/random.hpp"

namespace flowmoods {

namespace {

std::uint64_t forest_seed(std::uint64_t seed, Mood mood) { return derive_seed(seed, 100 + mood_index(mood)); }
std::uint64_t split_seed(std::uint64_t seed, Mood mood) { return derive_seed(seed, 200 + mood_index(mood)); }

std::filesystem::path require(const std::filesystem::path& dir, const char* name, const char* producer) {
    auto path = dir / name;
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::missing_artifact,
                    "missing " + path.string() + "; run `flowmoods " + producer + "` to produce it");
    }
    return path;
}

}  // namespace

LabeledSplit split_holdout(std::vector<LabeledEmbedding> examples, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "holdout fraction must lie in [0, 1)");
    }
    std::vector<LabeledEmbedding> pos, neg;
    for (auto& e : examples) (e.positive ? pos : neg).push_back(std::move(e));
    Rng rng(seed);
    LabeledSplit split;
    for (auto* cls : {&pos, &neg}) {
        rng.shuffle(*cls);
        const auto n_hold = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(cls->size())));
        for (std::size_t i = 0; i < cls->size(); ++i) {
            (i < n_hold ? split.holdout : split.train).push_back(std::move((*cls)[i]));
        }
    }
    return split;
}

MoodTraining train_mood_forests(const Catalog& catalog, std::span<const MoodLabel> labels,
                                const PipelineConfig& config, const std::string& model_version) {
    MoodTraining out;
    out.forests.model_version = model_version;
    const auto start = std::chrono::steady_clock::now();
    for (Mood mood : kAllMoods) {
        auto examples = labeled_examples(catalog, labels, mood);
        if (examples.empty()) continue;
        auto split = split_holdout(std::move(examples), config.holdout_fraction, split_seed(config.seed, mood));
        out.forests.forests[mood_index(mood)] = train_forest(split.train, mood, config.forest, forest_seed(config.seed, mood));
        if (!split.holdout.empty()) {
            try {
                out.holdout[mood_index(mood)] = evaluate(*out.forests.forests[mood_index(mood)], split.holdout);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::single_class) throw;
            }
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::array<std::optional<EvalMetrics>, kMoodCount> evaluate_mood_forests(const MoodForests& forests,
                                                                         const Catalog& catalog,
                                                                         std::span<const MoodLabel> labels,
                                                                         const PipelineConfig& config) {
    std::array<std::optional<EvalMetrics>, kMoodCount> out;
    for (Mood mood : kAllMoods) {
        if (!forests.forests[mood_index(mood)]) continue;
        auto examples = labeled_examples(catalog, labels, mood);
        auto split = split_holdout(std::move(examples), config.holdout_fraction, split_seed(config.seed, mood));
        if (split.holdout.empty()) continue;
        try {
            out[mood_index(mood)] = evaluate(*forests.forests[mood_index(mood)], split.holdout);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::single_class) throw;
        }
    }
    return out;
}

ModelStack build_stack(Catalog catalog, std::span<const InteractionEvent> events, std::span<const MoodLabel> labels,
                       const PipelineConfig& config, const std::string& model_version) {
    ModelStack stack;
    stack.model_version = model_version;
    auto cat = std::make_shared<const Catalog>(std::move(catalog));
    stack.catalog = cat;

    auto space = train_embeddings(events, *cat, config.embedding);
    space.set_model_version(model_version);
    auto shared_space = std::make_shared<const EmbeddingSpace>(std::move(space));
    stack.space = shared_space;

    auto training = train_mood_forests(*cat, labels, config, model_version);
    auto scoring = score_catalog(training.forests, *cat);
    scoring.table.set_model_version(model_version);
    stack.forests = std::make_shared<const MoodForests>(std::move(training.forests));
    auto scores = std::make_shared<const MoodScoreTable>(std::move(scoring.table));
    stack.scores = scores;

    auto index = build_index(shared_space->songs(), config.index);
    index.set_model_version(model_version);
    stack.index = std::make_shared<const AnnIndex>(std::move(index));

    auto fallback = build_fallback_pools(*cat, *scores, song_popularity(events), config.session.tau, config.fallback_size);
    fallback.model_version = model_version;
    stack.fallback = std::make_shared<const FallbackPool>(std::move(fallback));
    return stack;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_model_version(std::uint64_t digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "m";
    for (int shift = 60; shift >= 0; shift -= 4) out += kHex[(digest >> shift) & 0xf];
    return out;
}

void save_manifest(const PipelineManifest& manifest, const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    doc["snapshot_version"] = kManifestVersion;
    doc["model_version"] = manifest.model_version;
    doc["seed"] = manifest.seed;
    doc["artifacts"] = {artifact::catalog,  artifact::interactions, artifact::labels, artifact::embeddings,
                        artifact::forests,  artifact::scores,       artifact::index,  artifact::fallback};
    auto& overrides = doc["overrides"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : manifest.overrides) overrides[k] = v;
    write_file_atomically(path, doc.dump(2) + "\n");
}

PipelineManifest load_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::missing_artifact,
                    "missing " + path.string() + "; run `flowmoods ingest` to produce it");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": " + e.what());
    }
    const int version = doc.value("snapshot_version", 0);
    if (version != kManifestVersion) {
        throw Error(ErrorCode::version_mismatch, path.string() + ": snapshot_version " + std::to_string(version) +
                                                     " is not supported (expected " +
                                                     std::to_string(kManifestVersion) + ")");
    }
    PipelineManifest m;
    try {
        m.model_version = doc.at("model_version").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("overrides")) {
            for (const auto& [k, v] : doc["overrides"].items()) m.overrides.emplace_back(k, v.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": " + e.what());
    }
    return m;
}

void save_stack(const ModelStack& stack, std::span<const InteractionEvent> events, std::span<const MoodLabel> labels,
                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_catalog(*stack.catalog, dir / artifact::catalog);
    save_interactions(events, dir / artifact::interactions);
    save_labels(labels, dir / artifact::labels);
    save_space(*stack.space, dir / artifact::embeddings);
    save_forests(*stack.forests, dir / artifact::forests);
    save_scores(*stack.scores, dir / artifact::scores);
    save_index(*stack.index, dir / artifact::index);
    save_fallback_pool(*stack.fallback, dir / artifact::fallback);
    PipelineManifest manifest;
    manifest.model_version = stack.model_version;
    save_manifest(manifest, dir / artifact::manifest);
}

ModelStack load_stack(const std::filesystem::path& dir) {
    // Check presence of everything before reading anything large.
    const auto catalog_path = require(dir, artifact::catalog, "ingest");
    const auto manifest_path = require(dir, artifact::manifest, "ingest");
    const auto space_path = require(dir, artifact::embeddings, "train-embeddings");
    const auto forests_path = require(dir, artifact::forests, "train-moods");
    const auto scores_path = require(dir, artifact::scores, "score-catalog");
    const auto index_path = require(dir, artifact::index, "build-index");
    const auto fallback_path = require(dir, artifact::fallback, "build-fallback");

    ModelStack stack;
    const auto manifest = load_manifest(manifest_path);
    stack.model_version = manifest.model_version;
    const auto check = [&](const std::filesystem::path& path, const std::string& stamp) {
        if (stamp != manifest.model_version) {
            throw Error(ErrorCode::inconsistent_snapshot,
                        path.filename().string() + " has model_version '" + stamp + "' but " +
                            manifest_path.filename().string() + " has '" + manifest.model_version + "'");
        }
    };
    auto forests = std::make_shared<const MoodForests>(load_forests(forests_path));
    check(forests_path, forests->model_version);
    auto scores = std::make_shared<const MoodScoreTable>(load_scores(scores_path));
    if (scores->model_version() != forests->model_version) {
        throw Error(ErrorCode::inconsistent_snapshot, "scores.csv has model_version '" + scores->model_version() +
                                                          "' but forests.snap has '" + forests->model_version + "'");
    }
    auto space = std::make_shared<const EmbeddingSpace>(load_space(space_path));
    check(space_path, space->model_version());
    auto index = std::make_shared<const AnnIndex>(load_index(index_path));
    check(index_path, index->model_version());
    auto fallback = std::make_shared<const FallbackPool>(load_fallback_pool(fallback_path));
    check(fallback_path, fallback->model_version);

    stack.catalog = std::make_shared<const Catalog>(load_catalog(catalog_path));
    stack.forests = std::move(forests);
    stack.scores = std::move(scores);
    stack.space = std::move(space);
    stack.index = std::move(index);
    stack.fallback = std::move(fallback);
    return stack;
}

}  // namespace flowmoods
