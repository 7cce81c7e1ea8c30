#include "flowmoods/mood_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/random.hpp"
#include "flowmoods/text_util.hpp"

namespace flowmoods {

namespace {

constexpr std::string_view kForestMagic = "FMFOREST";
constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

// Column-major copy of the training matrix plus labels.
struct TrainingMatrix {
    std::size_t n_samples = 0;
    std::size_t n_features = 0;
    std::vector<double> columns;
    std::vector<std::uint8_t> labels;

    double at(std::size_t sample, std::size_t feature) const { return columns[feature * n_samples + sample]; }
};

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

double gini(double positives, double total) {
    if (total <= 0.0) return 0.0;
    const double p = positives / total;
    return 2.0 * p * (1.0 - p);
}

class TreeGrower {
public:
    TreeGrower(const TrainingMatrix& data, const ForestConfig& config, std::uint64_t seed)
        : data_(data), config_(config), rng_(seed), feature_pool_(data.n_features) {
        std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
    }

    DecisionTree grow(std::vector<std::uint32_t> samples) {
        tree_.max_depth = config_.max_depth;
        samples_ = std::move(samples);
        build(0, samples_.size(), 0);
        return std::move(tree_);
    }

private:
    std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
        const std::size_t n = end - begin;
        std::size_t positives = 0;
        for (std::size_t k = begin; k < end; ++k) positives += data_.labels[samples_[k]];

        const auto index = static_cast<std::int32_t>(tree_.nodes.size());
        TreeNode node;
        node.positive_fraction = static_cast<double>(positives) / static_cast<double>(n);
        node.sample_count = static_cast<std::uint32_t>(n);
        tree_.nodes.push_back(node);

        const bool pure = positives == 0 || positives == n;
        if (pure || depth >= config_.max_depth || n < 2 * config_.min_leaf) return index;

        const auto split = best_split(begin, end, positives);
        if (!split.found) return index;

        const auto mid = std::stable_partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                               samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                               [&](std::uint32_t s) { return data_.at(s, split.feature) <= split.threshold; });
        const auto split_pos = static_cast<std::size_t>(mid - samples_.begin());

        const auto left = build(begin, split_pos, depth + 1);
        const auto right = build(split_pos, end, depth + 1);
        auto& stored = tree_.nodes[static_cast<std::size_t>(index)];
        stored.feature = static_cast<std::int32_t>(split.feature);
        stored.threshold = split.threshold;
        stored.left = left;
        stored.right = right;
        return index;
    }

    std::vector<std::size_t> sample_features() {
        const std::size_t m = std::min(config_.feature_subsample, data_.n_features);
        // Partial Fisher-Yates over the persistent pool.
        for (std::size_t i = 0; i < m; ++i) {
            const auto j = i + rng_.uniform_index(data_.n_features - i);
            std::swap(feature_pool_[i], feature_pool_[j]);
        }
        std::vector<std::size_t> chosen(feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(m));
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }

    SplitChoice best_split(std::size_t begin, std::size_t end, std::size_t positives) {
        const std::size_t n = end - begin;
        const double total = static_cast<double>(n);
        const double parent = gini(static_cast<double>(positives), total);
        SplitChoice best;
        values_.resize(n);
        for (const auto f : sample_features()) {
            for (std::size_t k = 0; k < n; ++k) {
                const auto s = samples_[begin + k];
                values_[k] = {data_.at(s, f), data_.labels[s]};
            }
            std::sort(values_.begin(), values_.end());
            double left_pos = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_pos += values_[k].second;
                const std::size_t n_left = k + 1;
                if (values_[k].first == values_[k + 1].first) continue;
                if (n_left < config_.min_leaf || n - n_left < config_.min_leaf) continue;
                const double nl = static_cast<double>(n_left);
                const double nr = total - nl;
                const double child = (nl * gini(left_pos, nl) + nr * gini(static_cast<double>(positives) - left_pos, nr)) / total;
                const double gain = parent - child;
                // Strict comparison keeps the lowest feature, then the lowest threshold, on ties.
                if (gain > best.gain) {
                    const double a = values_[k].first;
                    const double b = values_[k + 1].first;
                    double threshold = a + (b - a) / 2.0;
                    if (!(threshold < b)) threshold = a;
                    best = {true, f, threshold, gain};
                }
            }
        }
        return best;
    }

    const TrainingMatrix& data_;
    const ForestConfig& config_;
    Rng rng_;
    std::vector<std::size_t> feature_pool_;
    std::vector<std::uint32_t> samples_;
    std::vector<std::pair<double, std::uint8_t>> values_;
    DecisionTree tree_;
};

void validate(const ForestConfig& config) {
    if (config.n_trees == 0) throw Error(ErrorCode::invalid_argument, "n_trees must be >= 1");
    if (config.max_depth == 0) throw Error(ErrorCode::invalid_argument, "max_depth must be >= 1");
    if (config.min_leaf == 0) throw Error(ErrorCode::invalid_argument, "min_leaf must be >= 1");
    if (config.feature_subsample == 0) throw Error(ErrorCode::invalid_argument, "feature_subsample must be >= 1");
}

void validate_tree(const DecisionTree& tree, std::size_t n_features, const std::string& source) {
    if (tree.nodes.empty()) throw Error(ErrorCode::corrupt_file, source + ": empty decision tree");
    const auto n = static_cast<std::int32_t>(tree.nodes.size());
    for (const auto& node : tree.nodes) {
        if (!(node.positive_fraction >= 0.0 && node.positive_fraction <= 1.0)) {
            throw Error(ErrorCode::corrupt_file, source + ": leaf fraction outside [0,1]");
        }
        if (node.is_leaf()) continue;
        if (static_cast<std::size_t>(node.feature) >= n_features || node.left <= 0 || node.right <= 0 ||
            node.left >= n || node.right >= n) {
            throw Error(ErrorCode::corrupt_file, source + ": decision tree node with invalid feature or child");
        }
    }
}

}  // namespace

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf()) {
        const auto next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
        node = &nodes[static_cast<std::size_t>(next)];
    }
    return *node;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        const auto [index, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        const auto& node = nodes[static_cast<std::size_t>(index)];
        if (!node.is_leaf()) {
            stack.emplace_back(node.left, d + 1);
            stack.emplace_back(node.right, d + 1);
        }
    }
    return deepest;
}

RandomForest train_forest(std::span<const LabeledEmbedding> labeled, Mood mood, const ForestConfig& config,
                          std::uint64_t seed) {
    validate(config);
    if (labeled.empty()) throw Error(ErrorCode::single_class, "no training examples for mood " + std::string(mood_name(mood)));
    const std::size_t n_features = labeled.front().embedding.size();
    if (n_features == 0) throw Error(ErrorCode::dimension_mismatch, "training embeddings are empty");

    TrainingMatrix data;
    data.n_samples = labeled.size();
    data.n_features = n_features;
    data.columns.resize(data.n_samples * n_features);
    data.labels.resize(data.n_samples);
    TrainingSummary summary;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto& ex = labeled[i];
        if (ex.embedding.size() != n_features) {
            throw Error(ErrorCode::dimension_mismatch, "training example " + std::to_string(i) + " has dimension " +
                                                           std::to_string(ex.embedding.size()) + ", expected " +
                                                           std::to_string(n_features));
        }
        for (std::size_t f = 0; f < n_features; ++f) data.columns[f * data.n_samples + i] = ex.embedding[f];
        data.labels[i] = ex.positive ? 1 : 0;
        (ex.positive ? summary.n_positive : summary.n_negative) += 1;
    }
    if (summary.n_positive == 0 || summary.n_negative == 0) {
        throw Error(ErrorCode::single_class, "training set for mood " + std::string(mood_name(mood)) +
                                                 " contains a single class (" + std::to_string(summary.n_positive) +
                                                 " positive, " + std::to_string(summary.n_negative) + " negative)");
    }

    RandomForest forest{mood, config, seed, n_features, {}, summary};
    forest.trees.reserve(config.n_trees);
    std::vector<double> oob_sum(data.n_samples, 0.0);
    std::vector<std::uint32_t> oob_votes(data.n_samples, 0);
    std::vector<std::uint8_t> in_bag(data.n_samples);

    for (std::size_t t = 0; t < config.n_trees; ++t) {
        const auto tree_seed = derive_seed(seed, t);
        Rng bag_rng(tree_seed);
        std::vector<std::uint32_t> samples(data.n_samples);
        if (config.bootstrap) {
            for (auto& s : samples) s = static_cast<std::uint32_t>(bag_rng.uniform_index(data.n_samples));
        } else {
            std::iota(samples.begin(), samples.end(), 0U);
        }
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (auto s : samples) in_bag[s] = 1;

        TreeGrower grower(data, config, derive_seed(tree_seed, 1));
        forest.trees.push_back(grower.grow(std::move(samples)));

        if (config.bootstrap) {
            for (std::size_t i = 0; i < data.n_samples; ++i) {
                if (in_bag[i]) continue;
                oob_sum[i] += forest.trees.back().predict(labeled[i].embedding);
                ++oob_votes[i];
            }
        }
    }

    if (config.bootstrap) {
        std::size_t counted = 0, correct = 0;
        for (std::size_t i = 0; i < data.n_samples; ++i) {
            if (oob_votes[i] == 0) continue;
            ++counted;
            const bool predicted = oob_sum[i] / oob_votes[i] >= 0.5;
            correct += predicted == (data.labels[i] == 1);
        }
        if (counted > 0) forest.summary.oob_estimate = static_cast<double>(correct) / static_cast<double>(counted);
    }
    return forest;
}

double score(const RandomForest& forest, std::span<const double> embedding) {
    if (embedding.size() != forest.n_features) {
        throw Error(ErrorCode::dimension_mismatch, "embedding has dimension " + std::to_string(embedding.size()) +
                                                       ", forest expects " + std::to_string(forest.n_features));
    }
    if (forest.trees.empty()) throw Error(ErrorCode::invalid_argument, "forest has no trees");
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += tree.predict(embedding);
    return std::clamp(sum / static_cast<double>(forest.trees.size()), 0.0, 1.0);
}

EvalMetrics evaluate_scores(std::span<const double> scores, std::span<const bool> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::invalid_argument, "scores and labels differ in length");
    EvalMetrics m;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= 0.5;
        if (labels[i]) {
            ++n_pos;
            (predicted ? m.true_positive : m.false_negative) += 1;
        } else {
            (predicted ? m.false_positive : m.true_negative) += 1;
        }
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw Error(ErrorCode::single_class, "AUC is undefined for a holdout with a single class");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double positive_rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double average_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) positive_rank_sum += average_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    m.auc = (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
    m.accuracy_at_half = static_cast<double>(m.true_positive + m.true_negative) / static_cast<double>(scores.size());
    return m;
}

EvalMetrics evaluate(const RandomForest& forest, std::span<const LabeledEmbedding> holdout) {
    if (holdout.empty()) throw Error(ErrorCode::invalid_argument, "holdout set is empty");
    std::vector<double> scores;
    std::vector<bool> labels;
    scores.reserve(holdout.size());
    for (const auto& ex : holdout) {
        scores.push_back(score(forest, ex.embedding));
        labels.push_back(ex.positive);
    }
    // std::vector<bool> has no contiguous storage.
    std::unique_ptr<bool[]> flags(new bool[labels.size()]);
    std::copy(labels.begin(), labels.end(), flags.get());
    return evaluate_scores(scores, std::span<const bool>(flags.get(), labels.size()));
}

void MoodScoreTable::set(const std::string& song_id, Mood mood, double value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "mood score for '" + song_id + "' outside [0,1]");
    }
    auto [it, inserted] = scores_.try_emplace(song_id);
    if (inserted) it->second.fill(kAbsent);
    auto& slot = it->second[mood_index(mood)];
    if (std::isnan(slot)) ++entries_;
    slot = value;
}

std::optional<double> MoodScoreTable::score(const std::string& song_id, Mood mood) const {
    const auto it = scores_.find(song_id);
    if (it == scores_.end()) return std::nullopt;
    const double v = it->second[mood_index(mood)];
    if (std::isnan(v)) return std::nullopt;
    return v;
}

std::vector<std::string> MoodScoreTable::song_ids() const {
    std::vector<std::string> ids;
    ids.reserve(scores_.size());
    for (const auto& [id, _] : scores_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool MoodScoreTable::operator==(const MoodScoreTable& other) const {
    if (model_version_ != other.model_version_ || entries_ != other.entries_ || scores_.size() != other.scores_.size()) {
        return false;
    }
    for (const auto& [id, row] : scores_) {
        const auto it = other.scores_.find(id);
        if (it == other.scores_.end()) return false;
        for (std::size_t m = 0; m < kMoodCount; ++m) {
            const double a = row[m], b = it->second[m];
            if (std::isnan(a) != std::isnan(b)) return false;
            if (!std::isnan(a) && a != b) return false;
        }
    }
    return true;
}

const RandomForest& MoodForests::at(Mood mood) const {
    const auto& f = forests[mood_index(mood)];
    if (!f) {
        throw Error(ErrorCode::missing_artifact,
                    "no trained forest for mood " + std::string(mood_name(mood)) + " (run train-moods)");
    }
    return *f;
}

CatalogScoring score_catalog(const MoodForests& forests, const Catalog& catalog) {
    for (Mood m : kAllMoods) forests.at(m);
    CatalogScoring result{MoodScoreTable(forests.model_version), {}};
    for (const auto& song : catalog.songs()) {
        if (!song.audio_embedding) {
            result.skipped.push_back(song.song_id);
            continue;
        }
        for (Mood m : kAllMoods) result.table.set(song.song_id, m, score(forests.at(m), *song.audio_embedding));
    }
    return result;
}

void save_forests(const MoodForests& forests, const std::filesystem::path& path) {
    std::ostringstream buf;
    BinaryWriter w(buf);
    w.magic(kForestMagic);
    w.u32(kForestSnapshotVersion);
    w.str(forests.model_version);
    std::uint32_t present = 0;
    for (const auto& f : forests.forests) present += f.has_value();
    w.u32(present);
    for (const auto& f : forests.forests) {
        if (!f) continue;
        w.u8(static_cast<std::uint8_t>(f->mood));
        w.u64(f->config.n_trees);
        w.u64(f->config.max_depth);
        w.u64(f->config.min_leaf);
        w.u64(f->config.feature_subsample);
        w.u8(f->config.bootstrap ? 1 : 0);
        w.u64(f->seed);
        w.u64(f->n_features);
        w.u64(f->summary.n_positive);
        w.u64(f->summary.n_negative);
        w.u8(f->summary.oob_estimate.has_value() ? 1 : 0);
        w.f64(f->summary.oob_estimate.value_or(0.0));
        w.u64(f->trees.size());
        for (const auto& tree : f->trees) {
            w.u64(tree.max_depth);
            w.u64(tree.nodes.size());
            for (const auto& node : tree.nodes) {
                w.u32(static_cast<std::uint32_t>(node.feature));
                w.f64(node.threshold);
                w.u32(static_cast<std::uint32_t>(node.left));
                w.u32(static_cast<std::uint32_t>(node.right));
                w.f64(node.positive_fraction);
                w.u32(node.sample_count);
            }
        }
    }
    w.trailer();
    write_file_atomically(path, buf.str());
}

MoodForests load_forests(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    const auto source = path.string();
    BinaryReader r(in, source);
    r.expect_magic(kForestMagic);
    r.expect_version(kForestSnapshotVersion);
    MoodForests forests;
    forests.model_version = r.str();
    const auto present = r.u32();
    if (present > kMoodCount) throw Error(ErrorCode::corrupt_file, source + ": too many forests");
    for (std::uint32_t k = 0; k < present; ++k) {
        RandomForest f;
        const auto mood = r.u8();
        if (mood >= kMoodCount) throw Error(ErrorCode::corrupt_file, source + ": invalid mood tag");
        f.mood = static_cast<Mood>(mood);
        f.config.n_trees = r.u64();
        f.config.max_depth = r.u64();
        f.config.min_leaf = r.u64();
        f.config.feature_subsample = r.u64();
        f.config.bootstrap = r.u8() != 0;
        f.seed = r.u64();
        f.n_features = r.count(1 << 20);
        f.summary.n_positive = r.u64();
        f.summary.n_negative = r.u64();
        const bool has_oob = r.u8() != 0;
        const double oob = r.f64();
        if (has_oob) f.summary.oob_estimate = oob;
        const auto n_trees = r.count(1 << 20);
        f.trees.resize(n_trees);
        for (auto& tree : f.trees) {
            tree.max_depth = r.u64();
            tree.nodes.resize(r.count(1 << 26));
            for (auto& node : tree.nodes) {
                node.feature = static_cast<std::int32_t>(r.u32());
                node.threshold = r.f64();
                node.left = static_cast<std::int32_t>(r.u32());
                node.right = static_cast<std::int32_t>(r.u32());
                node.positive_fraction = r.f64();
                node.sample_count = r.u32();
            }
            validate_tree(tree, f.n_features, source);
        }
        if (f.trees.empty()) throw Error(ErrorCode::corrupt_file, source + ": forest without trees");
        forests.forests[mood] = std::move(f);
    }
    r.expect_trailer();
    return forests;
}

void save_scores(const MoodScoreTable& table, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# model_version=" << table.model_version() << '\n';
    out << "song_id,mood,score\n";
    for (const auto& id : table.song_ids()) {
        for (Mood m : kAllMoods) {
            if (const auto s = table.score(id, m)) out << id << ',' << mood_name(m) << ',' << text::format_exact(*s) << '\n';
        }
    }
    write_file_atomically(path, out.str());
}

MoodScoreTable load_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string() + ": file missing or unreadable");
    MoodScoreTable table;
    std::string line;
    std::size_t line_no = 0;
    constexpr std::string_view kVersionPrefix = "# model_version=";
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        if (body.starts_with(kVersionPrefix)) {
            table.set_model_version(std::string(body.substr(kVersionPrefix.size())));
            continue;
        }
        if (body.starts_with('#') || body.starts_with("song_id,")) continue;
        const auto cols = text::split(body, ',');
        double value = 0.0;
        const auto mood = cols.size() == 3 ? parse_mood_name(text::trim(cols[1])) : std::nullopt;
        if (!mood || !text::parse_double(cols[2], value) || value < 0.0 || value > 1.0) {
            throw Error(ErrorCode::parse_error,
                        path.string() + ":" + std::to_string(line_no) + ": expected song_id,mood,score in [0,1]", line_no);
        }
        table.set(std::string(text::trim(cols[0])), *mood, value);
    }
    return table;
}

std::vector<LabeledEmbedding> labeled_examples(const Catalog& catalog, std::span<const MoodLabel> labels, Mood mood) {
    std::vector<LabeledEmbedding> out;
    for (const auto& label : labels) {
        if (label.mood != mood) continue;
        const auto* song = catalog.find_song(label.song_id);
        if (!song || !song->audio_embedding) continue;
        out.push_back({*song->audio_embedding, label.positive});
    }
    return out;
}

}  // namespace flowmoods
