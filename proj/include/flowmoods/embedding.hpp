#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "flowmoods/catalog.hpp"
#include "flowmoods/vector_table.hpp"

namespace flowmoods {

struct TrainingConfig {
    std::size_t dimension = 64;
    std::size_t epochs = 15;
    double regularization = 0.01;
    /// Confidence of an observed pair is 1 + alpha * weight.
    double alpha = 40.0;
    std::uint64_t seed = 42;

    bool operator==(const TrainingConfig&) const = default;
};

/// Throws invalid_argument when dimension or epochs is zero, or regularization/alpha is negative.
void validate(const TrainingConfig& config);

// Jointly learned user and song vectors. Immutable once built.
class EmbeddingSpace {
public:
    EmbeddingSpace() = default;
    /// Throws dimension_mismatch when the tables disagree with config.dimension
    /// and invalid_argument when any value is not finite.
    EmbeddingSpace(TrainingConfig config, VectorTable users, VectorTable songs,
                   std::vector<double> objective_history = {}, std::string model_version = {});

    std::size_t dimension() const noexcept { return config_.dimension; }
    std::uint64_t seed() const noexcept { return config_.seed; }
    const TrainingConfig& config() const noexcept { return config_; }
    const VectorTable& users() const noexcept { return users_; }
    const VectorTable& songs() const noexcept { return songs_; }
    /// Objective value after each epoch, in order.
    const std::vector<double>& objective_history() const noexcept { return objective_history_; }
    const std::string& model_version() const noexcept { return model_version_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    void set_model_version(std::string version) { model_version_ = std::move(version); }
    void add_warning(std::string warning) { warnings_.push_back(std::move(warning)); }

    bool operator==(const EmbeddingSpace& other) const {
        return config_ == other.config_ && users_ == other.users_ && songs_ == other.songs_ &&
               objective_history_ == other.objective_history_ && model_version_ == other.model_version_;
    }

private:
    TrainingConfig config_;
    VectorTable users_;
    VectorTable songs_;
    std::vector<double> objective_history_;
    std::string model_version_;
    std::vector<std::string> warnings_;
};

/// Weighted implicit-feedback matrix factorization trained by alternating
/// least squares. Deterministic for a given config.seed.
EmbeddingSpace train_embeddings(std::span<const InteractionEvent> events, const Catalog& catalog,
                                const TrainingConfig& config);

/// Inner product of the user's and the song's vectors. Throws not_found.
double affinity(const EmbeddingSpace& space, const std::string& user_id, const std::string& song_id);

inline constexpr std::uint32_t kEmbeddingSnapshotVersion = 1;
void save_space(const EmbeddingSpace& space, const std::filesystem::path& path);
EmbeddingSpace load_space(const std::filesystem::path& path);

namespace als {

// Sparse confidence data in both orientations. Duplicate (user, item) pairs
// are summed on construction.
struct ImplicitMatrix {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::vector<std::size_t> user_ptr, user_items;
    std::vector<double> user_weights;
    std::vector<std::size_t> item_ptr, item_users;
    std::vector<double> item_weights;

    static ImplicitMatrix from_triplets(std::size_t n_users, std::size_t n_items,
                                        std::vector<std::tuple<std::size_t, std::size_t, double>> triplets);
    std::size_t nnz() const noexcept { return user_items.size(); }
};

/// sum over all (u,i) of c_ui (p_ui - x_u.y_i)^2 + lambda (|X|^2 + |Y|^2), with
/// p = 1 and c = 1 + alpha w on observed positive pairs, p = 0 and c = 1 elsewhere.
double objective(const ImplicitMatrix& data, std::span<const double> users, std::span<const double> items,
                 std::size_t dimension, double lambda, double alpha);

/// Analytic gradient of objective() with respect to both factor matrices.
void gradient(const ImplicitMatrix& data, std::span<const double> users, std::span<const double> items,
              std::size_t dimension, double lambda, double alpha, std::span<double> user_grad,
              std::span<double> item_grad);

/// Exact least-squares update of every row of `target` with `fixed` held
/// constant. `by_target` selects user-major (true) or item-major storage.
void solve_side(const ImplicitMatrix& data, bool update_users, std::span<const double> fixed,
                std::span<double> target, std::size_t dimension, double lambda, double alpha);

}  // namespace als

}  // namespace flowmoods
