#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowmoods/vector_table.hpp"

namespace flowmoods {

struct Neighbor {
    std::string song_id;
    double similarity = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Descending similarity; equal similarities ordered by ascending song_id.
using NeighborList = std::vector<Neighbor>;

struct IndexConfig {
    /// Number of coarse cells; 0 selects ceil(sqrt(N)).
    std::size_t n_cells = 0;
    /// Default cells probed per query; 0 selects ceil(n_cells / 4).
    std::size_t n_probe = 0;
    std::uint64_t seed = 42;
    std::size_t kmeans_iterations = 20;
};

// Inverted-file index over inner-product similarity. The coarse quantizer is
// spherical k-means over norm-completed items: x maps to
// [x, sqrt(M^2 - |x|^2)] / M with M the largest item norm, which places every
// item on the unit sphere. Centroids are unit vectors in that (d+1)-space, a
// vector belongs to the cell whose centroid has the largest inner product with
// it, and queries [q, 0] probe the n_probe cells with the largest inner product.
class AnnIndex {
public:
    AnnIndex() = default;

    std::size_t dimension() const noexcept { return vectors_.dimension(); }
    std::size_t size() const noexcept { return vectors_.size(); }
    std::size_t n_cells() const noexcept { return posting_lists_.size(); }
    std::size_t default_n_probe() const noexcept { return n_probe_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& model_version() const noexcept { return model_version_; }
    void set_model_version(std::string v) { model_version_ = std::move(v); }

    const std::vector<std::string>& item_ids() const noexcept { return vectors_.ids(); }
    const VectorTable& vectors() const noexcept { return vectors_; }
    /// Row indices into vectors(), ascending within each list.
    const std::vector<std::vector<std::uint32_t>>& posting_lists() const noexcept { return posting_lists_; }
    /// Unit centroid of length dimension() + 1; the last entry is the
    /// norm-completion coordinate.
    std::span<const double> centroid(std::size_t cell) const noexcept {
        return {centroids_.data() + cell * (dimension() + 1), dimension() + 1};
    }

    /// Cells sorted by decreasing inner product with `query`, ties by cell number.
    std::vector<std::size_t> probe_order(std::span<const double> query) const;
    /// Cell that build() assigned the given row to.
    std::size_t cell_of(std::size_t row) const noexcept { return assignment_[row]; }

    NeighborList query(std::span<const double> query, std::size_t k, std::size_t n_probe) const;
    NeighborList query(std::span<const double> query, std::size_t k) const { return this->query(query, k, n_probe_); }

    bool operator==(const AnnIndex&) const = default;

private:
    friend AnnIndex build_index(const VectorTable&, const IndexConfig&);
    friend AnnIndex load_index(const std::filesystem::path&);
    friend void save_index(const AnnIndex&, const std::filesystem::path&);

    VectorTable vectors_;
    std::vector<double> centroids_;
    std::vector<std::vector<std::uint32_t>> posting_lists_;
    std::vector<std::uint32_t> assignment_;
    std::size_t n_probe_ = 1;
    std::uint64_t seed_ = 0;
    std::size_t kmeans_iterations_ = 0;
    std::string model_version_;
};

/// Throws invalid_argument on empty input and dimension_mismatch on zero-width vectors.
AnnIndex build_index(const VectorTable& vectors, const IndexConfig& config = {});

inline NeighborList query(const AnnIndex& index, std::span<const double> q, std::size_t k, std::size_t n_probe) {
    return index.query(q, k, n_probe);
}

/// Exhaustive scan; the reference the index is measured against.
NeighborList exact_topk(const VectorTable& vectors, std::span<const double> query, std::size_t k);

/// Mean over queries of |approx ∩ exact| / |exact| where |exact| = min(k, N).
double recall_at_k(const AnnIndex& index, std::span<const std::vector<double>> queries, std::size_t k,
                   std::size_t n_probe);

inline constexpr std::uint32_t kIndexSnapshotVersion = 1;
void save_index(const AnnIndex& index, const std::filesystem::path& path);
AnnIndex load_index(const std::filesystem::path& path);

}  // namespace flowmoods
