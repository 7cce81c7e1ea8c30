#include "flowmoods/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/random.hpp"

namespace flowmoods {

namespace {

constexpr std::string_view kIndexMagic = "FMIVF";

struct Scored {
    double similarity;
    std::uint32_t row;
};

void normalize(std::span<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
}

std::size_t nearest_cell(std::span<const double> x, std::span<const double> centroids, std::size_t n_cells) {
    const std::size_t d = x.size();
    std::size_t best = 0;
    double best_sim = dot(x, centroids.subspan(0, d));
    for (std::size_t c = 1; c < n_cells; ++c) {
        const double sim = dot(x, centroids.subspan(c * d, d));
        if (sim > best_sim) {
            best_sim = sim;
            best = c;
        }
    }
    return best;
}

void check_query(std::size_t dimension, std::span<const double> q, std::size_t k) {
    if (q.size() != dimension) {
        throw Error(ErrorCode::dimension_mismatch, "query has dimension " + std::to_string(q.size()) +
                                                       ", index expects " + std::to_string(dimension));
    }
    if (k == 0) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
}

NeighborList top_k(std::vector<Scored>& scored, const VectorTable& vectors, std::size_t k) {
    const auto better = [&](const Scored& a, const Scored& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return vectors.id(a.row) < vectors.id(b.row);
    };
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    NeighborList out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back({vectors.id(scored[i].row), scored[i].similarity});
    return out;
}

}  // namespace

std::vector<std::size_t> AnnIndex::probe_order(std::span<const double> query) const {
    std::vector<std::pair<double, std::size_t>> sims(n_cells());
    // The query's completion coordinate is zero, so only the first d entries count.
    for (std::size_t c = 0; c < n_cells(); ++c) sims[c] = {dot(query, centroid(c).first(dimension())), c};
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> order(sims.size());
    for (std::size_t i = 0; i < sims.size(); ++i) order[i] = sims[i].second;
    return order;
}

NeighborList AnnIndex::query(std::span<const double> q, std::size_t k, std::size_t n_probe) const {
    check_query(dimension(), q, k);
    if (n_probe == 0) throw Error(ErrorCode::invalid_argument, "n_probe must be >= 1");
    const auto order = probe_order(q);
    const std::size_t probes = std::min(n_probe, n_cells());
    std::vector<Scored> scored;
    for (std::size_t p = 0; p < probes; ++p) {
        for (const auto row : posting_lists_[order[p]]) scored.push_back({dot(q, vectors_.row(row)), row});
    }
    return top_k(scored, vectors_, k);
}

AnnIndex build_index(const VectorTable& vectors, const IndexConfig& config) {
    if (vectors.empty()) throw Error(ErrorCode::invalid_argument, "cannot build an index over zero vectors");
    if (vectors.dimension() == 0) throw Error(ErrorCode::dimension_mismatch, "cannot index zero-dimensional vectors");
    const std::size_t n = vectors.size();
    const std::size_t d = vectors.dimension();
    const std::size_t da = d + 1;
    std::size_t n_cells = config.n_cells != 0 ? config.n_cells
                                              : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    n_cells = std::clamp<std::size_t>(n_cells, 1, n);

    // Norm completion: x -> [x, sqrt(M^2 - |x|^2)] / M puts every item on the
    // unit sphere, where the largest inner product with [q, 0] is also the
    // nearest point. k-means then runs on the sphere.
    double max_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_norm2 = std::max(max_norm2, dot(vectors.row(i), vectors.row(i)));
    std::vector<double> unit(n * da, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = vectors.row(i);
        std::copy(row.begin(), row.end(), unit.begin() + static_cast<std::ptrdiff_t>(i * da));
        unit[i * da + d] = std::sqrt(std::max(0.0, max_norm2 - dot(row, row)));
        normalize(std::span<double>(unit.data() + i * da, da));
    }
    const auto point = [&](std::size_t i) { return std::span<const double>(unit.data() + i * da, da); };

    // Seeded init on distinct sample points.
    Rng rng(config.seed);
    std::vector<std::size_t> picks(n);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_cells; ++i) std::swap(picks[i], picks[i + rng.uniform_index(n - i)]);
    std::vector<double> centroids(n_cells * da);
    for (std::size_t c = 0; c < n_cells; ++c) {
        std::copy_n(unit.begin() + static_cast<std::ptrdiff_t>(picks[c] * da), da,
                    centroids.begin() + static_cast<std::ptrdiff_t>(c * da));
    }

    std::vector<std::uint32_t> assignment(n, 0);
    const auto assign_all = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            assignment[i] = static_cast<std::uint32_t>(nearest_cell(point(i), centroids, n_cells));
        }
    };

    for (std::size_t iter = 0; iter < config.kmeans_iterations; ++iter) {
        assign_all();
        std::vector<std::size_t> counts(n_cells, 0);
        for (auto a : assignment) ++counts[a];
        // Empty cells take over the worst-fitting member of the largest cell.
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (counts[c] != 0) continue;
            const auto largest = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            if (counts[largest] < 2) break;
            std::size_t worst = n;
            double worst_sim = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assignment[i] != largest) continue;
                const double sim = dot(point(i), std::span<const double>(centroids.data() + largest * da, da));
                if (worst == n || sim < worst_sim) {
                    worst = i;
                    worst_sim = sim;
                }
            }
            assignment[worst] = static_cast<std::uint32_t>(c);
            --counts[largest];
            ++counts[c];
        }
        std::vector<double> sums(n_cells * da, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < da; ++j) sums[assignment[i] * da + j] += unit[i * da + j];
        }
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (counts[c] == 0) continue;
            std::span<double> s(sums.data() + c * da, da);
            normalize(s);
            if (std::any_of(s.begin(), s.end(), [](double v) { return v != 0.0; })) {
                std::copy(s.begin(), s.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * da));
            }
        }
    }
    assign_all();

    AnnIndex index;
    index.vectors_ = vectors;
    index.centroids_ = std::move(centroids);
    index.assignment_ = std::move(assignment);
    index.posting_lists_.assign(n_cells, {});
    for (std::size_t i = 0; i < n; ++i) index.posting_lists_[index.assignment_[i]].push_back(static_cast<std::uint32_t>(i));
    index.n_probe_ = config.n_probe != 0 ? std::min(config.n_probe, n_cells) : (n_cells + 3) / 4;
    index.seed_ = config.seed;
    index.kmeans_iterations_ = config.kmeans_iterations;
    return index;
}

NeighborList exact_topk(const VectorTable& vectors, std::span<const double> query, std::size_t k) {
    check_query(vectors.dimension(), query, k);
    std::vector<Scored> scored(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        scored[i] = {dot(query, vectors.row(i)), static_cast<std::uint32_t>(i)};
    }
    return top_k(scored, vectors, k);
}

double recall_at_k(const AnnIndex& index, std::span<const std::vector<double>> queries, std::size_t k,
                   std::size_t n_probe) {
    if (queries.empty()) throw Error(ErrorCode::invalid_argument, "recall needs at least one query");
    double total = 0.0;
    for (const auto& q : queries) {
        const auto approx = index.query(q, k, n_probe);
        const auto exact = exact_topk(index.vectors(), q, k);
        std::unordered_set<std::string> truth;
        for (const auto& nb : exact) truth.insert(nb.song_id);
        std::size_t hits = 0;
        for (const auto& nb : approx) hits += truth.count(nb.song_id);
        total += static_cast<double>(hits) / static_cast<double>(exact.size());
    }
    return total / static_cast<double>(queries.size());
}

void save_index(const AnnIndex& index, const std::filesystem::path& path) {
    std::ostringstream buf;
    BinaryWriter w(buf);
    w.magic(kIndexMagic);
    w.u32(kIndexSnapshotVersion);
    w.str(index.model_version());
    w.u64(index.seed());
    w.u64(index.kmeans_iterations_);
    w.u64(index.default_n_probe());
    w.u64(index.dimension());
    w.u64(index.size());
    for (const auto& id : index.item_ids()) w.str(id);
    w.f64s(index.vectors().values());
    w.u64(index.n_cells());
    w.f64s(index.centroids_);
    for (auto a : index.assignment_) w.u32(a);
    w.trailer();
    write_file_atomically(path, buf.str());
}

AnnIndex load_index(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    const auto source = path.string();
    BinaryReader r(in, source);
    r.expect_magic(kIndexMagic);
    r.expect_version(kIndexSnapshotVersion);
    AnnIndex index;
    index.model_version_ = r.str();
    index.seed_ = r.u64();
    index.kmeans_iterations_ = r.u64();
    index.n_probe_ = r.u64();
    const auto d = r.count(1 << 16);
    const auto n = r.count();
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) ids.push_back(r.str());
    auto values = r.f64s(n * d);
    index.vectors_ = VectorTable(d, std::move(ids), std::move(values));
    const auto n_cells = r.count();
    if (n_cells == 0 || n_cells > n) throw Error(ErrorCode::corrupt_file, source + ": invalid cell count");
    index.centroids_ = r.f64s(n_cells * (d + 1));
    index.assignment_.resize(n);
    index.posting_lists_.assign(n_cells, {});
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto a = r.u32();
        if (a >= n_cells) throw Error(ErrorCode::corrupt_file, source + ": cell assignment out of range");
        index.assignment_[i] = a;
        index.posting_lists_[a].push_back(static_cast<std::uint32_t>(i));
    }
    if (index.n_probe_ == 0 || index.n_probe_ > n_cells) throw Error(ErrorCode::corrupt_file, source + ": invalid n_probe");
    r.expect_trailer();
    return index;
}

}  // namespace flowmoods
