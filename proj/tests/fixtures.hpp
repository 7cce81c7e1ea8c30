#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flowmoods/catalog.hpp"
#include "flowmoods/pipeline.hpp"
#include "flowmoods/random.hpp"
#include "flowmoods/simulator.hpp"

namespace flowmoods::fixtures {

inline std::string id(char prefix, std::size_t n) { return prefix + std::to_string(n); }

// Catalog with one artist per `songs_per_artist` songs and users without
// favorites unless given.
inline Catalog plain_catalog(std::size_t n_users, std::size_t n_songs, std::size_t songs_per_artist = 1) {
    CatalogBuilder b;
    const std::size_t n_artists = (n_songs + songs_per_artist - 1) / songs_per_artist;
    for (std::size_t a = 0; a < n_artists; ++a) b.add_artist({id('a', a), "Artist " + std::to_string(a)});
    for (std::size_t s = 0; s < n_songs; ++s) b.add_song({id('s', s), id('a', s / songs_per_artist), "Song", std::nullopt});
    for (std::size_t u = 0; u < n_users; ++u) b.add_user({id('u', u), {}, {}});
    return std::move(b).build();
}

// Two disjoint user groups, each streaming only songs from its own block.
struct TwoBlock {
    Catalog catalog;
    std::vector<InteractionEvent> events;
    std::size_t users_per_block = 0;
    std::size_t songs_per_block = 0;

    std::size_t block_of_user(const std::string& user) const { return std::stoul(user.substr(1)) / users_per_block; }
    std::size_t block_of_song(const std::string& song) const { return std::stoul(song.substr(1)) / songs_per_block; }
};

inline TwoBlock two_block(std::size_t users_per_block = 50, std::size_t songs_per_block = 100,
                          std::size_t songs_per_user = 20, std::uint64_t seed = 5) {
    TwoBlock f;
    f.users_per_block = users_per_block;
    f.songs_per_block = songs_per_block;
    f.catalog = plain_catalog(2 * users_per_block, 2 * songs_per_block);
    Rng rng(seed);
    for (std::size_t u = 0; u < 2 * users_per_block; ++u) {
        const std::size_t block = u / users_per_block;
        for (std::size_t k = 0; k < songs_per_user; ++k) {
            const std::size_t song = block * songs_per_block + rng.uniform_index(songs_per_block);
            f.events.push_back({id('u', u), id('s', song), static_cast<double>(1 + rng.uniform_index(5)),
                                static_cast<std::int64_t>(k)});
        }
    }
    return f;
}

// Gaussian mixture in `dim` dimensions: `clusters` random centers, unit-variance
// spread scaled by `spread`. Queries come from the same mixture.
inline std::vector<std::vector<double>> mixture(std::size_t n, std::size_t dim, std::size_t clusters, double spread,
                                                Rng& rng, const std::vector<std::vector<double>>& centers) {
    std::vector<std::vector<double>> out(n, std::vector<double>(dim));
    for (auto& v : out) {
        const auto& c = centers[rng.uniform_index(clusters)];
        for (std::size_t j = 0; j < dim; ++j) v[j] = c[j] + spread * rng.normal();
    }
    return out;
}

inline std::vector<std::vector<double>> mixture_centers(std::size_t dim, std::size_t clusters, Rng& rng) {
    std::vector<std::vector<double>> centers(clusters, std::vector<double>(dim));
    for (auto& c : centers) {
        for (auto& x : c) x = rng.normal();
    }
    return centers;
}

inline VectorTable to_table(const std::vector<std::vector<double>>& rows, char prefix = 's') {
    const std::size_t dim = rows.empty() ? 0 : rows[0].size();
    std::vector<std::string> ids;
    std::vector<double> values;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ids.push_back(id(prefix, i));
        values.insert(values.end(), rows[i].begin(), rows[i].end());
    }
    return VectorTable(dim, std::move(ids), std::move(values));
}

// Song vectors for recall measurements: 100 taste clusters in 64 dimensions,
// centers and within-cluster noise both N(0, 1). Queries are fresh draws from
// the same mixture.
struct SongVectors {
    VectorTable table;
    std::vector<std::vector<double>> queries;
};

inline SongVectors song_vectors(std::size_t n = 10000, std::size_t n_queries = 500, std::uint64_t seed = 17) {
    Rng rng(seed);
    const auto centers = mixture_centers(64, 100, rng);
    SongVectors out{to_table(mixture(n, 64, 100, 1.0, rng, centers)), mixture(n_queries, 64, 100, 1.0, rng, centers)};
    return out;
}

inline std::vector<std::vector<double>> isotropic(std::size_t n, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> out(n, std::vector<double>(dim));
    for (auto& v : out) {
        for (auto& x : v) x = rng.normal();
    }
    return out;
}

// A small synthetic world with every model trained, for session and service
// tests.
struct SmallStack {
    World world;
    ModelStack stack;
    PipelineConfig config;
};

inline SimConfig small_world_config(std::uint64_t seed = 3) {
    SimConfig c;
    c.n_users = 120;
    c.n_songs = 900;
    c.n_artists = 90;
    c.labels_per_mood = 200;
    c.seed = seed;
    return c;
}

inline PipelineConfig small_pipeline_config() {
    PipelineConfig p;
    p.embedding.dimension = 16;
    p.embedding.epochs = 8;
    p.forest.n_trees = 30;
    p.session.candidate_k = 300;
    p.session.min_candidates = 20;
    return p;
}

inline SmallStack small_stack(std::uint64_t seed = 3, const std::string& version = "m-small") {
    SmallStack s;
    s.world = generate_world(small_world_config(seed));
    s.config = small_pipeline_config();
    s.stack = build_stack(s.world.catalog, s.world.interactions, s.world.labels, s.config, version);
    return s;
}

}  // namespace flowmoods::fixtures
