#include "flowmoods/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "flowmoods/binary_io.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/random.hpp"

namespace flowmoods {

namespace {
constexpr std::string_view kMagic = "FMEMBED";

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;

void write_table(BinaryWriter& w, const VectorTable& table) {
    w.u64(table.size());
    for (const auto& id : table.ids()) w.str(id);
    w.f64s(table.values());
}

VectorTable read_table(BinaryReader& r, std::size_t dimension) {
    const auto n = r.count();
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) ids.push_back(r.str());
    auto values = r.f64s(n * dimension);
    return VectorTable(dimension, std::move(ids), std::move(values));
}

}  // namespace

void validate(const TrainingConfig& config) {
    if (config.dimension == 0) throw Error(ErrorCode::invalid_argument, "embedding dimension must be >= 1");
    if (config.epochs == 0) throw Error(ErrorCode::invalid_argument, "epochs must be >= 1");
    if (!(config.regularization >= 0.0)) throw Error(ErrorCode::invalid_argument, "regularization must be >= 0");
    if (!(config.alpha >= 0.0)) throw Error(ErrorCode::invalid_argument, "confidence scaling alpha must be >= 0");
}

EmbeddingSpace::EmbeddingSpace(TrainingConfig config, VectorTable users, VectorTable songs,
                               std::vector<double> objective_history, std::string model_version)
    : config_(config),
      users_(std::move(users)),
      songs_(std::move(songs)),
      objective_history_(std::move(objective_history)),
      model_version_(std::move(model_version)) {
    for (const auto* table : {&users_, &songs_}) {
        if (!table->empty() && table->dimension() != config_.dimension) {
            throw Error(ErrorCode::dimension_mismatch, "embedding table dimension " +
                                                           std::to_string(table->dimension()) +
                                                           " differs from configured " +
                                                           std::to_string(config_.dimension));
        }
        for (double v : table->values()) {
            if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "embedding contains a non-finite value");
        }
    }
}

double affinity(const EmbeddingSpace& space, const std::string& user_id, const std::string& song_id) {
    const auto u = space.users().find(user_id);
    if (u == VectorTable::npos) throw Error(ErrorCode::not_found, "no embedding for user '" + user_id + "'");
    const auto s = space.songs().find(song_id);
    if (s == VectorTable::npos) throw Error(ErrorCode::not_found, "no embedding for song '" + song_id + "'");
    return dot(space.users().row(u), space.songs().row(s));
}

namespace als {

ImplicitMatrix ImplicitMatrix::from_triplets(std::size_t n_users, std::size_t n_items,
                                             std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    ImplicitMatrix m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.user_ptr.assign(n_users + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
        const auto [u, i, w0] = triplets[k];
        if (u >= n_users || i >= n_items) throw Error(ErrorCode::invalid_argument, "triplet index out of range");
        double w = 0.0;
        for (; k < triplets.size() && std::get<0>(triplets[k]) == u && std::get<1>(triplets[k]) == i; ++k) {
            w += std::get<2>(triplets[k]);
        }
        m.user_items.push_back(i);
        m.user_weights.push_back(w);
        ++m.user_ptr[u + 1];
    }
    for (std::size_t u = 0; u < n_users; ++u) m.user_ptr[u + 1] += m.user_ptr[u];

    m.item_ptr.assign(n_items + 1, 0);
    for (auto i : m.user_items) ++m.item_ptr[i + 1];
    for (std::size_t i = 0; i < n_items; ++i) m.item_ptr[i + 1] += m.item_ptr[i];
    m.item_users.resize(m.nnz());
    m.item_weights.resize(m.nnz());
    auto cursor = m.item_ptr;
    for (std::size_t u = 0; u < n_users; ++u) {
        for (auto k = m.user_ptr[u]; k < m.user_ptr[u + 1]; ++k) {
            const auto pos = cursor[m.user_items[k]]++;
            m.item_users[pos] = u;
            m.item_weights[pos] = m.user_weights[k];
        }
    }
    return m;
}

double objective(const ImplicitMatrix& data, std::span<const double> users, std::span<const double> items,
                 std::size_t dimension, double lambda, double alpha) {
    const ConstMap x(users.data(), static_cast<Eigen::Index>(data.n_users), static_cast<Eigen::Index>(dimension));
    const ConstMap y(items.data(), static_cast<Eigen::Index>(data.n_items), static_cast<Eigen::Index>(dimension));
    // Dense part: every pair contributes s^2 with unit confidence and zero preference.
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::MatrixXd yty = y.transpose() * y;
    double total = (xtx.array() * yty.array()).sum();
    // Observed pairs replace their s^2 term by c (p - s)^2.
    for (std::size_t u = 0; u < data.n_users; ++u) {
        for (auto k = data.user_ptr[u]; k < data.user_ptr[u + 1]; ++k) {
            const auto i = data.user_items[k];
            const double w = data.user_weights[k];
            const double s = x.row(static_cast<Eigen::Index>(u)).dot(y.row(static_cast<Eigen::Index>(i)));
            const double p = w > 0.0 ? 1.0 : 0.0;
            const double c = 1.0 + alpha * w;
            total += c * (p - s) * (p - s) - s * s;
        }
    }
    total += lambda * (x.squaredNorm() + y.squaredNorm());
    return total;
}

void gradient(const ImplicitMatrix& data, std::span<const double> users, std::span<const double> items,
              std::size_t dimension, double lambda, double alpha, std::span<double> user_grad,
              std::span<double> item_grad) {
    const auto nu = static_cast<Eigen::Index>(data.n_users);
    const auto ni = static_cast<Eigen::Index>(data.n_items);
    const auto d = static_cast<Eigen::Index>(dimension);
    const ConstMap x(users.data(), nu, d);
    const ConstMap y(items.data(), ni, d);
    Eigen::Map<RowMatrix> gx(user_grad.data(), nu, d);
    Eigen::Map<RowMatrix> gy(item_grad.data(), ni, d);
    // d/dS of the dense term is 2 S; observed pairs add 2[(c-1) s - c p].
    gx = 2.0 * x * (y.transpose() * y) + 2.0 * lambda * x;
    gy = 2.0 * y * (x.transpose() * x) + 2.0 * lambda * y;
    for (std::size_t u = 0; u < data.n_users; ++u) {
        for (auto k = data.user_ptr[u]; k < data.user_ptr[u + 1]; ++k) {
            const auto i = static_cast<Eigen::Index>(data.user_items[k]);
            const auto ui = static_cast<Eigen::Index>(u);
            const double w = data.user_weights[k];
            const double s = x.row(ui).dot(y.row(i));
            const double p = w > 0.0 ? 1.0 : 0.0;
            const double c = 1.0 + alpha * w;
            const double r = 2.0 * ((c - 1.0) * s - c * p);
            gx.row(ui) += r * y.row(i);
            gy.row(i) += r * x.row(ui);
        }
    }
}

void solve_side(const ImplicitMatrix& data, bool update_users, std::span<const double> fixed,
                std::span<double> target, std::size_t dimension, double lambda, double alpha) {
    const auto d = static_cast<Eigen::Index>(dimension);
    const std::size_t n_target = update_users ? data.n_users : data.n_items;
    const std::size_t n_fixed = update_users ? data.n_items : data.n_users;
    const auto& ptr = update_users ? data.user_ptr : data.item_ptr;
    const auto& idx = update_users ? data.user_items : data.item_users;
    const auto& wts = update_users ? data.user_weights : data.item_weights;

    const ConstMap f(fixed.data(), static_cast<Eigen::Index>(n_fixed), d);
    Eigen::Map<RowMatrix> t(target.data(), static_cast<Eigen::Index>(n_target), d);
    Eigen::MatrixXd gram = f.transpose() * f;
    gram.diagonal().array() += lambda;

    Eigen::MatrixXd a(d, d);
    Eigen::VectorXd b(d);
    for (std::size_t r = 0; r < n_target; ++r) {
        a = gram;
        b.setZero();
        for (auto k = ptr[r]; k < ptr[r + 1]; ++k) {
            const auto row = f.row(static_cast<Eigen::Index>(idx[k]));
            const double w = wts[k];
            const double c = 1.0 + alpha * w;
            a.noalias() += (c - 1.0) * row.transpose() * row;
            if (w > 0.0) b.noalias() += c * row.transpose();
        }
        t.row(static_cast<Eigen::Index>(r)) = a.ldlt().solve(b).transpose();
    }
}

}  // namespace als

EmbeddingSpace train_embeddings(std::span<const InteractionEvent> events, const Catalog& catalog,
                                const TrainingConfig& config) {
    validate(config);
    if (events.empty()) throw Error(ErrorCode::invalid_argument, "cannot train embeddings from an empty event list");

    std::map<std::string, std::size_t> user_ids;
    std::map<std::string, std::size_t> song_ids;
    for (const auto& ev : events) {
        if (!catalog.find_user(ev.user_id)) throw Error(ErrorCode::not_found, "event references unknown user '" + ev.user_id + "'");
        if (!catalog.find_song(ev.song_id)) throw Error(ErrorCode::not_found, "event references unknown song '" + ev.song_id + "'");
        if (!(ev.weight >= 0.0)) throw Error(ErrorCode::invalid_argument, "event weight must be non-negative");
        user_ids.emplace(ev.user_id, 0);
        song_ids.emplace(ev.song_id, 0);
    }
    // Lexicographic row order keeps the result independent of event order.
    std::vector<std::string> users, songs;
    for (auto& [id, row] : user_ids) {
        row = users.size();
        users.push_back(id);
    }
    for (auto& [id, row] : song_ids) {
        row = songs.size();
        songs.push_back(id);
    }

    std::vector<std::tuple<std::size_t, std::size_t, double>> triplets;
    triplets.reserve(events.size());
    for (const auto& ev : events) triplets.emplace_back(user_ids.at(ev.user_id), song_ids.at(ev.song_id), ev.weight);
    const auto data = als::ImplicitMatrix::from_triplets(users.size(), songs.size(), std::move(triplets));

    const std::size_t d = config.dimension;
    Rng rng(config.seed);
    const double bound = 0.5 / std::sqrt(static_cast<double>(d));
    std::vector<double> x(users.size() * d), y(songs.size() * d);
    for (auto& v : x) v = rng.uniform(-bound, bound);
    for (auto& v : y) v = rng.uniform(-bound, bound);

    std::vector<double> history;
    history.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        als::solve_side(data, true, y, x, d, config.regularization, config.alpha);
        als::solve_side(data, false, x, y, d, config.regularization, config.alpha);
        history.push_back(als::objective(data, x, y, d, config.regularization, config.alpha));
    }

    EmbeddingSpace space(config, VectorTable(d, std::move(users), std::move(x)),
                         VectorTable(d, std::move(songs), std::move(y)), std::move(history));
    if (d > space.songs().size()) {
        space.add_warning("embedding dimension " + std::to_string(d) + " exceeds the number of distinct songs (" +
                          std::to_string(space.songs().size()) + ")");
    }
    return space;
}

void save_space(const EmbeddingSpace& space, const std::filesystem::path& path) {
    std::ostringstream buf;
    BinaryWriter w(buf);
    w.magic(kMagic);
    w.u32(kEmbeddingSnapshotVersion);
    w.str(space.model_version());
    const auto& c = space.config();
    w.u64(c.dimension);
    w.u64(c.epochs);
    w.f64(c.regularization);
    w.f64(c.alpha);
    w.u64(c.seed);
    write_table(w, space.users());
    write_table(w, space.songs());
    w.u64(space.objective_history().size());
    w.f64s(space.objective_history());
    w.trailer();
    write_file_atomically(path, buf.str());
}

EmbeddingSpace load_space(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    BinaryReader r(in, path.string());
    r.expect_magic(kMagic);
    r.expect_version(kEmbeddingSnapshotVersion);
    auto version = r.str();
    TrainingConfig c;
    c.dimension = r.count(1 << 16);
    c.epochs = r.u64();
    c.regularization = r.f64();
    c.alpha = r.f64();
    c.seed = r.u64();
    auto users = read_table(r, c.dimension);
    auto songs = read_table(r, c.dimension);
    auto history = r.f64s(r.count());
    r.expect_trailer();
    return EmbeddingSpace(c, std::move(users), std::move(songs), std::move(history), std::move(version));
}

}  // namespace flowmoods
