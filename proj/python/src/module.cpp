// Python bindings for snapshot loading, sessions, the ANN index and metrics.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowmoods/ann_index.hpp"
#include "flowmoods/error.hpp"
#include "flowmoods/mood.hpp"
#include "flowmoods/mood_classifier.hpp"
#include "flowmoods/pipeline.hpp"
#include "flowmoods/session.hpp"
#include "flowmoods/simulator.hpp"

namespace py = pybind11;
namespace fm = flowmoods;

namespace {

using Matrix = py::array_t<double, py::array::c_style | py::array::forcecast>;

fm::Mood to_mood(const std::string& text) {
    if (auto m = fm::parse_mood_id(text)) return *m;
    if (auto m = fm::parse_mood_name(text)) return *m;
    throw fm::Error(fm::ErrorCode::invalid_argument, "unknown mood '" + text + "'");
}

std::optional<fm::Mood> to_optional_mood(const std::optional<std::string>& text) {
    if (!text) return std::nullopt;
    return to_mood(*text);
}

std::vector<double> to_vector(const Matrix& a) {
    if (a.ndim() != 1) throw fm::Error(fm::ErrorCode::dimension_mismatch, "expected a 1-d array");
    return {a.data(), a.data() + a.shape(0)};
}

fm::VectorTable to_table(const std::vector<std::string>& ids, const Matrix& vectors) {
    if (vectors.ndim() != 2) throw fm::Error(fm::ErrorCode::dimension_mismatch, "expected a 2-d array");
    if (static_cast<std::size_t>(vectors.shape(0)) != ids.size()) {
        throw fm::Error(fm::ErrorCode::dimension_mismatch, "ids and vector rows differ in length");
    }
    return fm::VectorTable(static_cast<std::size_t>(vectors.shape(1)), ids,
                           std::vector<double>(vectors.data(), vectors.data() + vectors.size()));
}

py::list neighbors_to_list(const fm::NeighborList& list) {
    py::list out;
    for (const auto& n : list) out.append(py::make_tuple(n.song_id, n.similarity));
    return out;
}

struct Stack {
    std::shared_ptr<const fm::ModelStack> stack;
    fm::SessionConfig config;

    fm::SessionDeps deps() const { return stack->deps(config); }
};

struct Session {
    fm::SessionState state;
    fm::SessionDeps deps;
};

std::string build_snapshot(const std::filesystem::path& dir, std::size_t users, std::size_t songs,
                           std::size_t artists, std::size_t labels_per_mood, std::size_t dimension,
                           std::size_t epochs, std::size_t trees, std::uint64_t seed) {
    fm::SimConfig sim;
    sim.n_users = users;
    sim.n_songs = songs;
    sim.n_artists = artists;
    sim.labels_per_mood = labels_per_mood;
    sim.seed = seed;
    fm::PipelineConfig config;
    config.embedding.dimension = dimension;
    config.embedding.epochs = epochs;
    config.forest.n_trees = trees;
    config.session.candidate_k = std::min<std::size_t>(config.session.candidate_k, songs);
    config.session.min_candidates = std::min<std::size_t>(config.session.min_candidates, songs / 20);

    std::uint64_t digest = fm::fnv1a(std::to_string(seed));
    for (std::size_t v : {users, songs, artists, labels_per_mood, dimension, epochs, trees}) {
        digest = fm::fnv1a(std::to_string(v), digest);
    }
    const auto version = fm::format_model_version(digest);
    py::gil_scoped_release release;
    const auto world = fm::generate_world(sim);
    const auto stack = fm::build_stack(world.catalog, world.interactions, world.labels, config, version);
    std::filesystem::create_directories(dir);
    fm::save_stack(stack, world.interactions, world.labels, dir);
    return version;
}

}  // namespace

PYBIND11_MODULE(_flowmoods, m) {
    m.doc() = "Native core of the flowmoods package";

    static py::exception<fm::Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const fm::Error& e) {
            py::object instance = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
            instance.attr("code") = std::string(fm::error_code_name(e.code()));
            PyErr_SetObject(error.ptr(), instance.ptr());
        }
    });

    m.def("moods", [] {
        py::list out;
        for (fm::Mood mood : fm::kAllMoods) {
            out.append(py::make_tuple(std::string(fm::mood_id(mood)), std::string(fm::mood_name(mood))));
        }
        return out;
    }, "(id, display name) for each of the six moods.");

    m.def("build_snapshot", &build_snapshot, py::arg("directory"), py::arg("users") = 120, py::arg("songs") = 900,
          py::arg("artists") = 90, py::arg("labels_per_mood") = 200, py::arg("dimension") = 16,
          py::arg("epochs") = 8, py::arg("trees") = 30, py::arg("seed") = 3,
          "Generates a synthetic world, trains every model and writes a snapshot directory. "
          "Returns the model version.");

    m.def("evaluate_scores", [](const std::vector<double>& scores, const std::vector<bool>& labels) {
        std::unique_ptr<bool[]> raw(new bool[labels.size()]);
        for (std::size_t i = 0; i < labels.size(); ++i) raw[i] = labels[i];
        const auto r = fm::evaluate_scores(scores, std::span<const bool>(raw.get(), labels.size()));
        py::dict out;
        out["auc"] = r.auc;
        out["accuracy_at_half"] = r.accuracy_at_half;
        out["true_positive"] = r.true_positive;
        out["false_positive"] = r.false_positive;
        out["true_negative"] = r.true_negative;
        out["false_negative"] = r.false_negative;
        return out;
    }, py::arg("scores"), py::arg("labels"));

    m.def("exact_topk", [](const std::vector<std::string>& ids, const Matrix& vectors, const Matrix& query,
                           std::size_t k) {
        const auto q = to_vector(query);
        return neighbors_to_list(fm::exact_topk(to_table(ids, vectors), q, k));
    }, py::arg("ids"), py::arg("vectors"), py::arg("query"), py::arg("k"));

    py::class_<fm::AnnIndex>(m, "AnnIndex")
        .def(py::init([](const std::vector<std::string>& ids, const Matrix& vectors, std::size_t n_cells,
                         std::size_t n_probe, std::uint64_t seed) {
                 fm::IndexConfig config;
                 config.n_cells = n_cells;
                 config.n_probe = n_probe;
                 config.seed = seed;
                 return fm::build_index(to_table(ids, vectors), config);
             }),
             py::arg("ids"), py::arg("vectors"), py::arg("n_cells") = 0, py::arg("n_probe") = 0,
             py::arg("seed") = 42)
        .def_static("load", &fm::load_index, py::arg("path"))
        .def("save", [](const fm::AnnIndex& index, const std::filesystem::path& path) { fm::save_index(index, path); })
        .def_property_readonly("n_cells", &fm::AnnIndex::n_cells)
        .def_property_readonly("default_n_probe", &fm::AnnIndex::default_n_probe)
        .def_property_readonly("dimension", &fm::AnnIndex::dimension)
        .def("__len__", &fm::AnnIndex::size)
        .def("query", [](const fm::AnnIndex& index, const Matrix& query, std::size_t k,
                         std::optional<std::size_t> n_probe) {
            const auto q = to_vector(query);
            return neighbors_to_list(index.query(q, k, n_probe.value_or(index.default_n_probe())));
        }, py::arg("query"), py::arg("k"), py::arg("n_probe") = py::none())
        .def("recall_at_k", [](const fm::AnnIndex& index, const Matrix& queries, std::size_t k, std::size_t n_probe) {
            if (queries.ndim() != 2) throw fm::Error(fm::ErrorCode::dimension_mismatch, "expected a 2-d array");
            std::vector<std::vector<double>> rows;
            for (py::ssize_t i = 0; i < queries.shape(0); ++i) {
                rows.emplace_back(queries.data(i, 0), queries.data(i, 0) + queries.shape(1));
            }
            return fm::recall_at_k(index, rows, k, n_probe);
        }, py::arg("queries"), py::arg("k"), py::arg("n_probe"));

    py::class_<Session>(m, "Session")
        .def("next", [](Session& s) { return fm::next_track(s.state, s.deps); })
        .def("feedback", [](Session& s, const std::string& kind, const std::string& song_id) {
            const auto parsed = fm::parse_feedback_kind(kind);
            if (!parsed) throw fm::Error(fm::ErrorCode::invalid_argument, "unknown feedback kind '" + kind + "'");
            fm::apply_feedback(s.state, {*parsed, song_id, 0}, s.deps);
        }, py::arg("kind"), py::arg("song_id"))
        .def_property_readonly("user_id", [](const Session& s) { return s.state.user_id; })
        .def_property_readonly("mood", [](const Session& s) -> std::optional<std::string> {
            if (!s.state.mood) return std::nullopt;
            return std::string(fm::mood_id(*s.state.mood));
        })
        .def_property_readonly("history", [](const Session& s) { return s.state.history; })
        .def_property_readonly("queue", [](const Session& s) { return s.state.queue; })
        .def_property_readonly("fallback_active", [](const Session& s) { return s.state.fallback_active; })
        .def_property_readonly("threshold", [](const Session& s) { return s.state.threshold; })
        .def("artist_weight", [](const Session& s, const std::string& artist) {
            return s.state.artist_weight(artist);
        })
        .def("to_json", [](const Session& s) { return fm::session_to_json(s.state).dump(); });

    py::class_<Stack>(m, "Stack")
        .def_static("load", [](const std::filesystem::path& dir) {
            Stack s;
            s.stack = std::make_shared<const fm::ModelStack>(fm::load_stack(dir));
            return s;
        }, py::arg("directory"))
        .def_property_readonly("model_version", [](const Stack& s) { return s.stack->model_version; })
        .def("users", [](const Stack& s) {
            std::vector<std::string> out;
            for (const auto& u : s.stack->catalog->users()) out.push_back(u.user_id);
            return out;
        })
        .def("eligible_users", [](const Stack& s) {
            std::vector<std::string> out;
            for (const auto& u : s.stack->catalog->users()) {
                if (fm::eligible_for_flow(u, s.config.eligibility_threshold)) out.push_back(u.user_id);
            }
            return out;
        })
        .def("song_ids", [](const Stack& s) {
            std::vector<std::string> out;
            for (const auto& song : s.stack->catalog->songs()) out.push_back(song.song_id);
            return out;
        })
        .def("artist_of", [](const Stack& s, const std::string& song) { return s.stack->catalog->song(song).artist_id; })
        .def("mood_score", [](const Stack& s, const std::string& song, const std::string& mood) {
            return s.stack->scores->score(song, to_mood(mood));
        }, py::arg("song_id"), py::arg("mood"))
        .def("affinity", [](const Stack& s, const std::string& user, const std::string& song) {
            return fm::affinity(*s.stack->space, user, song);
        }, py::arg("user_id"), py::arg("song_id"))
        .def("candidates", [](const Stack& s, const std::string& user, std::optional<std::string> mood) {
            return neighbors_to_list(fm::candidate_pool(user, to_optional_mood(mood), s.deps()));
        }, py::arg("user_id"), py::arg("mood") = py::none())
        .def("set_threshold", [](Stack& s, const std::string& mood, double tau) {
            auto next = s.config;
            next.tau[fm::mood_index(to_mood(mood))] = tau;
            fm::validate(next);
            s.config = next;
        }, py::arg("mood"), py::arg("tau"))
        .def("start", [](const Stack& s, const std::string& user, std::optional<std::string> mood,
                         std::uint64_t seed) {
            Session session{fm::start_session(user, to_optional_mood(mood), s.deps(), seed), s.deps()};
            return session;
        }, py::arg("user_id"), py::arg("mood") = py::none(), py::arg("seed") = 0);
}
