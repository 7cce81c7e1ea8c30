// flowmoods: ingest -> train -> score -> index -> fallback -> serve / simulate / report.
#include <csignal>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowmoods/binary_io.hpp"
#include "flowmoods/pipeline.hpp"
#include "flowmoods/service.hpp"
#include "flowmoods/simulator.hpp"
#include "flowmoods/text_util.hpp"

namespace fs = std::filesystem;
using namespace flowmoods;

namespace {

struct Options {
    fs::path workdir = "work";
    std::uint64_t seed = 42;

    // ingest
    fs::path catalog_in, interactions_in, labels_in;
    bool synthetic = false;
    SimConfig sim;

    PipelineConfig pipeline;
    double tau = 0.5;

    // serve
    std::string listen = "127.0.0.1:8080";
    fs::path snapshot_dir;
    fs::path webapp_dir;
    long idle_timeout = 24 * 3600;

    // simulate / report
    fs::path log_path;
    fs::path distribution_path;
    std::size_t recall_k = 50;
};

void note(const std::string& msg) { std::cerr << "flowmoods: " << msg << '\n'; }

fs::path artifact_path(const Options& o, const char* name) { return o.workdir / name; }

fs::path require_artifact(const Options& o, const char* name, const char* producer) {
    auto path = artifact_path(o, name);
    if (!fs::exists(path)) {
        throw Error(ErrorCode::missing_artifact,
                    "missing " + path.string() + "; run `flowmoods " + producer + "` first");
    }
    return path;
}

void apply_seed(Options& o) {
    o.sim.seed = o.seed;
    o.pipeline.seed = o.seed;
    o.pipeline.embedding.seed = o.seed;
    o.pipeline.index.seed = o.seed;
    o.pipeline.session.tau.fill(o.tau);
}

Catalog workdir_catalog(const Options& o) { return load_catalog(require_artifact(o, artifact::catalog, "ingest")); }

std::vector<InteractionEvent> workdir_interactions(const Options& o, const Catalog& catalog) {
    auto load = load_interactions(require_artifact(o, artifact::interactions, "ingest"), catalog);
    return std::move(load.events);
}

std::vector<MoodLabel> workdir_labels(const Options& o, const Catalog& catalog) {
    auto load = load_labels(require_artifact(o, artifact::labels, "ingest"), catalog);
    return std::move(load.labels);
}

PipelineManifest workdir_manifest(const Options& o) { return load_manifest(artifact_path(o, artifact::manifest)); }

int cmd_ingest(const Options& o, const std::vector<std::pair<std::string, std::string>>& overrides) {
    fs::create_directories(o.workdir);
    Catalog catalog;
    std::vector<InteractionEvent> events;
    std::vector<MoodLabel> labels;
    if (o.synthetic) {
        auto world = generate_world(o.sim);
        catalog = std::move(world.catalog);
        events = std::move(world.interactions);
        labels = std::move(world.labels);
        note("generated " + std::to_string(catalog.songs().size()) + " songs, " +
             std::to_string(catalog.users().size()) + " users, " + std::to_string(events.size()) + " interactions");
    } else {
        if (o.catalog_in.empty() || o.interactions_in.empty() || o.labels_in.empty()) {
            throw Error(ErrorCode::invalid_argument,
                        "ingest needs --catalog, --interactions and --labels, or --synthetic");
        }
        catalog = load_catalog(o.catalog_in);
        auto il = load_interactions(o.interactions_in, catalog);
        for (const auto& w : il.warnings) note(w);
        events = std::move(il.events);
        auto ll = load_labels(o.labels_in, catalog);
        for (const auto& w : ll.warnings) note(w);
        labels = std::move(ll.labels);
    }
    save_catalog(catalog, artifact_path(o, artifact::catalog));
    save_interactions(events, artifact_path(o, artifact::interactions));
    save_labels(labels, artifact_path(o, artifact::labels));

    std::uint64_t digest = fnv1a(std::to_string(o.seed));
    for (const char* name : {artifact::catalog, artifact::interactions, artifact::labels}) {
        digest = fnv1a(read_file(artifact_path(o, name)), digest);
    }
    PipelineManifest manifest{format_model_version(digest), o.seed, overrides};
    save_manifest(manifest, artifact_path(o, artifact::manifest));
    std::cout << "model_version " << manifest.model_version << '\n';
    return 0;
}

int cmd_train_embeddings(const Options& o) {
    const auto manifest = workdir_manifest(o);
    const auto catalog = workdir_catalog(o);
    const auto events = workdir_interactions(o, catalog);
    auto space = train_embeddings(events, catalog, o.pipeline.embedding);
    space.set_model_version(manifest.model_version);
    for (const auto& w : space.warnings()) note(w);
    save_space(space, artifact_path(o, artifact::embeddings));
    const auto& h = space.objective_history();
    std::cout << "users " << space.users().size() << " songs " << space.songs().size() << " dim " << space.dimension()
              << " objective " << (h.empty() ? 0.0 : h.back()) << '\n';
    return 0;
}

nlohmann::ordered_json metrics_json(const std::array<std::optional<EvalMetrics>, kMoodCount>& metrics) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (Mood m : kAllMoods) {
        const auto& e = metrics[mood_index(m)];
        if (!e) continue;
        out[std::string(mood_name(m))] = {{"auc", e->auc},
                                          {"accuracy_at_half", e->accuracy_at_half},
                                          {"tp", e->true_positive},
                                          {"fp", e->false_positive},
                                          {"tn", e->true_negative},
                                          {"fn", e->false_negative}};
    }
    return out;
}

void print_metrics(const std::array<std::optional<EvalMetrics>, kMoodCount>& metrics) {
    for (Mood m : kAllMoods) {
        const auto& e = metrics[mood_index(m)];
        std::cout << std::left << std::setw(11) << mood_name(m);
        if (e) {
            std::cout << " auc " << text::format_fixed(e->auc, 4) << " accuracy "
                      << text::format_fixed(e->accuracy_at_half, 4) << '\n';
        } else {
            std::cout << " no holdout\n";
        }
    }
}

int cmd_train_moods(const Options& o) {
    const auto manifest = workdir_manifest(o);
    const auto catalog = workdir_catalog(o);
    const auto labels = workdir_labels(o, catalog);
    auto training = train_mood_forests(catalog, labels, o.pipeline, manifest.model_version);
    save_forests(training.forests, artifact_path(o, artifact::forests));
    nlohmann::ordered_json eval;
    eval["model_version"] = manifest.model_version;
    eval["seed"] = o.pipeline.seed;
    eval["holdout_fraction"] = o.pipeline.holdout_fraction;
    eval["holdout"] = metrics_json(training.holdout);
    write_file_atomically(artifact_path(o, artifact::eval), eval.dump(2) + "\n");
    print_metrics(training.holdout);
    std::cout << "trained in " << text::format_fixed(training.seconds, 2) << " s\n";
    return 0;
}

MoodForests workdir_forests(const Options& o, const PipelineManifest& manifest) {
    auto forests = load_forests(require_artifact(o, artifact::forests, "train-moods"));
    if (forests.model_version != manifest.model_version) {
        throw Error(ErrorCode::inconsistent_snapshot, "forests.snap has model_version '" + forests.model_version +
                                                          "' but the manifest has '" + manifest.model_version +
                                                          "'; rerun `flowmoods train-moods`");
    }
    return forests;
}

int cmd_score_catalog(const Options& o) {
    const auto manifest = workdir_manifest(o);
    const auto forests = workdir_forests(o, manifest);
    const auto catalog = workdir_catalog(o);
    auto scoring = score_catalog(forests, catalog);
    scoring.table.set_model_version(manifest.model_version);
    if (!scoring.skipped.empty()) note(std::to_string(scoring.skipped.size()) + " songs without audio embedding skipped");
    save_scores(scoring.table, artifact_path(o, artifact::scores));
    std::cout << "scored " << scoring.table.size() / kMoodCount << " songs\n";
    return 0;
}

int cmd_build_index(const Options& o) {
    const auto manifest = workdir_manifest(o);
    const auto space = load_space(require_artifact(o, artifact::embeddings, "train-embeddings"));
    auto index = build_index(space.songs(), o.pipeline.index);
    index.set_model_version(manifest.model_version);
    save_index(index, artifact_path(o, artifact::index));
    std::cout << "indexed " << index.size() << " songs in " << index.n_cells() << " cells, default n_probe "
              << index.default_n_probe() << '\n';
    return 0;
}

int cmd_build_fallback(const Options& o) {
    const auto manifest = workdir_manifest(o);
    const auto catalog = workdir_catalog(o);
    const auto events = workdir_interactions(o, catalog);
    const auto scores = load_scores(require_artifact(o, artifact::scores, "score-catalog"));
    auto pool = build_fallback_pools(catalog, scores, song_popularity(events), o.pipeline.session.tau,
                                     o.pipeline.fallback_size);
    pool.model_version = manifest.model_version;
    save_fallback_pool(pool, artifact_path(o, artifact::fallback));
    for (Mood m : kAllMoods) std::cout << mood_name(m) << ' ' << pool.pools[mood_index(m)].size() << '\n';
    return 0;
}

HttpServer* g_server = nullptr;

extern "C" void handle_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const Options& o) {
    const auto dir = o.snapshot_dir.empty() ? o.workdir : o.snapshot_dir;
    ServiceConfig config;
    config.session = o.pipeline.session;
    config.idle_timeout = std::chrono::seconds(o.idle_timeout);
    config.snapshot_dir = dir;
    Service service(std::make_shared<const ModelStack>(load_stack(dir)), config);
    HttpServer server(service);
    if (!o.webapp_dir.empty()) server.mount_static(o.webapp_dir);
    const auto [host, port] = parse_listen_address(o.listen);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "listening on http://" << host << ':' << bound << " model_version "
              << service.artifacts()->model_version << std::endl;
    server.run();
    g_server = nullptr;
    return 0;
}

int cmd_simulate(const Options& o) {
    const auto stack = load_stack(o.workdir);
    World world;
    world.catalog = *stack.catalog;
    const auto result = simulate_days(world, stack.deps(o.pipeline.session), o.sim);
    const auto out = o.log_path.empty() ? artifact_path(o, artifact::streams) : o.log_path;
    save_stream_log(result.log, out);
    std::cout << "streams " << result.log.size() << " sessions " << result.sessions_started << " errors "
              << result.session_errors << " skips " << result.skips << " likes " << result.likes << '\n';
    return 0;
}

int cmd_report(const Options& o) {
    const auto in = o.log_path.empty() ? require_artifact(o, artifact::streams, "simulate") : o.log_path;
    const auto days = mood_distribution(load_stream_log(in));
    const auto out = o.distribution_path.empty() ? artifact_path(o, artifact::distribution) : o.distribution_path;
    save_distribution(days, out);
    std::cout << std::left << std::setw(11) << "day";
    for (Mood m : kAllMoods) std::cout << ' ' << std::setw(10) << mood_name(m);
    std::cout << " streams\n";
    for (const auto& d : days) {
        std::cout << std::setw(11) << d.date;
        for (Mood m : kAllMoods) {
            std::cout << ' ' << std::setw(10) << (d.empty ? "-" : text::format_fixed(d.shares[mood_index(m)], 4));
        }
        std::cout << ' ' << d.total_streams << '\n';
    }
    const auto shape = check_usage_shape(days);
    const auto line = [](const char* what, bool holds) { std::cout << (holds ? "holds  " : "fails  ") << what << '\n'; };
    line("Motivation is the top mood every day", shape.motivation_top_every_day);
    line("Party share Fri-Sun above Mon-Thu", shape.party_weekend_above_weekday);
    line("Focus share Mon-Fri above Sat-Sun", shape.focus_weekday_above_weekend);
    line("Chill share on Sunday at least its weekly mean", shape.chill_sunday_at_least_weekly_mean);
    return 0;
}

int cmd_eval(const Options& o) {
    const auto manifest = workdir_manifest(o);
    const auto forests = workdir_forests(o, manifest);
    const auto catalog = workdir_catalog(o);
    const auto labels = workdir_labels(o, catalog);
    auto config = o.pipeline;
    // Reuse the split of the training run so holdout songs stay unseen.
    if (fs::exists(artifact_path(o, artifact::eval))) {
        const auto doc = nlohmann::json::parse(read_file(artifact_path(o, artifact::eval)));
        config.seed = doc.at("seed").get<std::uint64_t>();
        config.holdout_fraction = doc.at("holdout_fraction").get<double>();
    }
    print_metrics(evaluate_mood_forests(forests, catalog, labels, config));

    if (fs::exists(artifact_path(o, artifact::index)) && fs::exists(artifact_path(o, artifact::embeddings))) {
        const auto index = load_index(artifact_path(o, artifact::index));
        const auto space = load_space(artifact_path(o, artifact::embeddings));
        std::vector<std::vector<double>> queries;
        for (std::size_t i = 0; i < space.users().size() && queries.size() < 200; ++i) {
            const auto row = space.users().row(i);
            queries.emplace_back(row.begin(), row.end());
        }
        if (!queries.empty()) {
            const auto k = std::min(o.recall_k, index.size());
            std::cout << "ann recall@" << k << " n_probe " << index.default_n_probe() << ": "
                      << text::format_fixed(recall_at_k(index, queries, k, index.default_n_probe()), 4) << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Mood-aware radio recommender: training pipeline, session service and simulator"};
    app.set_config("--config", "", "TOML/INI file with option values; flags override it");
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", "flowmoods 0.1.0");

    auto* common = app.add_option_group("common");
    common->add_option("--workdir", o.workdir, "Artifact directory")->capture_default_str();
    common->add_option("--seed", o.seed, "Master seed")->capture_default_str();

    auto* world = app.add_option_group("synthetic world");
    world->add_option("--users", o.sim.n_users)->capture_default_str();
    world->add_option("--songs", o.sim.n_songs)->capture_default_str();
    world->add_option("--artists", o.sim.n_artists)->capture_default_str();
    world->add_option("--genres", o.sim.n_genres)->capture_default_str();
    world->add_option("--labels-per-mood", o.sim.labels_per_mood)->capture_default_str();
    world->add_option("--label-margin", o.sim.label_margin)->capture_default_str();
    world->add_option("--embedding-noise", o.sim.embedding_noise)->capture_default_str();
    world->add_option("--interactions-per-user", o.sim.interactions_per_user)->capture_default_str();

    auto* emb = app.add_option_group("embedding");
    emb->add_option("--dim", o.pipeline.embedding.dimension)->capture_default_str();
    emb->add_option("--epochs", o.pipeline.embedding.epochs)->capture_default_str();
    emb->add_option("--regularization", o.pipeline.embedding.regularization)->capture_default_str();
    emb->add_option("--alpha", o.pipeline.embedding.alpha, "Confidence scaling")->capture_default_str();

    auto* forest = app.add_option_group("mood forests");
    forest->add_option("--trees", o.pipeline.forest.n_trees)->capture_default_str();
    forest->add_option("--max-depth", o.pipeline.forest.max_depth)->capture_default_str();
    forest->add_option("--min-leaf", o.pipeline.forest.min_leaf)->capture_default_str();
    forest->add_option("--feature-subsample", o.pipeline.forest.feature_subsample)->capture_default_str();
    forest->add_option("--holdout", o.pipeline.holdout_fraction)->capture_default_str();

    auto* ann = app.add_option_group("index");
    ann->add_option("--cells", o.pipeline.index.n_cells, "0 = ceil(sqrt(N))")->capture_default_str();
    ann->add_option("--probe", o.pipeline.index.n_probe, "0 = ceil(cells / 4)")->capture_default_str();
    ann->add_option("--recall-k", o.recall_k)->capture_default_str();

    auto* sess = app.add_option_group("session");
    sess->add_option("--tau", o.tau, "Mood score threshold")->capture_default_str();
    sess->add_option("--fallback-size", o.pipeline.fallback_size)->capture_default_str();
    sess->add_option("--candidate-k", o.pipeline.session.candidate_k)->capture_default_str();
    sess->add_option("--min-candidates", o.pipeline.session.min_candidates)->capture_default_str();
    sess->add_option("--favorites-ratio", o.pipeline.session.favorites_ratio)->capture_default_str();
    sess->add_option("--artist-spacing", o.pipeline.session.artist_spacing)->capture_default_str();
    sess->add_option("--like-boost", o.pipeline.session.like_boost)->capture_default_str();
    sess->add_option("--skip-penalty", o.pipeline.session.skip_penalty)->capture_default_str();
    sess->add_option("--no-repeat-window", o.pipeline.session.no_repeat_window)->capture_default_str();
    sess->add_option("--eligibility-threshold", o.pipeline.session.eligibility_threshold)->capture_default_str();

    auto* sim = app.add_option_group("simulation");
    sim->add_option("--days", o.sim.n_days)->capture_default_str();
    sim->add_option("--sessions-per-user-day", o.sim.sessions_per_user_day)->capture_default_str();
    sim->add_option("--regular-share", o.sim.regular_flow_share)->capture_default_str();
    sim->add_option("--mean-session-length", o.sim.mean_session_length)->capture_default_str();
    sim->add_option("--log", o.log_path, "Stream log path (default <workdir>/streams.csv)");
    sim->add_option("--out", o.distribution_path, "Distribution path (default <workdir>/distribution.csv)");

    auto* serve_opts = app.add_option_group("service");
    serve_opts->add_option("--listen", o.listen, "host:port")->envname("FLOWMOODS_LISTEN")->capture_default_str();
    serve_opts->add_option("--webapp", o.webapp_dir, "Directory of the web player to serve at /")
        ->check(CLI::ExistingDirectory);
    serve_opts->add_option("--snapshot-dir", o.snapshot_dir, "Artifacts to serve (default --workdir)")
        ->envname("FLOWMOODS_SNAPSHOT_DIR");
    serve_opts->add_option("--idle-timeout", o.idle_timeout, "Seconds before an idle session is dropped")
        ->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "Validate inputs (or generate a synthetic world) into the workdir");
    ingest->add_option("--catalog", o.catalog_in, "Catalog JSONL")->check(CLI::ExistingFile);
    ingest->add_option("--interactions", o.interactions_in, "Interactions CSV")->check(CLI::ExistingFile);
    ingest->add_option("--labels", o.labels_in, "Mood labels CSV")->check(CLI::ExistingFile);
    ingest->add_flag("--synthetic", o.synthetic, "Generate catalog, interactions and labels");
    app.add_subcommand("train-embeddings", "Train user and song vectors from interactions");
    app.add_subcommand("train-moods", "Train one random forest per mood and report holdout metrics");
    app.add_subcommand("score-catalog", "Score every song for all six moods");
    app.add_subcommand("build-index", "Build the ANN index over song vectors");
    app.add_subcommand("build-fallback", "Build per-mood fallback pools");
    app.add_subcommand("serve", "Serve the /v1 HTTP API from a snapshot directory");
    app.add_subcommand("simulate", "Replay simulated days of listening through the session engine");
    app.add_subcommand("report", "Daily mood share table from a stream log");
    app.add_subcommand("eval", "Holdout AUC per mood and ANN recall");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    apply_seed(o);

    // File locations stay out of the manifest so a run reproduces byte for
    // byte in any directory.
    static const std::set<std::string> kLocations{"--help",   "--config", "--workdir", "--catalog",      "--interactions",
                                                  "--labels", "--log",    "--out",     "--listen",       "--snapshot-dir",
                                                  "--webapp"};
    std::vector<std::pair<std::string, std::string>> overrides;
    const auto collect = [&overrides](const CLI::App* scope, const auto& self) -> void {
        for (const auto* opt : scope->get_options()) {
            if (opt->count() == 0 || kLocations.count(opt->get_name())) continue;
            overrides.emplace_back(opt->get_name(), opt->as<std::string>());
        }
        for (const auto* child : scope->get_subcommands([](const CLI::App*) { return true; })) self(child, self);
    };
    collect(&app, collect);

    const auto* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    try {
        validate(o.pipeline.session);
        if (name == "ingest") return cmd_ingest(o, overrides);
        if (name == "train-embeddings") return cmd_train_embeddings(o);
        if (name == "train-moods") return cmd_train_moods(o);
        if (name == "score-catalog") return cmd_score_catalog(o);
        if (name == "build-index") return cmd_build_index(o);
        if (name == "build-fallback") return cmd_build_fallback(o);
        if (name == "serve") return cmd_serve(o);
        if (name == "simulate") return cmd_simulate(o);
        if (name == "report") return cmd_report(o);
        if (name == "eval") return cmd_eval(o);
    } catch (const Error& e) {
        std::cerr << "flowmoods " << name << ": error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "flowmoods " << name << ": error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
