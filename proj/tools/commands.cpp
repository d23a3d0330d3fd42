#include "commands.hpp"

#include <acerl/acerl.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace acerl::cli {
namespace {

using io::json;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

template <class T>
std::vector<T> get_or(const json& j, const char* key) {
    return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<std::vector<T>>() : std::vector<T>{};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string spec;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const json j = io::read_json(a.spec);
    io::check_version(j, a.spec);
    std::string prefix = a.out;
    if (prefix.empty()) prefix = j.value("output", std::string("simulated"));
    const std::string design = j.value("design", std::string("sparse"));

    json truth;
    truth["schema_version"] = io::kSchemaVersion;
    truth["design"] = design;
    NetworkDataset data;
    Matrix q_star;
    try {
        if (design == "sparse") {
            sim::SparseSimSpec s;
            s.n = j.value("n", s.n);
            s.v = j.value("v", s.v);
            s.r = j.value("r", s.r);
            s.s_star = j.value("s_star", s.s_star);
            s.sigma_xi = j.value("sigma_xi", s.sigma_xi);
            s.seed = j.value("seed", s.seed);
            auto sim = sim::gen_sparse(s);
            truth["spec"] = {{"n", s.n}, {"v", s.v}, {"r", s.r}, {"s_star", s.s_star}, {"sigma_xi", s.sigma_xi},
                             {"seed", s.seed}};
            truth["support"] = sim.support;
            truth["labels"] = sim.labels;
            data = std::move(sim.data);
            q_star = std::move(sim.q_star);
        } else if (design == "community") {
            sim::CommunitySimSpec s;
            s.n = j.value("n", s.n);
            s.v = j.value("v", s.v);
            s.r = j.value("r", s.r);
            s.G = j.value("G", s.G);
            s.sigma_xi = j.value("sigma_xi", s.sigma_xi);
            s.jitter = j.value("jitter", s.jitter);
            s.seed = j.value("seed", s.seed);
            auto sim = sim::gen_community(s);
            truth["spec"] = {{"n", s.n}, {"v", s.v},           {"r", s.r},           {"G", s.G},
                             {"sigma_xi", s.sigma_xi}, {"jitter", s.jitter}, {"seed", s.seed}};
            truth["G"] = s.G;
            truth["membership"] = sim.membership;
            truth["levels"] = sim.levels;
            truth["labels"] = sim.labels;
            data = std::move(sim.data);
            q_star = std::move(sim.q_star);
        } else {
            throw SchemaError(a.spec + ": unknown design '" + design + "'");
        }
    } catch (const json::exception& e) {
        throw SchemaError(a.spec + ": " + e.what());
    }

    const fs::path csv = prefix + ".csv";
    const fs::path qpath = prefix + ".qstar.csv";
    const fs::path tpath = prefix + ".truth.json";
    truth["d"] = data.edges();
    truth["q_star_file"] = qpath.filename().string();
    io::write_dataset_csv(csv, data);
    io::write_matrix_csv(qpath, q_star);
    io::write_file(tpath, truth.dump(1) + "\n");
    out << csv.string() << "\n" << tpath.string() << "\n" << qpath.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct SplitArgs {
    double frac = 0.0;  // 0: no split
    std::uint64_t seed = 0;
};

NetworkDataset training_part(const NetworkDataset& data, const SplitArgs& split) {
    if (split.frac <= 0.0) return data;
    return sim::split_train_test(data, split.frac, split.seed).first;
}

NetworkDataset load_dataset(const std::string& path) {
    return fs::is_directory(path) ? io::read_adjacency_folder(path) : io::read_dataset_csv(path);
}

struct FitArgs {
    std::string data;
    std::string out = "model.json";
    std::string method = "acerl";
    std::string config;
    Index r = 1;
    Index s = 0;
    double eta = 1.0;
    int inner = 0;
    int outer = 0;
    std::uint64_t seed = 0;
    std::string init;
    SplitArgs split;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
    const NetworkDataset train = training_part(load_dataset(a.data), a.split);
    AcerlConfig cfg;
    cfg.r = a.r;
    cfg.s = a.s;
    cfg.eta = a.eta;
    cfg.inner_iters = a.inner;
    cfg.outer_iters = a.outer;
    cfg.seed = a.seed;
    if (!a.init.empty()) cfg.init = io::parse_init(a.init);
    if (!a.config.empty()) {
        const json j = io::read_json(a.config);
        io::check_version(j, a.config);
        cfg = io::config_from_json(j, cfg);
    }

    if (a.method == "spca") {
        const Index s = cfg.s > 0 ? std::min(cfg.s, train.edges()) : train.edges();
        const SpcaResult res = fit_spca(train, cfg.r, std::max(s, cfg.r));
        io::save_model(res, a.out);
        out << "method spca  iterations " << res.iterations << (res.converged ? " (converged)" : "")
            << "  support " << res.support.size() << "\n";
    } else if (a.method == "acerl") {
        const FitResult res = fit(train, cfg);
        io::save_model(res, a.out);
        out << "method acerl  d " << train.edges() << "  n " << train.subjects() << "  r " << res.config.r << "  s "
            << res.config.s << "  init " << io::to_string(*res.config.init) << "\n";
        out << "k\tmean_p\tsurrogate_loss\tsupport\n";
        for (const auto& t : res.trace)
            out << t.k << "\t" << io::format_double(t.mean_p) << "\t" << io::format_double(t.surrogate_loss) << "\t"
                << t.support_size << "\n";
    } else {
        throw InvalidArgument("unknown method '" + a.method + "' (expected acerl or spca)");
    }
    out << "model written to " << a.out << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// tasks

struct TasksArgs {
    std::string model;
    std::string data;
    std::string truth;
    std::string tasks = "classify,select,community,error";
    std::string out;
    Index s = 0;
    Index G = 0;
    SplitArgs split{0.6, 0};
    int restarts = 20;
};

int cmd_tasks(const TasksArgs& a, std::ostream& out) {
    const io::StoredModel model = io::load_model(a.model);
    const NetworkDataset data = load_dataset(a.data);
    const EmbeddingMatrix q = harness::edge_embedding(model);
    if (q.edges() != data.edges())
        throw InvalidArgument("model has " + std::to_string(q.edges()) + " edges but the dataset has " +
                              std::to_string(data.edges()));
    json truth;
    if (!a.truth.empty()) {
        truth = io::read_json(a.truth);
        io::check_version(truth, a.truth);
    }

    json result;
    result["schema_version"] = io::kSchemaVersion;
    result["method"] = harness::method_name(model);
    for (const auto& task : split_list(a.tasks)) {
        if (task == "classify") {
            const auto labels = get_or<int>(truth, "labels");
            if (Index(labels.size()) != data.subjects())
                throw InvalidArgument("classify: the truth file must provide one label per subject");
            const auto split = sim::split_indices(data.subjects(), a.split.frac, a.split.seed);
            auto pick = [&](const std::vector<Index>& idx) {
                std::vector<int> y;
                for (Index i : idx) y.push_back(labels[std::size_t(i)]);
                return y;
            };
            const auto train = data.select_subjects(split.train);
            const auto test = data.select_subjects(split.test);
            const double acc = harness::classification_task(model, train.X, pick(split.train), test.X, pick(split.test));
            result["classify"] = {{"accuracy", acc}, {"train", split.train.size()}, {"test", split.test.size()}};
        } else if (task == "select") {
            Index s = a.s;
            if (s <= 0) s = q.row_sparsity() > 0 ? q.row_sparsity() : q.edges();
            const auto selected = select_edges(q, std::min(s, q.edges()));
            json j{{"s", s}, {"selected", selected}};
            const auto support = get_or<Index>(truth, "support");
            if (!support.empty()) j["recall"] = metrics::selection_recall(selected, support);
            result["select"] = std::move(j);
        } else if (task == "community") {
            Index G = a.G > 0 ? a.G : truth.value("G", Index(0));
            if (G <= 0) throw InvalidArgument("community: pass --G or a truth file with G");
            KMeansOptions km;
            km.restarts = a.restarts;
            km.seed = a.split.seed;
            const auto est = spectral_communities(build_similarity(q, data.edge_map), G, km);
            json j{{"G", G}, {"labels", est.labels()}};
            const auto membership = get_or<int>(truth, "membership");
            if (!membership.empty()) {
                const auto losses =
                    metrics::misclustering_losses(est, CommunityAssignment::from_labels(membership, G));
                j["rand_index"] = metrics::rand_index(est.labels(), membership);
                j["L"] = losses.overall;
                j["L_tilde"] = losses.worst_case;
            }
            result["community"] = std::move(j);
        } else if (task == "error") {
            if (!truth.contains("q_star_file")) throw InvalidArgument("error: the truth file has no q_star_file");
            const fs::path qpath = fs::path(a.truth).parent_path() / truth.at("q_star_file").get<std::string>();
            result["error"] = {{"gram_error", metrics::gram_error(q.Q, io::read_matrix_csv(qpath))}};
        } else {
            throw InvalidArgument("unknown task '" + task + "'");
        }
    }
    const std::string text = result.dump(2) + "\n";
    if (!a.out.empty()) io::write_file(a.out, text);
    out << text;
    return kOk;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
    std::string plan;
    std::string output_dir;
    int threads = -1;
};

int cmd_experiment(const ExperimentArgs& a, std::ostream& out, std::ostream& err) {
    harness::ExperimentPlan plan = harness::plan_from_json(io::read_json(a.plan));
    if (!a.output_dir.empty()) plan.output_dir = a.output_dir;
    if (a.threads >= 0) plan.threads = a.threads;
    const auto results = harness::run_experiment(plan, [&](const std::string& msg) { err << msg << "\n"; });
    out << harness::results_table(results);
    out << "results written to " << (fs::path(plan.output_dir) / "results.csv").string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
    std::string data;
    std::string model;
    std::string out_dir = ".";
    Index r_max = 20;
};

int cmd_tune(const TuneArgs& a, std::ostream& out) {
    const NetworkDataset data = load_dataset(a.data);
    const Index r_max = a.r_max;
    if (r_max < 1 || r_max > std::min(data.edges(), data.subjects()))
        throw InvalidArgument("--r-max must be in [1, min(d, n)] = [1, " +
                              std::to_string(std::min(data.edges(), data.subjects())) + "]");
    const Vector ev = metrics::explained_variance_profile(data, r_max);
    std::string text = "component,fraction\n";
    for (Index k = 0; k < ev.size(); ++k) text += std::to_string(k + 1) + "," + io::format_double(ev[k]) + "\n";
    const fs::path evpath = fs::path(a.out_dir) / "explained_variance.csv";
    io::write_file(evpath, text);
    out << evpath.string() << "\n";

    if (!a.model.empty()) {
        const auto q = harness::edge_embedding(io::load_model(a.model));
        if (q.edges() != data.edges()) throw InvalidArgument("model and dataset edge counts differ");
        const Vector norms = q.row_norms();
        std::vector<Index> order(static_cast<std::size_t>(norms.size()));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return norms[x] > norms[y]; });
        std::string nt = "rank,edge,norm\n";
        for (std::size_t k = 0; k < order.size(); ++k)
            nt += std::to_string(k + 1) + "," + std::to_string(order[k]) + "," + io::format_double(norms[order[k]]) + "\n";
        const fs::path npath = fs::path(a.out_dir) / "edge_norms.csv";
        io::write_file(npath, nt);
        out << npath.string() << "\n";
    }
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive contrastive edge representation learning"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset from a JSON spec");
    sim->add_option("spec", sim_args.spec, "Simulation spec (JSON)")->required();
    sim->add_option("-o,--out", sim_args.out, "Output prefix (default: the spec's \"output\" field)");

    FitArgs fit_args;
    auto* fitc = app.add_subcommand("fit", "Fit an edge embedding");
    fitc->add_option("data", fit_args.data, "Dataset CSV or folder of adjacency CSVs")->required();
    fitc->add_option("-o,--out", fit_args.out, "Model metadata path");
    fitc->add_option("--method", fit_args.method, "acerl or spca")->check(CLI::IsMember({"acerl", "spca"}));
    fitc->add_option("--config", fit_args.config, "Config JSON; its fields override flags");
    fitc->add_option("--r", fit_args.r, "Embedding rank");
    fitc->add_option("--s", fit_args.s, "Row sparsity (0 = all edges)");
    fitc->add_option("--eta", fit_args.eta, "Step size");
    fitc->add_option("--inner", fit_args.inner, "Inner iterations (0 = ceil(log n))");
    fitc->add_option("--outer", fit_args.outer, "Outer iterations (0 = ceil(log n))");
    fitc->add_option("--seed", fit_args.seed, "Mask seed");
    fitc->add_option("--init", fit_args.init, "fantope or gram_pca")->check(CLI::IsMember({"fantope", "gram_pca"}));
    fitc->add_option("--split-frac", fit_args.split.frac, "Fit on a random training fraction (0 = all subjects)");
    fitc->add_option("--split-seed", fit_args.split.seed, "Split seed");

    TasksArgs task_args;
    auto* tasks = app.add_subcommand("tasks", "Run downstream tasks with a fitted model");
    tasks->add_option("--model", task_args.model, "Model metadata path")->required();
    tasks->add_option("--data", task_args.data, "Dataset CSV or folder")->required();
    tasks->add_option("--truth", task_args.truth, "Ground-truth sidecar JSON");
    tasks->add_option("--tasks", task_args.tasks, "Comma-separated subset of classify,select,community,error");
    tasks->add_option("--s", task_args.s, "Number of edges to select (default: model support size)");
    tasks->add_option("--G", task_args.G, "Number of communities");
    tasks->add_option("--restarts", task_args.restarts, "k-means restarts");
    tasks->add_option("--split-frac", task_args.split.frac, "Training fraction for classify");
    tasks->add_option("--split-seed", task_args.split.seed, "Split seed");
    tasks->add_option("-o,--out", task_args.out, "Also write the metrics JSON here");

    ExperimentArgs exp_args;
    auto* exp = app.add_subcommand("experiment", "Run a replication plan");
    exp->add_option("plan", exp_args.plan, "Plan JSON")->required();
    exp->add_option("--output-dir", exp_args.output_dir, "Override the plan's output directory");
    exp->add_option("--threads", exp_args.threads, "Worker threads (0 = hardware concurrency)");

    TuneArgs tune_args;
    auto* tune = app.add_subcommand("tune", "Write tuning diagnostics for r and s");
    tune->add_option("data", tune_args.data, "Dataset CSV or folder")->required();
    tune->add_option("--r-max", tune_args.r_max, "Number of explained-variance components");
    tune->add_option("--model", tune_args.model, "Fitted model for the edge-norm profile");
    tune->add_option("-o,--out-dir", tune_args.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*sim) return cmd_simulate(sim_args, out);
        if (*fitc) return cmd_fit(fit_args, out);
        if (*tasks) return cmd_tasks(task_args, out);
        if (*exp) return cmd_experiment(exp_args, out, err);
        if (*tune) return cmd_tune(tune_args, out);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}

} // namespace acerl::cli
