#pragma once

#include <acerl/downstream.hpp>
#include <acerl/estimator.hpp>
#include <acerl/io.hpp>
#include <acerl/metrics.hpp>
#include <acerl/simgen.hpp>
#include <acerl/spca.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace acerl::harness {

using io::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Fitted-model views shared by the CLI and the replication harness

/// Edge embedding of a stored model: Q_hat for ACERL, U Lambda^{1/2} for sPCA.
inline EmbeddingMatrix edge_embedding(const io::StoredModel& model) {
    if (const auto* fit = std::get_if<FitResult>(&model)) return fit->q_hat;
    return std::get<SpcaResult>(model).embedding();
}

inline SubjectEmbedding embed_subjects(const io::StoredModel& model, const Matrix& x) {
    if (const auto* fit = std::get_if<FitResult>(&model)) return subject_embeddings(fit->q_hat, x);
    return {spca_embed(std::get<SpcaResult>(model), x)};
}

inline std::string method_name(const io::StoredModel& model) {
    return std::holds_alternative<FitResult>(model) ? "acerl" : "spca";
}

/// Train a classifier on `train` embeddings and report accuracy on `test`.
inline double classification_task(const io::StoredModel& model, const Matrix& x_train,
                                   const std::vector<int>& y_train, const Matrix& x_test,
                                   const std::vector<int>& y_test) {
    const auto clf = fit_classifier(embed_subjects(model, x_train), y_train);
    return metrics::classification_accuracy(clf.predict(embed_subjects(model, x_test)), y_test);
}

// ---------------------------------------------------------------------------
// Experiment plans

/// 64-bit FNV-1a followed by the splitmix64 finalizer.
inline std::uint64_t stable_hash64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

enum class Design { sparse, community };

struct Cell {
    Design design = Design::sparse;
    Index n = 0;
    Index v = 0;
    Index r = 0;
    double sigma_xi = 0.0;

    Index d() const { return v * (v - 1) / 2; }

    std::string key() const {
        std::ostringstream os;
        os << (design == Design::sparse ? "sparse" : "community") << "_n" << n << "_v" << v << "_r" << r << "_sigma"
           << io::format_double(sigma_xi);
        return os.str();
    }
};

struct ExperimentPlan {
    Design design = Design::sparse;
    std::vector<Index> n{500};
    std::vector<Index> v{45};
    std::vector<Index> r{10};
    std::vector<double> sigma_xi{0.0};
    Index s_star = 50;
    Index G = 3;
    double jitter = 0.0;
    Index s = 0;       // working sparsity; 0: 3 s* (sparse) or d (community)
    Index spca_s = 0;  // 0: same as s
    std::vector<std::string> methods{"acerl", "spca"};
    std::vector<std::string> tasks{"classify", "select", "error"};
    int reps = 50;
    std::uint64_t base_seed = 1;
    double train_frac = 0.6;
    std::string output_dir = "results";
    int threads = 0;
    AcerlConfig acerl{};
    KMeansOptions kmeans{};

    std::vector<Cell> cells() const {
        std::vector<Cell> out;
        for (Index nn : n)
            for (Index vv : v)
                for (Index rr : r)
                    for (double sg : sigma_xi) out.push_back({design, nn, vv, rr, sg});
        return out;
    }

    Index working_s(const Cell& c) const {
        if (s > 0) return std::min(s, c.d());
        return design == Design::sparse ? std::min(3 * s_star, c.d()) : c.d();
    }

    Index spca_working_s(const Cell& c) const {
        return spca_s > 0 ? std::min(std::max(spca_s, c.r), c.d()) : std::max(working_s(c), c.r);
    }

    void validate() const {
        detail::require(!n.empty() && !v.empty() && !r.empty() && !sigma_xi.empty(), "plan: empty design grid");
        detail::require(!methods.empty(), "plan: no methods");
        detail::require(!tasks.empty(), "plan: no tasks");
        detail::require(reps >= 1, "plan: reps must be at least 1");
        for (const auto& m : methods)
            detail::require(m == "acerl" || m == "spca", "plan: unknown method '" + m + "'");
        for (const auto& t : tasks)
            detail::require(t == "classify" || t == "select" || t == "community" || t == "error",
                            "plan: unknown task '" + t + "'");
    }

    bool has_method(const std::string& m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }
    bool has_task(const std::string& t) const { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); }
};

inline ExperimentPlan plan_from_json(const json& j) {
    io::check_version(j, "plan");
    ExperimentPlan p;
    try {
        if (j.contains("design")) {
            const auto d = j.at("design").get<std::string>();
            if (d == "sparse")
                p.design = Design::sparse;
            else if (d == "community")
                p.design = Design::community;
            else
                throw SchemaError("plan: unknown design '" + d + "'");
        }
        if (p.design == Design::community) {
            p.v = {21};
            p.tasks = {"community", "error"};
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            if (g.contains("n")) p.n = g.at("n").get<std::vector<Index>>();
            if (g.contains("v")) p.v = g.at("v").get<std::vector<Index>>();
            if (g.contains("r")) p.r = g.at("r").get<std::vector<Index>>();
            if (g.contains("sigma_xi")) p.sigma_xi = g.at("sigma_xi").get<std::vector<double>>();
        }
        if (j.contains("s_star")) p.s_star = j.at("s_star").get<Index>();
        if (j.contains("G")) p.G = j.at("G").get<Index>();
        if (j.contains("jitter")) p.jitter = j.at("jitter").get<double>();
        if (j.contains("s")) p.s = j.at("s").get<Index>();
        if (j.contains("spca_s")) p.spca_s = j.at("spca_s").get<Index>();
        if (j.contains("methods")) p.methods = j.at("methods").get<std::vector<std::string>>();
        if (j.contains("tasks")) p.tasks = j.at("tasks").get<std::vector<std::string>>();
        if (j.contains("reps")) p.reps = j.at("reps").get<int>();
        if (j.contains("base_seed")) p.base_seed = j.at("base_seed").get<std::uint64_t>();
        if (j.contains("train_frac")) p.train_frac = j.at("train_frac").get<double>();
        if (j.contains("output_dir")) p.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("threads")) p.threads = j.at("threads").get<int>();
        if (j.contains("acerl")) p.acerl = io::config_from_json(j.at("acerl"), p.acerl);
        if (j.contains("kmeans")) {
            const auto& k = j.at("kmeans");
            if (k.contains("restarts")) p.kmeans.restarts = k.at("restarts").get<int>();
            if (k.contains("max_iter")) p.kmeans.max_iter = k.at("max_iter").get<int>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("plan: ") + e.what());
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// One replication

struct MetricValue {
    std::string method;
    std::string task;
    std::string metric;
    double value = 0.0;
};

struct RepOutcome {
    std::vector<MetricValue> values;
    std::vector<std::string> failures;  // "method: message"
};

inline std::uint64_t rep_seed(const ExperimentPlan& plan, const Cell& cell, int rep) {
    return plan.base_seed + stable_hash64(cell.key() + "#rep" + std::to_string(rep));
}

namespace detail {

struct Generated {
    NetworkDataset data;
    Matrix q_star;
    std::vector<Index> support;
    std::vector<int> membership;
};

inline Generated generate(const ExperimentPlan& plan, const Cell& cell, std::uint64_t seed) {
    Generated g;
    if (cell.design == Design::sparse) {
        sim::SparseSimSpec spec;
        spec.n = cell.n;
        spec.v = cell.v;
        spec.r = cell.r;
        spec.s_star = plan.s_star;
        spec.sigma_xi = cell.sigma_xi;
        spec.seed = seed;
        auto s = sim::gen_sparse(spec);
        g.data = std::move(s.data);
        g.q_star = std::move(s.q_star);
        g.support = std::move(s.support);
    } else {
        sim::CommunitySimSpec spec;
        spec.n = cell.n;
        spec.v = cell.v;
        spec.r = cell.r;
        spec.G = plan.G;
        spec.sigma_xi = cell.sigma_xi;
        spec.jitter = plan.jitter;
        spec.seed = seed;
        auto s = sim::gen_community(spec);
        g.data = std::move(s.data);
        g.q_star = std::move(s.q_star);
        g.membership = std::move(s.membership);
    }
    return g;
}

} // namespace detail

inline RepOutcome run_replication(const ExperimentPlan& plan, const Cell& cell, int rep) {
    RepOutcome out;
    const std::uint64_t seed = rep_seed(plan, cell, rep);
    const auto gen = detail::generate(plan, cell, seed);
    const auto split = sim::split_indices(gen.data.subjects(), plan.train_frac, seed ^ 0x5bd1e995ULL);
    const NetworkDataset train = gen.data.select_subjects(split.train);
    const NetworkDataset test = gen.data.select_subjects(split.test);

    for (const auto& method : plan.methods) {
        try {
            io::StoredModel model;
            if (method == "acerl") {
                AcerlConfig cfg = plan.acerl;
                cfg.r = cell.r;
                cfg.s = plan.working_s(cell);
                cfg.seed = seed + 1;
                model = fit(train, cfg);
            } else {
                model = fit_spca(train, cell.r, plan.spca_working_s(cell));
            }
            const EmbeddingMatrix q = edge_embedding(model);
            if (plan.has_task("classify"))
                out.values.push_back({method, "classify", "accuracy",
                                      classification_task(model, train.X, *train.labels, test.X, *test.labels)});
            if (plan.has_task("select") && !gen.support.empty()) {
                const Index s = std::min(plan.working_s(cell), q.edges());
                out.values.push_back(
                    {method, "select", "recall", metrics::selection_recall(select_edges(q, s), gen.support)});
            }
            if (plan.has_task("community") && !gen.membership.empty()) {
                KMeansOptions km = plan.kmeans;
                km.seed = seed + 2;
                const auto est = spectral_communities(build_similarity(q, train.edge_map), plan.G, km);
                const auto truth = CommunityAssignment::from_labels(gen.membership, plan.G);
                const auto losses = metrics::misclustering_losses(est, truth);
                out.values.push_back(
                    {method, "community", "rand_index", metrics::rand_index(est.labels(), gen.membership)});
                out.values.push_back({method, "community", "L", losses.overall});
                out.values.push_back({method, "community", "L_tilde", losses.worst_case});
            }
            if (plan.has_task("error"))
                out.values.push_back({method, "error", "gram_error", metrics::gram_error(q.Q, gen.q_star)});
        } catch (const Error& e) {
            out.failures.push_back(method + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation, checkpoints and reports

struct CellResult {
    Cell cell;
    std::vector<metrics::ExperimentRecord> records;
};

inline std::vector<metrics::ExperimentRecord> aggregate(const Cell& cell, const std::vector<RepOutcome>& reps) {
    std::map<std::tuple<std::string, std::string, std::string>, metrics::ExperimentRecord> by_key;
    std::map<std::string, std::vector<std::string>> failures;
    for (const auto& rep : reps) {
        for (const auto& v : rep.values) {
            auto& rec = by_key[{v.method, v.task, v.metric}];
            rec.design = cell.key();
            rec.method = v.method;
            rec.task = v.task;
            rec.metric = v.metric;
            rec.values.push_back(v.value);
        }
        for (const auto& f : rep.failures) failures[f.substr(0, f.find(':'))].push_back(f);
    }
    std::vector<metrics::ExperimentRecord> out;
    for (auto& [key, rec] : by_key) {
        if (auto it = failures.find(rec.method); it != failures.end())
            rec.status = "partial: " + std::to_string(it->second.size()) + " failed reps (" + it->second.front() + ")";
        out.push_back(std::move(rec));
    }
    for (const auto& [method, list] : failures) {
        const bool any = std::any_of(out.begin(), out.end(), [&](const auto& r) { return r.method == method; });
        if (!any) {
            metrics::ExperimentRecord rec;
            rec.design = cell.key();
            rec.method = method;
            rec.task = "all";
            rec.metric = "none";
            rec.status = "failed: " + list.front();
            out.push_back(std::move(rec));
        }
    }
    return out;
}

inline fs::path checkpoint_path(const fs::path& dir, const Cell& cell) {
    return dir / "checkpoints" / (cell.key() + ".json");
}

inline json records_to_json(const Cell& cell, int reps, const std::vector<metrics::ExperimentRecord>& records) {
    json j;
    j["schema_version"] = io::kSchemaVersion;
    j["cell"] = cell.key();
    j["reps"] = reps;
    json list = json::array();
    for (const auto& r : records)
        list.push_back({{"method", r.method}, {"task", r.task}, {"metric", r.metric}, {"values", r.values},
                        {"status", r.status}});
    j["records"] = std::move(list);
    return j;
}

inline std::optional<std::vector<metrics::ExperimentRecord>> load_checkpoint(const fs::path& path, const Cell& cell,
                                                                             int reps) {
    if (!fs::exists(path)) return std::nullopt;
    try {
        const json j = io::read_json(path);
        io::check_version(j, path.string());
        if (j.at("cell").get<std::string>() != cell.key() || j.at("reps").get<int>() != reps) return std::nullopt;
        std::vector<metrics::ExperimentRecord> out;
        for (const auto& r : j.at("records")) {
            metrics::ExperimentRecord rec;
            rec.design = cell.key();
            rec.method = r.at("method").get<std::string>();
            rec.task = r.at("task").get<std::string>();
            rec.metric = r.at("metric").get<std::string>();
            rec.values = r.at("values").get<std::vector<double>>();
            rec.status = r.at("status").get<std::string>();
            out.push_back(std::move(rec));
        }
        return out;
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable checkpoint: recompute the cell
    }
}

inline std::string results_csv(const std::vector<CellResult>& cells) {
    std::string text = "design,n,v,d,r,sigma_xi,method,task,metric,mean,se,reps,values_json,status\n";
    for (const auto& c : cells) {
        for (const auto& rec : c.records) {
            json values = rec.values;
            std::string vj = values.dump();
            std::string quoted = "\"";
            for (char ch : vj) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            quoted += '"';
            text += (c.cell.design == Design::sparse ? "sparse" : "community");
            text += "," + std::to_string(c.cell.n) + "," + std::to_string(c.cell.v) + "," + std::to_string(c.cell.d()) +
                    "," + std::to_string(c.cell.r) + "," + io::format_double(c.cell.sigma_xi) + "," + rec.method + "," +
                    rec.task + "," + rec.metric + "," + io::format_double(rec.mean()) + "," +
                    io::format_double(rec.stderr_()) + "," + std::to_string(rec.values.size()) + "," + quoted + ",\"" +
                    rec.status + "\"\n";
        }
    }
    return text;
}

inline bool is_fraction_metric(const std::string& metric) {
    return metric == "accuracy" || metric == "recall" || metric == "rand_index";
}

/// Plain-text table: one block per metric, rows (n, v, d, method), columns (r, sigma).
inline std::string results_table(const std::vector<CellResult>& cells) {
    std::set<std::pair<std::string, std::string>> metrics_seen;
    std::set<std::pair<Index, double>> columns;
    for (const auto& c : cells) {
        columns.insert({c.cell.r, c.cell.sigma_xi});
        for (const auto& rec : c.records)
            if (!rec.values.empty()) metrics_seen.insert({rec.task, rec.metric});
    }
    std::ostringstream os;
    for (const auto& [task, metric] : metrics_seen) {
        const bool pct = is_fraction_metric(metric);
        os << task << " / " << metric << (pct ? " (percent, mean(se))" : " (mean(se))") << "\n";
        os << "n\tv\td\tmethod";
        for (const auto& [r, sg] : columns) os << "\tr=" << r << ",sigma=" << io::format_double(sg);
        os << "\n";
        std::map<std::tuple<Index, Index, std::string>, std::map<std::pair<Index, double>, std::string>> rows;
        for (const auto& c : cells)
            for (const auto& rec : c.records)
                if (rec.task == task && rec.metric == metric && !rec.values.empty()) {
                    char buf[64];
                    if (pct)
                        std::snprintf(buf, sizeof buf, "%s", metrics::format_mean_se(rec.mean(), rec.stderr_()).c_str());
                    else
                        std::snprintf(buf, sizeof buf, "%.3f(%.3f)", rec.mean(), rec.stderr_());
                    rows[{c.cell.n, c.cell.v, rec.method}][{c.cell.r, c.cell.sigma_xi}] = buf;
                }
        for (const auto& [key, vals] : rows) {
            const auto& [n, v, method] = key;
            os << n << "\t" << v << "\t" << v * (v - 1) / 2 << "\t" << method;
            for (const auto& col : columns) {
                auto it = vals.find(col);
                os << "\t" << (it == vals.end() ? "-" : it->second);
            }
            os << "\n";
        }
        os << "\n";
    }
    return os.str();
}

/// Runs every cell of the plan. Finished cells are read back from their
/// checkpoints instead of being recomputed.
inline std::vector<CellResult> run_experiment(const ExperimentPlan& plan,
                                              const std::function<void(const std::string&)>& log = {}) {
    plan.validate();
    const fs::path dir = plan.output_dir;
    fs::create_directories(dir / "checkpoints");
    const int threads =
        plan.threads > 0 ? plan.threads : std::max(1, int(std::thread::hardware_concurrency()));

    std::vector<CellResult> results;
    for (const Cell& cell : plan.cells()) {
        const fs::path ckpt = checkpoint_path(dir, cell);
        if (auto cached = load_checkpoint(ckpt, cell, plan.reps)) {
            if (log) log("cell " + cell.key() + ": loaded from checkpoint");
            results.push_back({cell, std::move(*cached)});
            continue;
        }
        std::vector<RepOutcome> reps(std::size_t(plan.reps));
        std::atomic<int> next{0};
        auto worker = [&] {
            for (int rep = next++; rep < plan.reps; rep = next++) {
                try {
                    reps[std::size_t(rep)] = run_replication(plan, cell, rep);
                } catch (const std::exception& e) {
                    reps[std::size_t(rep)].failures.push_back(std::string("data: ") + e.what());
                }
            }
        };
        std::vector<std::thread> pool;
        for (int t = 1; t < std::min(threads, plan.reps); ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        auto records = aggregate(cell, reps);
        io::write_file(ckpt, records_to_json(cell, plan.reps, records).dump(1) + "\n");
        if (log) log("cell " + cell.key() + ": done");
        results.push_back({cell, std::move(records)});
    }
    std::sort(results.begin(), results.end(),
              [](const CellResult& a, const CellResult& b) { return a.cell.key() < b.cell.key(); });
    io::write_file(dir / "results.csv", results_csv(results));
    io::write_file(dir / "table.txt", results_table(results));
    return results;
}

/// Looks up the record of one (method, task, metric) in a cell result.
inline const metrics::ExperimentRecord* find_record(const CellResult& c, const std::string& method,
                                                    const std::string& task, const std::string& metric) {
    for (const auto& r : c.records)
        if (r.method == method && r.task == task && r.metric == metric) return &r;
    return nullptr;
}

} // namespace acerl::harness
