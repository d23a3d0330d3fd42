#pragma once

#include <acerl/core.hpp>
#include <acerl/estimator.hpp>
#include <acerl/spca.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace acerl::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw SchemaError(where + ": cannot parse number '" + std::string(s) + "'");
    return value;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

inline std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

inline void write_file(const fs::path& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Plain numeric matrices (no header, one matrix row per line)

inline void write_matrix_csv(const fs::path& path, const Matrix& m) {
    std::string text;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) text += ',';
            text += format_double(m(i, j));
        }
        text += '\n';
    }
    write_file(path, text);
}

inline Matrix read_matrix_csv(const fs::path& path) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (auto field : split_csv_line(line))
            row.push_back(parse_double(field, path.string() + ":" + std::to_string(lineno)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    Matrix m(Index(rows.size()), rows.empty() ? 0 : Index(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[std::size_t(i)][std::size_t(j)];
    return m;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header `subject_id,e0,e1,...`, one subject per row.

inline void write_dataset_csv(const fs::path& path, const NetworkDataset& data) {
    std::string text = "subject_id";
    for (Index e = 0; e < data.edges(); ++e) text += ",e" + std::to_string(e);
    text += '\n';
    for (Index i = 0; i < data.subjects(); ++i) {
        text += std::to_string(data.subject_ids[std::size_t(i)]);
        for (Index e = 0; e < data.edges(); ++e) {
            text += ',';
            text += format_double(data.X(e, i));
        }
        text += '\n';
    }
    write_file(path, text);
}

/// Reads a dataset CSV and transposes it to edges x subjects. The edge map is
/// attached whenever the column count is a triangular number v(v-1)/2.
inline NetworkDataset read_dataset_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header.front() != "subject_id")
        throw SchemaError(path.string() + ": header must start with 'subject_id'");
    const std::size_t d = header.size() - 1;
    std::vector<std::int64_t> ids;
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (fields.size() != d + 1) throw SchemaError(where + ": expected " + std::to_string(d + 1) + " fields");
        ids.push_back(std::int64_t(parse_double(fields[0], where)));
        for (std::size_t e = 1; e < fields.size(); ++e) values.push_back(parse_double(fields[e], where));
    }
    const Index n = Index(ids.size());
    Matrix x(Index(d), n);
    for (Index i = 0; i < n; ++i)
        for (Index e = 0; e < Index(d); ++e) x(e, i) = values[std::size_t(i) * d + std::size_t(e)];
    NetworkDataset data;
    data.X = std::move(x);
    data.subject_ids = std::move(ids);
    data.edge_map = EdgeIndexMap::from_edge_count(Index(d));
    data.validate();
    return data;
}

/// A directory of per-subject v x v adjacency CSVs, taken in file-name order.
inline NetworkDataset read_adjacency_folder(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.size() < 2) throw SchemaError(dir.string() + ": at least two subject matrices are required");
    std::optional<EdgeIndexMap> map;
    Matrix x;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const Matrix a = read_matrix_csv(files[i]);
        if (a.rows() != a.cols()) throw SchemaError(files[i].string() + ": adjacency matrix must be square");
        if (!map) {
            map = EdgeIndexMap(a.rows());
            x.resize(map->edge_count(), Index(files.size()));
        }
        if (a.rows() != map->node_count()) throw SchemaError(files[i].string() + ": node count differs");
        x.col(Index(i)) = vectorize_adjacency(a, *map);
    }
    return NetworkDataset(std::move(x), map);
}

// ---------------------------------------------------------------------------
// Configuration documents

inline std::string to_string(InitMethod m) { return m == InitMethod::fantope ? "fantope" : "gram_pca"; }
inline std::string to_string(DiagWeight w) { return w == DiagWeight::enumerated ? "enumerated" : "squared"; }
inline std::string to_string(StepScaling s) { return s == StepScaling::relative ? "relative" : "absolute"; }
inline std::string to_string(InnerSchedule s) { return s == InnerSchedule::constant ? "constant" : "growing"; }

inline InitMethod parse_init(const std::string& s) {
    if (s == "fantope") return InitMethod::fantope;
    if (s == "gram_pca") return InitMethod::gram_pca;
    throw InvalidArgument("unknown init method '" + s + "' (expected fantope or gram_pca)");
}
inline DiagWeight parse_diag_weight(const std::string& s) {
    if (s == "enumerated") return DiagWeight::enumerated;
    if (s == "squared") return DiagWeight::squared;
    throw InvalidArgument("unknown diag_weight '" + s + "' (expected enumerated or squared)");
}
inline StepScaling parse_step_scaling(const std::string& s) {
    if (s == "relative") return StepScaling::relative;
    if (s == "absolute") return StepScaling::absolute;
    throw InvalidArgument("unknown step_scaling '" + s + "' (expected relative or absolute)");
}
inline InnerSchedule parse_schedule(const std::string& s) {
    if (s == "constant") return InnerSchedule::constant;
    if (s == "growing") return InnerSchedule::growing;
    throw InvalidArgument("unknown schedule '" + s + "' (expected constant or growing)");
}

inline json config_to_json(const AcerlConfig& c) {
    json j;
    j["r"] = c.r;
    j["s"] = c.s;
    j["eta"] = c.eta;
    j["inner"] = c.inner_iters;
    j["outer"] = c.outer_iters;
    j["seed"] = c.seed;
    j["init"] = c.init ? json(to_string(*c.init)) : json(nullptr);
    j["diag_weight"] = to_string(c.diag_weight);
    j["step_scaling"] = to_string(c.step_scaling);
    j["schedule"] = to_string(c.schedule);
    j["admm"] = {{"rho", c.admm.rho}, {"lambda", c.admm.lambda}, {"max_iter", c.admm.max_iter}, {"tol", c.admm.tol}};
    return j;
}

/// Fields present in `j` override those of `base`.
inline AcerlConfig config_from_json(const json& j, AcerlConfig base = {}) {
    try {
        if (j.contains("r")) base.r = j.at("r").get<Index>();
        if (j.contains("s")) base.s = j.at("s").get<Index>();
        if (j.contains("eta")) base.eta = j.at("eta").get<double>();
        if (j.contains("inner")) base.inner_iters = j.at("inner").get<int>();
        if (j.contains("outer")) base.outer_iters = j.at("outer").get<int>();
        if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("init")) {
            if (j.at("init").is_null())
                base.init.reset();
            else
                base.init = parse_init(j.at("init").get<std::string>());
        }
        if (j.contains("diag_weight")) base.diag_weight = parse_diag_weight(j.at("diag_weight").get<std::string>());
        if (j.contains("step_scaling"))
            base.step_scaling = parse_step_scaling(j.at("step_scaling").get<std::string>());
        if (j.contains("schedule")) base.schedule = parse_schedule(j.at("schedule").get<std::string>());
        if (j.contains("admm")) {
            const auto& a = j.at("admm");
            if (a.contains("rho")) base.admm.rho = a.at("rho").get<double>();
            if (a.contains("lambda")) base.admm.lambda = a.at("lambda").get<double>();
            if (a.contains("max_iter")) base.admm.max_iter = a.at("max_iter").get<int>();
            if (a.contains("tol")) base.admm.tol = a.at("tol").get<double>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    return base;
}

inline json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

inline void check_version(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("schema_version"))
        throw SchemaError(where + ": missing schema_version");
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion)
        throw SchemaError(where + ": unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
}

// ---------------------------------------------------------------------------
// Model persistence: a JSON metadata document plus the matrix in CSV next to it.

inline fs::path matrix_path_for(const fs::path& meta) {
    fs::path p = meta;
    p.replace_extension(".q.csv");
    return p;
}

using StoredModel = std::variant<FitResult, SpcaResult>;

inline void save_model(const FitResult& fit, const fs::path& path) {
    const fs::path mat = matrix_path_for(path);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["method"] = "acerl";
    j["d"] = fit.q_hat.edges();
    j["r"] = fit.q_hat.rank();
    j["seed"] = fit.seed;
    j["config"] = config_to_json(fit.config);
    j["masking"] = std::vector<double>(fit.masking.values().data(),
                                       fit.masking.values().data() + fit.masking.values().size());
    json trace = json::array();
    for (const auto& t : fit.trace)
        trace.push_back({{"k", t.k}, {"mean_p", t.mean_p}, {"surrogate_loss", t.surrogate_loss},
                         {"support_size", t.support_size}});
    j["trace"] = std::move(trace);
    j["matrix_file"] = mat.filename().string();
    write_matrix_csv(mat, fit.q_hat.Q);
    write_file(path, j.dump(2) + "\n");
}

inline void save_model(const SpcaResult& res, const fs::path& path) {
    const fs::path mat = matrix_path_for(path);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["method"] = "spca";
    j["d"] = res.U.rows();
    j["r"] = res.U.cols();
    j["lambda"] = std::vector<double>(res.lambda.data(), res.lambda.data() + res.lambda.size());
    j["support"] = res.support;
    j["iterations"] = res.iterations;
    j["converged"] = res.converged;
    j["objective_trace"] = res.objective_trace;
    j["matrix_file"] = mat.filename().string();
    write_matrix_csv(mat, res.U);
    write_file(path, j.dump(2) + "\n");
}

inline StoredModel load_model(const fs::path& path) {
    const json j = read_json(path);
    const std::string where = path.string();
    check_version(j, where);
    try {
        const auto method = j.at("method").get<std::string>();
        const Index d = j.at("d").get<Index>();
        const Index r = j.at("r").get<Index>();
        const fs::path mat = path.parent_path() / j.at("matrix_file").get<std::string>();
        Matrix m = read_matrix_csv(mat);
        if (m.rows() != d || m.cols() != r)
            throw SchemaError(where + ": matrix file shape does not match metadata");
        if (method == "acerl") {
            FitResult fit;
            fit.q_hat = EmbeddingMatrix(std::move(m));
            fit.seed = j.at("seed").get<std::uint64_t>();
            fit.config = config_from_json(j.at("config"));
            const auto p = j.at("masking").get<std::vector<double>>();
            if (Index(p.size()) != d) throw SchemaError(where + ": masking vector has wrong length");
            fit.masking = MaskingParams(Eigen::Map<const Vector>(p.data(), Index(p.size())));
            for (const auto& t : j.at("trace")) {
                TraceRecord rec;
                rec.k = t.at("k").get<int>();
                rec.mean_p = t.at("mean_p").get<double>();
                rec.surrogate_loss = t.at("surrogate_loss").get<double>();
                rec.support_size = t.at("support_size").get<Index>();
                fit.trace.push_back(rec);
            }
            return fit;
        }
        if (method == "spca") {
            SpcaResult res;
            res.U = std::move(m);
            const auto lambda = j.at("lambda").get<std::vector<double>>();
            if (Index(lambda.size()) != r) throw SchemaError(where + ": lambda has wrong length");
            res.lambda = Eigen::Map<const Vector>(lambda.data(), r);
            res.support = j.at("support").get<std::vector<Index>>();
            res.iterations = j.at("iterations").get<int>();
            res.converged = j.at("converged").get<bool>();
            res.objective_trace = j.at("objective_trace").get<std::vector<double>>();
            return res;
        }
        throw SchemaError(where + ": unknown method '" + method + "'");
    } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw SchemaError(where + ": " + e.what());
    }
}

} // namespace acerl::io
