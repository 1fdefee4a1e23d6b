#include "transgap/harness.hpp"

#include "transgap/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace transgap {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) data_error("cannot write " + path);
    out << content;
    if (!out) data_error("failed writing " + path);
}

void DatasetBundle::validate() const {
    graph.validate();
    if (X.rows() != graph.n) data_error("feature rows (" + std::to_string(X.rows()) + ") do not match n=" + std::to_string(graph.n));
    if (labels.size() != static_cast<std::size_t>(graph.n)) data_error("label count does not match n");
    if (num_classes <= 0) data_error("num_classes must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= num_classes)
            data_error("label " + std::to_string(labels[i]) + " of node " + std::to_string(i) + " outside [0, num_classes)");
    if (!X.allFinite()) data_error("features contain non-finite values");
}

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

bool blank_or_comment(const std::string& line) {
    const auto p = line.find_first_not_of(" \t");
    return p == std::string::npos || line[p] == '#';
}

long parse_int(const std::string& tok, const std::string& file, std::size_t lineno) {
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (tok.empty() || errno != 0 || *end != '\0')
        data_error(file + ":" + std::to_string(lineno) + ": expected an integer, got '" + tok + "'");
    return v;
}

double parse_double(const std::string& tok, const std::string& file, std::size_t lineno) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0')
        data_error(file + ":" + std::to_string(lineno) + ": expected a number, got '" + tok + "'");
    return v;
}

std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

DatasetBundle load_bundle(const std::string& dir, bool row_normalize_features) {
    const fs::path root(dir);
    for (const char* f : {"meta.json", "edges.tsv", "features.csv", "labels.csv"})
        if (!fs::exists(root / f)) data_error("bundle " + dir + " is missing " + f);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file((root / "meta.json").string()));
    } catch (const nlohmann::json::exception& e) {
        data_error("meta.json: " + std::string(e.what()));
    }
    for (const char* k : {"n", "d", "num_classes"})
        if (!meta.contains(k) || !meta[k].is_number_integer()) data_error(std::string("meta.json: missing integer key ") + k);
    const int n = meta["n"].get<int>();
    const int d = meta["d"].get<int>();
    DatasetBundle b;
    b.num_classes = meta["num_classes"].get<int>();
    b.name = meta.value("name", root.filename().string());
    if (n <= 0 || d <= 0 || b.num_classes <= 0) data_error("meta.json: n, d and num_classes must be positive");

    const std::string ef = (root / "edges.tsv").string();
    std::vector<std::pair<int, int>> edges;
    const auto elines = lines_of(read_file(ef));
    for (std::size_t i = 0; i < elines.size(); ++i) {
        if (blank_or_comment(elines[i])) continue;
        std::istringstream ls(elines[i]);
        std::string a, c, extra;
        ls >> a >> c;
        if (c.empty() || (ls >> extra)) data_error(ef + ":" + std::to_string(i + 1) + ": expected two integers");
        const long u = parse_int(a, ef, i + 1), v = parse_int(c, ef, i + 1);
        if (u < 0 || u >= n || v < 0 || v >= n) data_error(ef + ":" + std::to_string(i + 1) + ": node index out of range");
        edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    b.graph = build_graph(edges, n);

    const std::string ff = (root / "features.csv").string();
    const auto flines = lines_of(read_file(ff));
    b.X.resize(n, d);
    int row = 0;
    for (std::size_t i = 0; i < flines.size(); ++i) {
        if (flines[i].empty()) continue;
        if (row >= n) data_error(ff + ":" + std::to_string(i + 1) + ": more rows than n=" + std::to_string(n));
        const auto toks = split_on(flines[i], ',');
        if (static_cast<int>(toks.size()) != d)
            data_error(ff + ":" + std::to_string(i + 1) + ": expected " + std::to_string(d) + " values, got " + std::to_string(toks.size()));
        for (int j = 0; j < d; ++j) b.X(row, j) = parse_double(toks[j], ff, i + 1);
        ++row;
    }
    if (row != n) data_error(ff + ": expected " + std::to_string(n) + " rows, got " + std::to_string(row));

    const std::string lf = (root / "labels.csv").string();
    const auto llines = lines_of(read_file(lf));
    for (std::size_t i = 0; i < llines.size(); ++i) {
        if (llines[i].empty()) continue;
        const long y = parse_int(split_on(llines[i], ',').at(0), lf, i + 1);
        if (y < 0 || y >= b.num_classes)
            data_error(lf + ":" + std::to_string(i + 1) + ": label " + std::to_string(y) + " outside [0, " + std::to_string(b.num_classes) + ")");
        b.labels.push_back(static_cast<int>(y));
    }
    if (b.labels.size() != static_cast<std::size_t>(n))
        data_error(lf + ": expected " + std::to_string(n) + " labels, got " + std::to_string(b.labels.size()));
    if (row_normalize_features) {
        for (int i = 0; i < n; ++i) {
            const double r = b.X.row(i).norm();
            if (r > 0.0) b.X.row(i) /= r;
        }
    }
    b.validate();
    return b;
}

void save_bundle(const DatasetBundle& b, const std::string& dir) {
    b.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) data_error("cannot create directory " + dir + ": " + ec.message());
    const fs::path root(dir);

    nlohmann::ordered_json meta;
    meta["n"] = b.n();
    meta["d"] = b.d();
    meta["num_classes"] = b.num_classes;
    meta["name"] = b.name;
    write_file((root / "meta.json").string(), meta.dump(2) + "\n");

    std::string e;
    for (const auto& [u, v] : b.graph.edges()) e += std::to_string(u) + "\t" + std::to_string(v) + "\n";
    write_file((root / "edges.tsv").string(), e);

    std::string f;
    for (int i = 0; i < b.n(); ++i) {
        for (int j = 0; j < b.d(); ++j) {
            if (j) f += ",";
            f += fmt17(b.X(i, j));
        }
        f += "\n";
    }
    write_file((root / "features.csv").string(), f);

    std::string l;
    for (int y : b.labels) l += std::to_string(y) + "\n";
    write_file((root / "labels.csv").string(), l);
}

DatasetBundle make_sbm_bundle(const std::vector<int>& sizes, double p_in, double p_out, std::uint64_t seed,
                              const SbmFeatures& feat, const std::string& name) {
    if (feat.d <= 0) usage_error("feature dimension must be positive");
    SbmGraph g = sbm_generate(sizes, p_in, p_out, seed);
    DatasetBundle b;
    b.name = name;
    b.num_classes = static_cast<int>(sizes.size());
    b.labels = std::move(g.labels);
    b.graph = std::move(g.graph);
    Rng rng(seed, "sbm_features");
    const double scale = 1.0 / std::sqrt(static_cast<double>(feat.d));
    Matrix mu(b.num_classes, feat.d);
    for (int c = 0; c < b.num_classes; ++c)
        for (int j = 0; j < feat.d; ++j) mu(c, j) = rng.normal() * scale;
    b.X.resize(b.graph.n, feat.d);
    for (int i = 0; i < b.graph.n; ++i)
        for (int j = 0; j < feat.d; ++j) b.X(i, j) = feat.signal * mu(b.labels[i], j) + feat.noise * rng.normal() * scale;
    return b;
}

Split make_split(int n, double train_frac, std::uint64_t seed) {
    if (n < 2) usage_error("split needs at least 2 nodes");
    if (!(train_frac > 0.0 && train_frac < 1.0)) usage_error("train fraction must lie in (0, 1)");
    const int m = static_cast<int>(std::floor(train_frac * n));
    if (m <= 0 || m >= n) usage_error("degenerate split: m=" + std::to_string(m) + ", u=" + std::to_string(n - m));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed, "split");
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    Split s;
    s.train.assign(perm.begin(), perm.begin() + m);
    s.test.assign(perm.begin() + m, perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void ExperimentConfig::validate() const {
    if (models.empty()) usage_error("experiment needs at least one model");
    if (seeds.empty()) usage_error("experiment needs at least one seed");
    if (!(train_frac > 0.0 && train_frac < 1.0)) usage_error("train fraction must lie in (0, 1)");
    if (T < 1) usage_error("T must be at least 1");
    if (hidden < 1) usage_error("hidden must be at least 1");
    if (batch_size < 1) usage_error("batch size must be at least 1");
    if (eval_every < 1) usage_error("eval_every must be at least 1");
    if (deep_layers < 2) usage_error("deep_layers must be at least 2");
    for (const auto& m : models) model_spec_for(m, 1, 2, *this);
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["models"] = models;
    j["seeds"] = seeds;
    j["train_frac"] = train_frac;
    j["T"] = T;
    j["hidden"] = hidden;
    j["batch_size"] = batch_size;
    j["optimizer"] = optimizer == Optimizer::Adam ? "adam" : "sgd";
    j["schedule"] = {{"kind", schedule.kind == LrSchedule::Kind::Constant ? "constant" : "inverse_time"},
                     {"c", schedule.c},
                     {"t0", schedule.t0}};
    j["eval_every"] = eval_every;
    j["q"] = q;
    j["K"] = K;
    j["gamma"] = gamma;
    j["gcnii_alpha"] = gcnii_alpha;
    j["gcnii_beta"] = gcnii_beta;
    j["deep_layers"] = deep_layers;
    j["l2"] = l2;
    return j;
}

ModelSpec model_spec_for(const std::string& id, int d, int C, const ExperimentConfig& cfg) {
    ModelSpec s;
    std::string base = id;
    int layers = 2;
    if (id == "gcn_star" || id == "gcnii_star") {
        base = id.substr(0, id.size() - 5);
        layers = cfg.deep_layers;
    }
    s.arch = parse_arch(base);
    s.d = d;
    s.h = cfg.hidden;
    s.C = C;
    s.activation = ActivationSpec::make(cfg.q);
    s.layers = layers;
    s.alpha.assign(static_cast<std::size_t>(layers), cfg.gcnii_alpha);
    s.beta.assign(static_cast<std::size_t>(layers), cfg.gcnii_beta);
    s.gamma = cfg.gamma;
    s.K = cfg.K;
    s.validate();
    return s;
}

Stat mean_std(const std::vector<double>& xs) {
    Stat s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(v / static_cast<double>(xs.size()));
    return s;
}

std::vector<CurvePoint> curve_report(const std::vector<TrainTrace>& traces) {
    if (traces.empty()) usage_error("curve_report needs at least one trace");
    std::vector<CurvePoint> out;
    const std::size_t rows = traces[0].rows.size();
    for (const auto& tr : traces)
        if (tr.rows.size() != rows) usage_error("curve_report: traces have different checkpoint counts");
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> gaps;
        for (const auto& tr : traces) {
            if (tr.rows[r].t != traces[0].rows[r].t) usage_error("curve_report: checkpoint steps differ between traces");
            gaps.push_back(std::abs(tr.rows[r].R_m - tr.rows[r].R_u));
        }
        const Stat s = mean_std(gaps);
        out.push_back(CurvePoint{traces[0].rows[r].t, s.mean, s.std});
    }
    return out;
}

int default_worker_count() {
    if (const char* env = std::getenv("TRANSGAP_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min(threads, count));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

const ModelRow& GapReport::row(const std::string& model) const {
    for (const auto& r : rows)
        if (r.model == model) return r;
    usage_error("report has no row for model " + model);
}

GapReport run_experiment(const ExperimentConfig& cfg, const DatasetBundle& data) {
    cfg.validate();
    data.validate();
    auto A = std::make_shared<const PropagationMatrix>(normalized_adjacency(data.graph));
    const int nm = static_cast<int>(cfg.models.size());
    const int ns = static_cast<int>(cfg.seeds.size());
    std::vector<RunResult> results(static_cast<std::size_t>(nm) * ns);

    parallel_for(nm * ns, cfg.threads > 0 ? cfg.threads : default_worker_count(), [&](int idx) {
        const std::string& model = cfg.models[idx / ns];
        const std::uint64_t seed = cfg.seeds[idx % ns];
        try {
            const ModelSpec spec = model_spec_for(model, data.d(), data.num_classes, cfg);
            const ModelContext ctx = make_context(spec, A, data.X);
            const Split split = make_split(data.n(), cfg.train_frac, seed);
            SgdConfig sc;
            sc.T = cfg.T;
            sc.batch_size = std::min(cfg.batch_size, split.m());
            sc.seed = seed;
            sc.schedule = cfg.schedule;
            sc.optimizer = cfg.optimizer;
            sc.eval_every = cfg.eval_every;
            sc.l2 = cfg.l2;
            TrainResult tr = run_sgd(ctx, data.labels, split, sc);
            RunResult& r = results[idx];
            r.model = model;
            r.seed = seed;
            r.final = tr.trace.rows.back();
            r.loss_gap = std::abs(r.final.R_m - r.final.R_u);
            r.acc_gap = std::abs(r.final.acc_m - r.final.acc_u);
            r.test_acc = r.final.acc_u;
            r.grad_gap = r.final.grad_gap;
            r.trace = std::move(tr.trace);
        } catch (const Error& e) {
            throw Error(e.kind(), "run (model=" + model + ", seed=" + std::to_string(seed) + "): " + e.what());
        }
    });

    GapReport rep;
    rep.dataset = data.name;
    for (int mi = 0; mi < nm; ++mi) {
        ModelRow row;
        row.model = cfg.models[mi];
        std::vector<double> lg, ag, ta, gg;
        std::vector<TrainTrace> traces;
        for (int si = 0; si < ns; ++si) {
            const RunResult& r = results[static_cast<std::size_t>(mi) * ns + si];
            lg.push_back(r.loss_gap);
            ag.push_back(r.acc_gap);
            ta.push_back(r.test_acc);
            gg.push_back(r.grad_gap);
            traces.push_back(r.trace);
            row.runs.push_back(r);
        }
        row.loss_gap = mean_std(lg);
        row.acc_gap = mean_std(ag);
        row.test_acc = mean_std(ta);
        row.grad_gap = mean_std(gg);
        row.curve = curve_report(traces);
        rep.rows.push_back(std::move(row));
    }

    if (!cfg.output_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) data_error("cannot create directory " + cfg.output_dir + ": " + ec.message());
        for (const auto& row : rep.rows) {
            for (const auto& r : row.runs)
                write_file((fs::path(cfg.output_dir) / ("curve_" + r.model + "_" + std::to_string(r.seed) + ".csv")).string(),
                           r.trace.to_csv());
            std::string gc = "t,mean_loss_gap,std_loss_gap\n";
            for (const auto& p : row.curve) gc += std::to_string(p.t) + "," + fmt17(p.mean) + "," + fmt17(p.std) + "\n";
            write_file((fs::path(cfg.output_dir) / ("gapcurve_" + row.model + ".csv")).string(), gc);
        }
        write_file((fs::path(cfg.output_dir) / "report.json").string(), rep.to_json(cfg, data).dump(2) + "\n");
    }
    return rep;
}

nlohmann::ordered_json GapReport::to_json(const ExperimentConfig& cfg, const DatasetBundle& data) const {
    auto stat = [](const Stat& s) { return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.std}}; };
    nlohmann::ordered_json j;
    j["schema"] = "transgap/1";
    j["std_kind"] = "population";
    j["dataset"] = {{"name", data.name}, {"n", data.n()}, {"d", data.d()}, {"num_classes", data.num_classes},
                    {"edges", data.graph.edge_count()}};
    j["config"] = cfg.to_json();
    j["models"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json m;
        m["model"] = row.model;
        m["loss_gap"] = stat(row.loss_gap);
        m["acc_gap"] = stat(row.acc_gap);
        m["test_acc"] = stat(row.test_acc);
        m["grad_gap"] = stat(row.grad_gap);
        m["runs"] = nlohmann::ordered_json::array();
        for (const auto& r : row.runs) {
            m["runs"].push_back({{"seed", r.seed},
                                 {"loss_gap", r.loss_gap},
                                 {"acc_gap", r.acc_gap},
                                 {"test_acc", r.test_acc},
                                 {"grad_gap", r.grad_gap},
                                 {"R_m", r.final.R_m},
                                 {"R_u", r.final.R_u},
                                 {"acc_m", r.final.acc_m},
                                 {"acc_u", r.final.acc_u},
                                 {"curve_file", "curve_" + r.model + "_" + std::to_string(r.seed) + ".csv"}});
        }
        m["curve"] = nlohmann::ordered_json::array();
        for (const auto& p : row.curve) m["curve"].push_back({{"t", p.t}, {"mean_loss_gap", p.mean}, {"std_loss_gap", p.std}});
        j["models"].push_back(std::move(m));
    }
    return j;
}

}  // namespace transgap
