#include "transgap/cli.hpp"

#include "transgap/analysis.hpp"
#include "transgap/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>

namespace transgap {

namespace {

using ojson = nlohmann::ordered_json;

std::string fmt4(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

struct ModelFlags {
    std::string model = "gcn";
    int hidden = 64;
    double q = 2.0;
    int K = 10;
    double gamma = 0.1;
    double gcnii_alpha = 0.1;
    double gcnii_beta = 0.5;
    int layers = 2;
};

void add_model_flags(CLI::App* s, ModelFlags& f, bool with_model, bool with_layers) {
    if (with_model) s->add_option("--model", f.model, "Architecture: gcn, gcnii, sgc, appnp, gpr");
    s->add_option("--hidden", f.hidden, "Hidden width")->check(CLI::PositiveNumber);
    s->add_option("--q", f.q, "Activation exponent q in (1, 2]");
    s->add_option("--K", f.K, "Polynomial order for APPNP and GPR-GNN");
    s->add_option("--gamma", f.gamma, "APPNP teleport probability");
    s->add_option("--gcnii-alpha", f.gcnii_alpha, "GCNII initial-residual weight (all layers)");
    s->add_option("--gcnii-beta", f.gcnii_beta, "GCNII identity-mapping weight (all layers)");
    if (with_layers) s->add_option("--layers", f.layers, "Propagation depth for GCN and GCNII");
}

ModelSpec make_spec(const ModelFlags& f, Arch arch, int d, int C, int layers) {
    ModelSpec s;
    s.arch = arch;
    s.d = d;
    s.h = f.hidden;
    s.C = C;
    s.activation = ActivationSpec::make(f.q);
    s.layers = layers;
    s.alpha.assign(static_cast<std::size_t>(std::max(layers, 1)), f.gcnii_alpha);
    s.beta.assign(static_cast<std::size_t>(std::max(layers, 1)), f.gcnii_beta);
    s.gamma = f.gamma;
    s.K = f.K;
    s.validate();
    return s;
}

struct TrainFlags {
    int T = 300;
    int batch = 1;
    std::string optimizer = "sgd";
    std::string schedule = "inverse_time";
    double lr = 1.0;
    std::string t0 = "10";
    int eval_every = 10;
    double l2 = 0.0;
};

void add_train_flags(CLI::App* s, TrainFlags& f) {
    s->add_option("--T", f.T, "Number of SGD iterations");
    s->add_option("--batch", f.batch, "Batch size (1 = one index per step)");
    s->add_option("--optimizer", f.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    s->add_option("--schedule", f.schedule, "Learning-rate schedule: inverse_time (c/(t+t0)) or constant (c)")
        ->check(CLI::IsMember({"inverse_time", "constant"}));
    s->add_option("--lr", f.lr, "Schedule numerator c");
    s->add_option("--t0", f.t0, "Schedule offset t0, or 'theory' for max((2 P_F)^(1/alpha), 1)");
    s->add_option("--eval-every", f.eval_every, "Checkpoint stride");
    s->add_option("--l2", f.l2, "Optional L2 penalty coefficient");
}

struct Common {
    std::string data;
    std::uint64_t seed = 0;
    double train_frac = 0.30;
    bool row_normalize = false;
};

DatasetBundle load_data(const Common& c) {
    if (c.data.empty()) usage_error("--data is required");
    return load_bundle(c.data, c.row_normalize);
}

double parse_t0(const std::string& s, double P_F, double alpha, std::optional<double> mu, std::vector<std::string>& warnings) {
    double t0;
    if (s == "theory") {
        t0 = t0_from_theory(P_F, alpha, mu);
    } else {
        char* end = nullptr;
        t0 = std::strtod(s.c_str(), &end);
        if (s.empty() || *end != '\0' || !(t0 >= 0.0)) usage_error("--t0 must be a nonnegative number or 'theory'");
    }
    if (t0 > 1e6) warnings.push_back("vacuously small steps: t0 = " + fmt4(t0) + " exceeds 1e6");
    return t0;
}

SgdConfig make_sgd_config(const TrainFlags& f, std::uint64_t seed, double t0) {
    SgdConfig c;
    c.T = f.T;
    c.batch_size = f.batch;
    c.seed = seed;
    c.schedule.kind = f.schedule == "constant" ? LrSchedule::Kind::Constant : LrSchedule::Kind::InverseTime;
    c.schedule.c = f.lr;
    c.schedule.t0 = t0;
    c.optimizer = f.optimizer == "adam" ? Optimizer::Adam : Optimizer::Sgd;
    c.eval_every = f.eval_every;
    c.l2 = f.l2;
    return c;
}

void check_train_flags(const TrainFlags& f) {
    if (f.T < 1) usage_error("--T must be at least 1");
    if (f.batch < 1) usage_error("--batch must be at least 1");
    if (f.eval_every < 1) usage_error("--eval-every must be at least 1");
    if (!(f.lr >= 0.0)) usage_error("--lr must be nonnegative");
}

ojson graph_json(const SparseGraph& g, const PropagationMatrix& A) {
    const DegreeStats s = degree_stats(g);
    return ojson{{"n", s.n},
                 {"edge_count", s.edge_count},
                 {"deg_min", s.deg_min},
                 {"deg_max", s.deg_max},
                 {"a_inf", A.inf_norm},
                 {"degree_bound", degree_bound(s)}};
}

// ---------------------------------------------------------------- analyze

struct AnalyzeFlags {
    ModelFlags model;
    TrainFlags train;
    Common common;
    bool compare = false;
    std::optional<double> cw;
    double delta = 0.05;
    std::optional<double> alpha;
    std::optional<double> mu;
    std::optional<double> R;
    std::string trace;
    double drop_edge_p = 0.0;
    std::uint64_t drop_seed = 0;
    std::string out;
};

ojson analyze_one(const AnalyzeFlags& f, const DatasetBundle& data, std::shared_ptr<const PropagationMatrix> A, Arch arch) {
    std::vector<std::string> warnings;
    const ModelSpec spec = make_spec(f.model, arch, data.d(), data.num_classes, 2);
    const ModelContext ctx = make_context(spec, A, data.X);
    const Split split = make_split(data.n(), f.common.train_frac, f.common.seed);
    const Vector w1 = init_params(spec, f.common.seed);
    const double alpha_tilde = spec.activation.q - 1.0;
    const double alpha = f.alpha.value_or(alpha_tilde);
    if (!(alpha > 0.0 && alpha <= 1.0)) usage_error("--alpha must lie in (0, 1]");

    const double c_X = compute_cX(data.X);
    const SpectralNorm cw1 = compute_cW(w1, ctx.layout, f.common.seed);
    auto constants_at = [&](double c_W, const std::vector<Vector>& ws) {
        GraphNorms nm = compute_norms(spec, *A, ws.front());
        for (std::size_t k = 1; k < ws.size(); ++k) {
            const GraphNorms other = compute_norms(spec, *A, ws[k]);
            if (other.g_inf > nm.g_inf) nm = other;
        }
        return std::make_tuple(nm, lipschitz_constant(spec, c_X, c_W, nm), holder_constant(spec, c_X, c_W, nm, alpha_tilde));
    };

    double R = 0.0;
    std::string radius_source;
    std::optional<Vector> w_final;
    std::optional<double> t0_used;
    if (f.R) {
        R = *f.R;
        radius_source = "flag";
    } else if (!f.trace.empty()) {
        R = TrainTrace::from_csv(read_file(f.trace)).max_dist;
        radius_source = "trace";
    } else {
        const double cw_start = f.cw.value_or(cw1.value);
        const auto [nm0, lip0, hol0] = constants_at(cw_start, {w1});
        const double t0 = parse_t0(f.train.t0, hol0.P_F, alpha, f.mu, warnings);
        t0_used = t0;
        const SgdConfig sc = make_sgd_config(f.train, f.common.seed, t0);
        if (sc.optimizer == Optimizer::Adam) warnings.push_back("certificate assumes vanilla SGD; trajectory was produced by Adam");
        TrainResult tr = run_sgd(ctx, data.labels, split, sc, w1);
        R = tr.trace.max_dist;
        w_final = tr.w;
        radius_source = "measured";
    }

    SpectralNorm cw_meas = cw1;
    std::vector<Vector> ws{w1};
    if (w_final) {
        const SpectralNorm cw2 = compute_cW(*w_final, ctx.layout, f.common.seed);
        cw_meas.value = std::max(cw1.value, cw2.value);
        cw_meas.converged = cw1.converged && cw2.converged;
        ws.push_back(*w_final);
    }
    if (!cw_meas.converged) warnings.push_back("power iteration did not converge; c_W is the last estimate");
    const double c_W = f.cw.value_or(cw_meas.value);
    if (f.cw && cw_meas.value > *f.cw)
        warnings.push_back("precondition violation: measured spectral norm " + fmt4(cw_meas.value) + " exceeds pinned c_W " + fmt4(*f.cw));
    const auto [nm, lip, hol] = constants_at(c_W, ws);
    if (!nm.g_exact) warnings.push_back("g_inf is the triangle-inequality upper bound (graph too large to materialize)");

    const InitialDiagnostics diag = initial_diagnostics(ctx, w1, data.labels);
    BoundInputs bi;
    bi.m = split.m();
    bi.u = split.u();
    bi.dim = static_cast<double>(ctx.layout.total);
    bi.T = f.train.T;
    bi.delta = f.delta;
    bi.alpha = alpha;
    bi.L_F = lip.L_F;
    bi.R = R;
    bi.b_ell = diag.b_ell;
    bi.b_g = diag.b_g;
    const BoundReport br = theorem1_certificate(bi);
    const CorollaryTerms cor = corollary_excess(alpha, bi.T, bi.delta, br.rate_value);

    const DegreeStats ds = degree_stats(data.graph);
    ojson j;
    j["schema"] = "transgap/1";
    j["model"] = arch_name(arch);
    j["dataset"] = data.name;
    ojson c;
    c["c_X"] = c_X;
    c["c_W"] = c_W;
    c["c_W_measured"] = cw_meas.value;
    c["c_W_pinned"] = f.cw.has_value();
    c["norms"] = {{"a_inf", nm.a_inf}, {"a2_inf", nm.a2_inf}, {"g_inf", nm.g_inf}, {"power_sum", nm.power_sum}};
    c["L_F"] = lip.L_F;
    if (arch == Arch::GPRGNN) c["L_components"] = {{"L1", lip.L1}, {"L2", lip.L2}};
    if (lip.gcnii) {
        const auto& k = *lip.gcnii;
        c["gcnii"] = {{"B1", k.B1}, {"B2", k.B2}, {"C1", k.C1}, {"C2", k.C2}, {"L1", k.L1}, {"L2", k.L2}};
        ModelSpec s0 = spec;
        std::fill(s0.alpha.begin(), s0.alpha.end(), 0.0);
        std::fill(s0.beta.begin(), s0.beta.end(), 0.0);
        c["gcnii_reference_alpha0_beta0"] = lipschitz_constant(s0, c_X, c_W, nm).L_F;
    }
    c["P_F"] = hol.P_F;
    c["holder"] = {{"P_col", hol.P_col}, {"Pt_col", hol.Pt_col}, {"activation_P", hol.activation_P},
                   {"aggregation", hol.aggregation}};
    c["alpha_tilde"] = alpha_tilde;
    c["degree_bound_value"] = degree_bound(ds);
    c["degree_stats"] = {{"deg_min", ds.deg_min}, {"deg_max", ds.deg_max}, {"n", ds.n}, {"edge_count", ds.edge_count}};
    if (f.drop_edge_p > 0.0) {
        const SparseGraph g2 = drop_edge(data.graph, f.drop_edge_p, f.drop_seed);
        const PropagationMatrix A2 = normalized_adjacency(g2);
        c["drop_edge"] = {{"p", f.drop_edge_p}, {"seed", f.drop_seed}, {"edge_count", g2.edge_count()},
                          {"a_inf", A2.inf_norm}, {"degree_bound", degree_bound(degree_stats(g2))}};
    }
    j["constants"] = c;
    j["diagnostics"] = {{"b_ell", diag.b_ell}, {"b_g", diag.b_g}, {"mean_grad_norm", diag.mean_grad_norm},
                        {"mean_grad_norm_sq", diag.mean_grad_norm_sq}};
    j["bound"] = {{"label", "measured-R certificate"},
                  {"radius_source", radius_source},
                  {"m", bi.m},
                  {"u", bi.u},
                  {"dim", bi.dim},
                  {"T", bi.T},
                  {"delta", bi.delta},
                  {"alpha", bi.alpha},
                  {"R", bi.R},
                  {"trc_term", br.trc_term},
                  {"dudley_term", br.dudley_term},
                  {"conc_term_1", br.conc_term_1},
                  {"conc_term_2", br.conc_term_2},
                  {"total", br.total},
                  {"rate_class", rate_class_name(br.rate_class)},
                  {"rate_value", br.rate_value}};
    j["theorem2_rate"] = theorem2_rate(alpha, bi.T);
    j["corollary"] = {{"generalization", cor.generalization}, {"optimization", cor.optimization}, {"total", cor.total()}};
    j["t0_theory"] = t0_from_theory(hol.P_F, alpha, f.mu);
    if (t0_used) j["t0_used"] = *t0_used;
    j["warnings"] = warnings;
    return j;
}

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
    if (!(f.delta > 0.0 && f.delta < 1.0)) usage_error("--delta must lie in (0, 1)");
    if (f.cw && !(*f.cw > 0.0)) usage_error("--cw must be positive");
    if (f.R && !(*f.R >= 0.0)) usage_error("--R must be nonnegative");
    if (!(f.drop_edge_p >= 0.0 && f.drop_edge_p <= 1.0)) usage_error("--drop-edge must lie in [0, 1]");
    check_train_flags(f.train);
    if (!f.compare) parse_arch(f.model.model);
    const DatasetBundle data = load_data(f.common);
    auto A = std::make_shared<const PropagationMatrix>(normalized_adjacency(data.graph));
    ojson result;
    if (f.compare) {
        std::vector<ojson> reports;
        for (Arch a : {Arch::GCN, Arch::GCNII, Arch::SGC, Arch::APPNP, Arch::GPRGNN}) reports.push_back(analyze_one(f, data, A, a));
        std::stable_sort(reports.begin(), reports.end(), [](const ojson& x, const ojson& y) {
            return x["constants"]["L_F"].get<double>() < y["constants"]["L_F"].get<double>();
        });
        result["schema"] = "transgap/1";
        result["graph"] = graph_json(data.graph, *A);
        result["compare"] = reports;
    } else {
        result = analyze_one(f, data, A, parse_arch(f.model.model));
    }
    const std::string text = result.dump(2) + "\n";
    if (f.out.empty()) {
        out << text;
    } else {
        write_file(f.out, text);
        if (f.compare) {
            for (const auto& r : result["compare"])
                out << r["model"].get<std::string>() << " L_F=" << fmt4(r["constants"]["L_F"].get<double>())
                    << " P_F=" << fmt4(r["constants"]["P_F"].get<double>())
                    << " total=" << fmt4(r["bound"]["total"].get<double>()) << "\n";
        } else {
            out << result["model"].get<std::string>() << " L_F=" << fmt4(result["constants"]["L_F"].get<double>())
                << " P_F=" << fmt4(result["constants"]["P_F"].get<double>())
                << " total=" << fmt4(result["bound"]["total"].get<double>()) << "\n";
        }
    }
    return 0;
}

// ---------------------------------------------------------------- gen

struct GenFlags {
    std::string out;
    std::vector<int> blocks{100, 100};
    double pin = 0.1;
    double pout = 0.01;
    std::uint64_t seed = 0;
    SbmFeatures feat;
    std::string name = "sbm";
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
    if (f.out.empty()) usage_error("--out is required");
    const DatasetBundle b = make_sbm_bundle(f.blocks, f.pin, f.pout, f.seed, f.feat, f.name);
    save_bundle(b, f.out);
    const PropagationMatrix A = normalized_adjacency(b.graph);
    const DegreeStats s = degree_stats(b.graph);
    out << "wrote " << f.out << ": n=" << s.n << " edges=" << s.edge_count << " deg_min=" << s.deg_min
        << " deg_max=" << s.deg_max << " a_inf=" << fmt4(A.inf_norm) << " degree_bound=" << fmt4(degree_bound(s)) << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainCmdFlags {
    ModelFlags model;
    TrainFlags train;
    Common common;
    std::optional<double> alpha;
    std::optional<double> mu;
    std::string out;
    std::string save_params;
};

int cmd_train(const TrainCmdFlags& f, std::ostream& out, std::ostream& err) {
    check_train_flags(f.train);
    if (f.out.empty()) usage_error("--out is required");
    const Arch arch = parse_arch(f.model.model);
    const DatasetBundle data = load_data(f.common);
    auto A = std::make_shared<const PropagationMatrix>(normalized_adjacency(data.graph));
    const ModelSpec spec = make_spec(f.model, arch, data.d(), data.num_classes, f.model.layers);
    const ModelContext ctx = make_context(spec, A, data.X);
    const Split split = make_split(data.n(), f.common.train_frac, f.common.seed);
    const Vector w1 = init_params(spec, f.common.seed);
    std::vector<std::string> warnings;
    double P_F = 1.0;
    const double alpha = f.alpha.value_or(spec.activation.q - 1.0);
    if (f.train.t0 == "theory") {
        if (spec.layers != 2) usage_error("--t0 theory needs a 2-layer model (no constants for deeper stacks)");
        const GraphNorms nm = compute_norms(spec, *A, w1);
        P_F = holder_constant(spec, compute_cX(data.X), compute_cW(w1, ctx.layout, f.common.seed).value, nm, spec.activation.q - 1.0).P_F;
    }
    const double t0 = parse_t0(f.train.t0, P_F, alpha, f.mu, warnings);
    const SgdConfig sc = make_sgd_config(f.train, f.common.seed, t0);
    if (sc.optimizer == Optimizer::Adam && f.train.t0 == "theory")
        warnings.push_back("theory-driven t0 is only meaningful for vanilla SGD");
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    const TrainResult tr = run_sgd(ctx, data.labels, split, sc, w1);
    write_file(f.out, tr.trace.to_csv());
    if (!f.save_params.empty()) save_params(f.save_params, tr.w, ctx.layout);
    const Checkpoint& last = tr.trace.rows.back();
    out << arch_name(arch) << " T=" << f.train.T << " R_m=" << fmt4(last.R_m) << " R_u=" << fmt4(last.R_u)
        << " loss_gap=" << fmt4(std::abs(last.R_m - last.R_u)) << " acc_u=" << fmt4(last.acc_u)
        << " grad_gap=" << fmt4(last.grad_gap) << " g_emp=" << fmt4(last.g_emp) << "\n";
    return 0;
}

// ---------------------------------------------------------------- experiment

struct ExperimentFlags {
    Common common;
    ModelFlags model;
    std::string models = "gcn,sgc";
    int seeds = 10;
    std::uint64_t seed_base = 0;
    int T = 300;
    int batch = 512;
    std::string optimizer = "adam";
    std::string schedule = "constant";
    double lr = 0.01;
    double t0 = 10.0;
    int eval_every = 10;
    int deep_layers = 6;
    double l2 = 0.0;
    int threads = 0;
    std::string out;
};

int cmd_experiment(const ExperimentFlags& f, std::ostream& out) {
    if (f.out.empty()) usage_error("--out is required");
    if (f.seeds < 1) usage_error("--seeds must be at least 1");
    if (f.T < 1) usage_error("--T must be at least 1");
    ExperimentConfig cfg;
    cfg.models.clear();
    std::string cur;
    for (char ch : f.models + ",") {
        if (ch == ',') {
            if (!cur.empty()) cfg.models.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cfg.seeds.clear();
    for (int s = 0; s < f.seeds; ++s) cfg.seeds.push_back(f.seed_base + static_cast<std::uint64_t>(s));
    cfg.train_frac = f.common.train_frac;
    cfg.T = f.T;
    cfg.hidden = f.model.hidden;
    cfg.batch_size = f.batch;
    cfg.optimizer = f.optimizer == "adam" ? Optimizer::Adam : Optimizer::Sgd;
    cfg.schedule.kind = f.schedule == "constant" ? LrSchedule::Kind::Constant : LrSchedule::Kind::InverseTime;
    cfg.schedule.c = f.lr;
    cfg.schedule.t0 = f.t0;
    cfg.eval_every = f.eval_every;
    cfg.q = f.model.q;
    cfg.K = f.model.K;
    cfg.gamma = f.model.gamma;
    cfg.gcnii_alpha = f.model.gcnii_alpha;
    cfg.gcnii_beta = f.model.gcnii_beta;
    cfg.deep_layers = f.deep_layers;
    cfg.l2 = f.l2;
    cfg.threads = f.threads;
    cfg.output_dir = f.out;
    cfg.validate();
    const DatasetBundle data = load_data(f.common);
    const GapReport rep = run_experiment(cfg, data);
    for (const auto& r : rep.rows)
        out << r.model << " loss_gap=" << fmt4(r.loss_gap.mean) << "+/-" << fmt4(r.loss_gap.std)
            << " acc_gap=" << fmt4(r.acc_gap.mean) << "+/-" << fmt4(r.acc_gap.std) << " test_acc=" << fmt4(r.test_acc.mean)
            << "+/-" << fmt4(r.test_acc.std) << " grad_gap=" << fmt4(r.grad_gap.mean) << "+/-" << fmt4(r.grad_gap.std) << "\n";
    return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckFlags {
    std::string model = "all";
    GradcheckOptions opt;
    std::optional<double> tol;
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
    if (!(f.opt.q > 1.0 && f.opt.q <= 2.0)) usage_error("--q must lie in (1, 2]");
    if (f.opt.n < 2 || f.opt.d < 1 || f.opt.h < 1 || f.opt.C < 1 || f.opt.n < f.opt.C)
        usage_error("gradcheck dimensions must satisfy n >= C >= 1, n >= 2, d, hidden >= 1");
    std::vector<Arch> archs;
    if (f.model == "all")
        archs = {Arch::GCN, Arch::GCNII, Arch::SGC, Arch::APPNP, Arch::GPRGNN};
    else
        archs = {parse_arch(f.model)};
    const double tol = f.tol.value_or(gradcheck_tolerance(f.opt.q));
    bool ok = true;
    for (Arch a : archs) {
        const GradcheckResult r = gradcheck(a, f.opt);
        const bool pass = r.max_rel_err <= tol;
        ok = ok && pass;
        out << arch_name(a) << " max_rel_err=" << fmt4(r.max_rel_err) << " max_abs_err=" << fmt4(r.max_abs_err)
            << " instances=" << r.instances << " tol=" << fmt4(tol) << (pass ? " ok" : " FAIL") << "\n";
    }
    return ok ? 0 : static_cast<int>(ErrorKind::Numeric);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

std::vector<std::string> merge_config(const std::vector<std::string>& args, const std::string& json_text) {
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        usage_error("--config: invalid JSON: " + std::string(e.what()));
    }
    if (!cfg.is_object()) usage_error("--config: top level must be a JSON object");
    std::string sub;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            ++i;
            continue;
        }
        if (!args[i].empty() && args[i][0] != '-') {
            sub = args[i];
            break;
        }
    }
    std::vector<std::pair<std::string, nlohmann::json>> entries;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        if (it.value().is_object()) {
            if (it.key() == sub)
                for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) entries.emplace_back(jt.key(), jt.value());
        } else {
            entries.emplace_back(it.key(), it.value());
        }
    }
    std::vector<std::string> merged = args;
    for (const auto& [key, v] : entries) {
        const std::string flag = "--" + key;
        if (key == "config" || has_flag(args, flag)) continue;
        if (v.is_boolean()) {
            if (v.get<bool>()) merged.push_back(flag);
        } else if (v.is_array()) {
            std::string joined;
            for (std::size_t k = 0; k < v.size(); ++k) joined += (k ? "," : "") + json_scalar(v[k]);
            merged.push_back(flag);
            merged.push_back(joined);
        } else if (!v.is_null()) {
            merged.push_back(flag);
            merged.push_back(json_scalar(v));
        }
    }
    return merged;
}

int run_cli(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Transductive generalization-gap toolkit for graph neural networks", "transgap"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with default flag values (explicit flags win)");

    GenFlags gen;
    CLI::App* g = app.add_subcommand("gen", "Generate a stochastic-block-model dataset bundle");
    g->add_option("--out", gen.out, "Output bundle directory")->required();
    g->add_option("--blocks", gen.blocks, "Comma-separated block sizes")->delimiter(',');
    g->add_option("--pin", gen.pin, "Within-block edge probability");
    g->add_option("--pout", gen.pout, "Between-block edge probability");
    g->add_option("--seed", gen.seed, "Generator seed");
    g->add_option("--d", gen.feat.d, "Feature dimension");
    g->add_option("--signal", gen.feat.signal, "Class-mean feature scale");
    g->add_option("--noise", gen.feat.noise, "Per-node feature noise scale");
    g->add_option("--name", gen.name, "Dataset name stored in meta.json");

    AnalyzeFlags an;
    CLI::App* a = app.add_subcommand("analyze", "Compute constants and the generalization-gap certificate");
    a->add_option("--data", an.common.data, "Dataset bundle directory")->required();
    add_model_flags(a, an.model, true, false);
    a->add_flag("--compare", an.compare, "Report all five architectures sorted by L_F");
    a->add_option("--cw", an.cw, "Pin c_W instead of measuring spectral norms");
    a->add_option("--delta", an.delta, "Confidence parameter delta in (0, 1)");
    a->add_option("--alpha", an.alpha, "Rate exponent alpha (default q - 1)");
    a->add_option("--mu", an.mu, "PL constant for the corollary t0");
    a->add_option("--R", an.R, "Radius override (default: measured trajectory radius)");
    a->add_option("--trace", an.trace, "Trace CSV whose max dist is used as the radius");
    a->add_option("--drop-edge", an.drop_edge_p, "Also report norms after dropping edges with this probability");
    a->add_option("--drop-seed", an.drop_seed, "Seed for --drop-edge");
    a->add_option("--seed", an.common.seed, "Seed for split, initialization and sampling");
    a->add_option("--train-frac", an.common.train_frac, "Fraction of labelled training nodes");
    a->add_flag("--row-normalize", an.common.row_normalize, "Rescale feature rows to unit norm");
    an.train.t0 = "theory";
    add_train_flags(a, an.train);
    a->add_option("--out", an.out, "Write the JSON report here instead of stdout");

    TrainCmdFlags tr;
    CLI::App* t = app.add_subcommand("train", "Run transductive SGD and write a trace CSV");
    t->add_option("--data", tr.common.data, "Dataset bundle directory")->required();
    add_model_flags(t, tr.model, true, true);
    add_train_flags(t, tr.train);
    t->add_option("--alpha", tr.alpha, "Rate exponent alpha for --t0 theory (default q - 1)");
    t->add_option("--mu", tr.mu, "PL constant for --t0 theory");
    t->add_option("--seed", tr.common.seed, "Seed for split, initialization and sampling");
    t->add_option("--train-frac", tr.common.train_frac, "Fraction of labelled training nodes");
    t->add_flag("--row-normalize", tr.common.row_normalize, "Rescale feature rows to unit norm");
    t->add_option("--out", tr.out, "Trace CSV path")->required();
    t->add_option("--save-params", tr.save_params, "Write final parameters (raw float64 + JSON layout)");

    ExperimentFlags ex;
    CLI::App* e = app.add_subcommand("experiment", "Multi-seed gap experiment with report and curves");
    e->add_option("--data", ex.common.data, "Dataset bundle directory")->required();
    e->add_option("--models", ex.models, "Comma-separated model ids (gcn, sgc, gcnii, appnp, gpr, gcn_star, gcnii_star)");
    e->add_option("--seeds", ex.seeds, "Number of seeds");
    e->add_option("--seed-base", ex.seed_base, "First seed");
    e->add_option("--T", ex.T, "Iterations per run");
    add_model_flags(e, ex.model, false, false);
    e->add_option("--batch", ex.batch, "Batch size (capped at the training-set size)");
    e->add_option("--optimizer", ex.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    e->add_option("--schedule", ex.schedule, "inverse_time or constant")->check(CLI::IsMember({"inverse_time", "constant"}));
    e->add_option("--lr", ex.lr, "Schedule numerator c");
    e->add_option("--t0", ex.t0, "Schedule offset t0 (inverse_time)");
    e->add_option("--eval-every", ex.eval_every, "Checkpoint stride");
    e->add_option("--deep-layers", ex.deep_layers, "Propagation depth of gcn_star and gcnii_star");
    e->add_option("--l2", ex.l2, "Optional L2 penalty coefficient");
    e->add_option("--train-frac", ex.common.train_frac, "Fraction of labelled training nodes");
    e->add_flag("--row-normalize", ex.common.row_normalize, "Rescale feature rows to unit norm");
    e->add_option("--threads", ex.threads, "Worker threads (0: TRANSGAP_THREADS or all cores)");
    e->add_option("--out", ex.out, "Output directory")->required();

    GradcheckFlags gc;
    CLI::App* c = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
    c->add_option("--model", gc.model, "Architecture or 'all'");
    c->add_option("--n", gc.opt.n, "Nodes");
    c->add_option("--d", gc.opt.d, "Input dimension");
    c->add_option("--hidden", gc.opt.h, "Hidden width");
    c->add_option("--C", gc.opt.C, "Classes");
    c->add_option("--seed", gc.opt.seed, "Seed");
    c->add_option("--q", gc.opt.q, "Activation exponent q in (1, 2]");
    c->add_option("--instances", gc.opt.instances, "Random (w, i) instances per architecture");
    c->add_option("--step", gc.opt.step, "Finite-difference step");
    c->add_option("--layers", gc.opt.layers, "Propagation depth for GCN and GCNII");
    c->add_option("--tol", gc.tol, "Relative-error tolerance (default 1e-5, or 1e-3 when q < 1.5)");

    try {
        std::vector<std::string> args = args_in;
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
            if (!path.empty()) {
                args = merge_config(args, read_file(path));
                break;
            }
        }
        std::vector<std::string> rev(args.rbegin(), args.rend());
        try {
            app.parse(rev);
        } catch (const CLI::ParseError& pe) {
            const int code = app.exit(pe, out, err);
            return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
        }
        if (g->parsed()) return cmd_gen(gen, out);
        if (a->parsed()) return cmd_analyze(an, out);
        if (t->parsed()) return cmd_train(tr, out, err);
        if (e->parsed()) return cmd_experiment(ex, out);
        if (c->parsed()) return cmd_gradcheck(gc, out);
        return static_cast<int>(ErrorKind::Usage);
    } catch (const Error& ex2) {
        err << "error: " << ex2.what() << "\n";
        return static_cast<int>(ex2.kind());
    } catch (const std::exception& ex2) {
        err << "error: " << ex2.what() << "\n";
        return static_cast<int>(ErrorKind::Numeric);
    }
}

}  // namespace transgap
