#include "transgap/analysis.hpp"
#include "transgap/harness.hpp"
#include "transgap/rng.hpp"

#include <Eigen/SVD>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

using namespace transgap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    /// Set when the only failing part is the documented criterion 6(c) pattern.
    bool documented_failure = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

const Arch kAll[] = {Arch::GCN, Arch::GCNII, Arch::SGC, Arch::APPNP, Arch::GPRGNN};

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    Outcome o;
    for (double q : {2.0, 1.1}) {
        for (Arch a : kAll) {
            GradcheckOptions opt;
            opt.q = q;
            const GradcheckResult r = gradcheck(a, opt);
            const double tol = gradcheck_tolerance(q);
            const bool ok = r.instances == 10 && r.max_rel_err <= tol;
            o.pass = o.pass && ok;
            o.detail += arch_name(a) + "@q=" + fmt(q, 2) + " rel=" + fmt(r.max_rel_err, 2) + (ok ? "" : "(over " + fmt(tol, 1) + ")") + " ";
        }
    }
    const double secs = seconds_since(t0);
    o.pass = o.pass && secs < 10.0;
    o.detail += "time=" + fmt(secs, 3) + "s";
    return o;
}

Outcome activation_suite() {
    Outcome o;
    long violations = 0;
    double worst_dev = 0.0;
    for (double q : {1.1, 1.5, 2.0}) {
        const ActivationSpec a = ActivationSpec::make(q);
        Rng rng(static_cast<std::uint64_t>(q * 1000), "acceptance-activation");
        for (int k = 0; k < 100000; ++k) {
            const double x = rng.uniform(-3.0, 3.0), y = rng.uniform(-3.0, 3.0);
            if (std::abs(a.eval(x)) > std::abs(x)) ++violations;
            if (std::abs(a.deriv(x)) > 1.0) ++violations;
            if (std::abs(a.deriv(x) - a.deriv(y)) > q * std::pow(std::abs(x - y), q - 1.0) * (1 + 1e-12) + 1e-15) ++violations;
        }
        double dev = std::abs(a.eval(a.t) - a.t);
        for (int k = 0; k <= 200000; ++k) {
            const double x = -1.0 + 3.0 * k / 200000.0;
            dev = std::max(dev, std::abs(a.eval(x) - std::max(x, 0.0)));
        }
        worst_dev = std::max(worst_dev, std::abs(dev - (a.t - a.c)));
    }
    const double dev2 = ActivationSpec::make(2.0).max_relu_deviation();
    o.pass = violations == 0 && worst_dev < 1e-12 && std::abs(dev2 - 0.25) < 1e-12;
    o.detail = "violations=" + std::to_string(violations) + " (3 x 1e5 samples) sup-deviation error=" + fmt(worst_dev, 2) +
               " q=2 deviation=" + fmt(dev2);
    return o;
}

Outcome lipschitz_soundness() {
    Outcome o;
    long total_viol = 0;
    double tightest = 0.0;
    for (Arch a : kAll) {
        const DatasetBundle data = make_sbm_bundle({30, 30}, 0.15, 0.02, 42, SbmFeatures{8, 2.0, 1.0});
        ModelSpec s;
        s.arch = a;
        s.d = data.d();
        s.h = 6;
        s.C = data.num_classes;
        const ModelContext ctx =
            make_context(s, std::make_shared<const PropagationMatrix>(normalized_adjacency(data.graph)), data.X);
        const double cX = compute_cX(data.X);
        Rng rng(static_cast<std::uint64_t>(a), "acceptance-lipschitz");
        int viol = 0;
        for (int k = 0; k < 1000; ++k) {
            const Vector w = init_params(s, rng.next()) * rng.uniform(0.5, 3.0);
            Vector dir(w.size());
            for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = rng.normal();
            const Vector v = w + std::pow(10.0, rng.uniform(-5.0, 0.0)) * dir.normalized();
            const double cW = std::max(compute_cW(w, ctx.layout).value, compute_cW(v, ctx.layout).value);
            GraphNorms norms = compute_norms(s, *ctx.A, w);
            norms.g_inf = std::max(norms.g_inf, compute_norms(s, *ctx.A, v).g_inf);
            const double L = lipschitz_constant(s, cX, cW, norms).L_F;
            const int i = static_cast<int>(rng.below(60));
            const int y = data.labels[static_cast<std::size_t>(i)];
            const double lhs = std::abs(loss_sample(ctx, w, i, y) - loss_sample(ctx, v, i, y));
            const double rhs = L * (w - v).norm();
            if (lhs > rhs * (1 + 1e-12)) ++viol;
            if (rhs > 0) tightest = std::max(tightest, lhs / rhs);
        }
        total_viol += viol;
        o.detail += arch_name(a) + ":" + std::to_string(viol) + " ";
    }
    o.pass = total_viol == 0;
    o.detail += "violations over 5 x 1e3 pairs; max ratio lhs/rhs=" + fmt(tightest, 3);
    return o;
}

Outcome constant_orderings() {
    Outcome o;
    int sgc_gcn = 0, gcnii_eq = 0, gpr = 0, deg = 0;
    double worst_eq = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const int a = 10 + static_cast<int>(seed % 20);
        const SparseGraph g = sbm_generate({a, 40 - a, 25}, 0.2, 0.03, 1000 + seed).graph;
        const PropagationMatrix A = normalized_adjacency(g);
        auto spec = [](Arch arch) {
            ModelSpec s;
            s.arch = arch;
            s.d = 4;
            s.h = 4;
            s.C = 3;
            return s;
        };
        const double cX = 1.0 + 0.1 * static_cast<double>(seed % 7), cW = 0.5 + 0.05 * static_cast<double>(seed % 11);
        const ModelSpec gcn = spec(Arch::GCN), sgc = spec(Arch::SGC), gp = spec(Arch::GPRGNN);
        ModelSpec gcnii = spec(Arch::GCNII);
        gcnii.alpha = {0.0, 0.0};
        gcnii.beta = {0.0, 0.0};
        const double lg = lipschitz_constant(gcn, cX, cW, compute_norms(gcn, A)).L_F;
        sgc_gcn += lipschitz_constant(sgc, cX, cW, compute_norms(sgc, A)).L_F <= lg;
        const double diff = std::abs(lipschitz_constant(gcnii, cX, cW, compute_norms(gcnii, A)).L_F - lg);
        worst_eq = std::max(worst_eq, diff);
        gcnii_eq += diff <= 1e-12;
        const LipschitzResult lr = lipschitz_constant(gp, cX, cW, compute_norms(gp, A));
        gpr += lr.L_F >= lr.L2;
        deg += A.inf_norm <= degree_bound(degree_stats(g));
    }
    o.pass = sgc_gcn == 100 && gcnii_eq == 100 && gpr == 100 && deg == 100;
    o.detail = "SGC<=GCN " + std::to_string(sgc_gcn) + "/100, GCNII(0,0)=GCN " + std::to_string(gcnii_eq) +
               "/100 (max diff " + fmt(worst_eq, 2) + "), GPR>=L2 " + std::to_string(gpr) + "/100, degree bound " +
               std::to_string(deg) + "/100";
    return o;
}

Outcome formula_oracles() {
    Outcome o;
    double worst = 0.0;
    auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
    check(transductive_terms(1, 1).c0, 5.0451765597065249388);
    check(dudley_constant(), 3.7068278503264789874);
    check(transductive_terms(3, 7).Q, 0.47619047619047619048);
    check(transductive_terms(3, 7).S, 1.1336032388663967611);
    check(transductive_terms(60, 140).S, 1.0060994780858957429);
    check(transductive_terms(1000, 10).S, 1.0009957925966450288);
    check(rademacher_upper(1, 1, 1, 1, 1, 1), 128.642336388282474);
    check(rademacher_upper(3, 7, 10, 2.5, 0.3, 0.7), 159.91814328166712472);
    check(rademacher_upper(60, 140, 2176, 9.3, 0.02, 0.69), 130.18696612045536104);
    check(theorem1_certificate(BoundInputs{1, 1, 1, 1, 0.5, 1, 1, 1, 1, 0.0}).total, 140.65539202316336791);
    const BoundReport r = theorem1_certificate(BoundInputs{60, 140, 2176, 300, 0.05, 1, 9.3, 0.02, 0.69, 0.0});
    check(r.total, 131.32763456896737806);
    check(r.rate_value, 2.3882592980361661432);
    check(theorem1_certificate(BoundInputs{3, 7, 10, 100, 0.1, 0.25, 2.5, 0.3, 0.7, 0.0}).total, 164.97853704089057867);
    check(theorem2_rate(1.0, 100), 2.1459660262893472396);
    check(theorem2_rate(0.25, 300), 9.9394371276373001813);
    check(theorem2_rate(0.5, 300), 5.7037824746562010594);
    check(corollary_excess(1.0, 300, 0.05, 0.0).optimization, 0.51115274131674476241);
    check(corollary_excess(0.7, 300, 0.05, 0.0).optimization, 0.0184507966187563799);
    check(corollary_excess(0.5, 16, 0.05, 0.0).optimization, 0.25);
    o.pass = worst <= 1e-10;
    const double c0 = transductive_terms(1, 1).c0, D = dudley_constant();
    o.detail = "19 goldens, max abs err=" + fmt(worst, 2) + "; c0=" + fmt(c0, 11) + " (printed 5.0447, diff " +
               fmt(c0 - 5.0447, 2) + "), sqrt(ln3)+1.5sqrt(pi)=" + fmt(D, 11) + " (printed 3.70675, diff " +
               fmt(D - 3.70675, 2) + ")";
    return o;
}

Outcome qualitative_experiment() {
    Outcome o;
    const DatasetBundle data = make_sbm_bundle({100, 100}, 0.1, 0.01, 0, SbmFeatures{});
    ExperimentConfig cfg;
    cfg.models = {"gcn", "sgc", "gcnii", "gcn_star", "gcnii_star"};
    cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    cfg.T = 300;
    cfg.optimizer = Optimizer::Sgd;
    cfg.schedule = LrSchedule{LrSchedule::Kind::Constant, 0.02, 0.0};
    cfg.q = 2.0;
    cfg.threads = 1;
    const auto t0 = Clock::now();
    const GapReport rep = run_experiment(cfg, data);
    const double secs = seconds_since(t0);

    const double gcn = rep.row("gcn").loss_gap.mean, sgc = rep.row("sgc").loss_gap.mean;
    const double gcnii = rep.row("gcnii").loss_gap.mean, gcn_star = rep.row("gcn_star").loss_gap.mean;
    const double gcnii_star = rep.row("gcnii_star").loss_gap.mean;
    const bool a = sgc < gcn;
    int trend = 0;
    for (const RunResult& r : rep.row("gcn").runs) {
        double g30 = -1, g300 = -1;
        for (const Checkpoint& c : r.trace.rows) {
            if (c.t == 30) g30 = std::abs(c.R_m - c.R_u);
            if (c.t == 300) g300 = std::abs(c.R_m - c.R_u);
        }
        trend += g300 >= g30 && g30 >= 0;
    }
    const bool b = trend >= 8;
    const bool c1 = gcn_star > gcn;
    const bool c2 = gcnii_star <= 1.5 * gcnii && gcnii <= 1.5 * gcnii_star;
    const bool budget = secs < 300.0;
    o.pass = a && b && c1 && c2 && budget;
    o.documented_failure = a && b && budget && !(c1 && c2);
    o.detail = std::string("(a) ") + (a ? "PASS" : "FAIL") + " SGC " + fmt(sgc, 4) + " vs GCN " + fmt(gcn, 4) + "; (b) " +
               (b ? "PASS" : "FAIL") + " " + std::to_string(trend) + "/10 seeds; (c) " + (c1 && c2 ? "PASS" : "FAIL") +
               " GCN* " + fmt(gcn_star, 4) + " vs GCN " + fmt(gcn, 4) + ", GCNII* " + fmt(gcnii_star, 4) + " vs GCNII " +
               fmt(gcnii, 4) + "; time=" + fmt(secs, 4) + "s (budget 300s) " + (budget ? "PASS" : "FAIL");
    return o;
}

struct Capture {
    int code = -1;
    std::string out;
};

Capture run_binary(const std::string& args) {
    const std::string cmd = std::string(TRANSGAP_CLI_PATH) + " " + args + " 2>&1";
    Capture c;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return c;
    std::array<char, 4096> buf{};
    std::size_t k;
    while ((k = fread(buf.data(), 1, buf.size(), p)) > 0) c.out.append(buf.data(), k);
    const int status = pclose(p);
    c.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return c;
}

std::string dir_contents(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + "\n" + read_file(f.string()) + "\n";
    return all;
}

Outcome determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "transgap_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string data = (root / "data").string();
    if (run_binary("gen --out " + data + " --blocks 30,30 --pin 0.2 --pout 0.02 --seed 5 --d 16").code != 0) {
        o.pass = false;
        o.detail = "gen for the shared dataset failed";
        return o;
    }
    struct Case {
        std::string name;
        std::string args;
        bool output_is_dir;
    };
    const std::vector<Case> cases = {
        {"gen", "gen --blocks 40,40 --pin 0.15 --pout 0.02 --seed 9 --d 12 --out ", true},
        {"analyze", "analyze --data " + data + " --model gcnii --T 40 --out ", false},
        {"train", "train --data " + data + " --model gpr --T 40 --batch 4 --seed 3 --out ", false},
        {"experiment", "experiment --data " + data + " --models gcn,appnp --seeds 2 --T 20 --hidden 8 --threads 2 --out ", true},
        {"gradcheck", "gradcheck --instances 3", false},
    };
    for (const Case& c : cases) {
        std::string outputs[2];
        bool ok = true;
        for (int k = 0; k < 2; ++k) {
            const bool has_out = c.name != "gradcheck";
            const fs::path target = root / (c.name + "_" + std::to_string(k));
            const Capture cap = run_binary(c.args + (has_out ? target.string() : std::string()));
            ok = ok && cap.code == 0;
            std::string produced = cap.out;
            const std::string tstr = target.string();
            for (std::size_t pos; (pos = produced.find(tstr)) != std::string::npos;) produced.replace(pos, tstr.size(), "<out>");
            outputs[k] = produced;
            if (has_out) outputs[k] += c.output_is_dir ? dir_contents(target) : read_file(target.string());
        }
        const bool same = ok && outputs[0] == outputs[1];
        o.pass = o.pass && same;
        o.detail += c.name + (same ? ":identical " : ":DIFFERENT ");
    }
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    std::vector<SparseGraph> corpus{build_graph({{0, 1}, {0, 2}, {1, 2}}, 3), build_graph({{0, 1}, {1, 2}}, 3),
                                    build_graph({}, 1), build_graph({}, 4)};
    std::vector<std::pair<int, int>> star, cycle;
    for (int i = 1; i < 7; ++i) star.emplace_back(0, i);
    for (int i = 0; i < 9; ++i) cycle.emplace_back(i, (i + 1) % 9);
    corpus.push_back(build_graph(star, 7));
    corpus.push_back(build_graph(cycle, 9));
    for (std::uint64_t s = 0; s < 20; ++s) {
        const int a = 2 + static_cast<int>(s % 8);
        corpus.push_back(sbm_generate({a, 20 - 2 * a > 0 ? 20 - 2 * a : 1, a}, 0.5, 0.1, s).graph);
    }
    double worst_pow = 0.0;
    for (const SparseGraph& g : corpus) {
        const PropagationMatrix P = normalized_adjacency(g);
        const Matrix D = P.to_dense();
        Matrix Pk = Matrix::Identity(g.n, g.n);
        for (int k = 0; k <= 6; ++k) {
            const double dense = Pk.cwiseAbs().rowwise().sum().maxCoeff();
            worst_pow = std::max(worst_pow, std::abs(inf_norm_power(P, k) - dense));
            Pk = Pk * D;
        }
    }
    double worst_svd = 0.0;
    Rng rng(8, "acceptance-svd");
    for (int r = 1; r <= 8; ++r)
        for (int c = 1; c <= 8; ++c)
            for (int rep = 0; rep < 5; ++rep) {
                Matrix M(r, c);
                for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = rng.normal();
                const double ref = Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
                worst_svd = std::max(worst_svd, std::abs(spectral_norm(M, rng.next()).value - ref));
            }
    o.pass = worst_pow <= 1e-12 && worst_svd <= 1e-8;
    o.detail = std::to_string(corpus.size()) + " graphs (n<=20), k=0..6: max |inf_norm_power - dense|=" + fmt(worst_pow, 2) +
               "; 320 matrices up to 8x8: max |spectral_norm - SVD|=" + fmt(worst_svd, 2);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {1, "gradient correctness", gradient_correctness},
        {2, "activation property suite", activation_suite},
        {3, "Lipschitz soundness", lipschitz_soundness},
        {4, "constant orderings", constant_orderings},
        {5, "formula oracles", formula_oracles},
        {6, "qualitative experiment reproduction", qualitative_experiment},
        {7, "determinism", determinism},
        {8, "oracle equivalence on small instances", oracle_equivalence},
    };
    int unexpected = 0;
    for (const Criterion& c : criteria) {
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail << std::endl;
        if (!o.pass && !o.documented_failure) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
