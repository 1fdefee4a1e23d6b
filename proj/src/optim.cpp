#include "transgap/optim.hpp"

#include "transgap/rng.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace transgap {

double LrSchedule::eta(int t) const {
    if (kind == Kind::Constant) return c;
    return c / (static_cast<double>(t) + t0);
}

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string TrainTrace::to_csv() const {
    std::string out = std::string(csv_header()) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.t);
        for (double v : {r.R_m, r.R_u, r.acc_m, r.acc_u, r.grad_gap, r.dist, r.g_emp}) out += "," + fmt17(v);
        out += "\n";
    }
    return out;
}

TrainTrace TrainTrace::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != csv_header()) data_error("trace CSV: missing or wrong header");
    TrainTrace tr;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Checkpoint c;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &c.t, &c.R_m, &c.R_u, &c.acc_m, &c.acc_u,
                        &c.grad_gap, &c.dist, &c.g_emp) != 8)
            data_error("trace CSV: malformed line " + std::to_string(lineno));
        tr.max_dist = std::max(tr.max_dist, c.dist);
        tr.rows.push_back(c);
    }
    return tr;
}

int argmax_row(const Matrix& M, Eigen::Index i) {
    int best = 0;
    for (Eigen::Index c = 1; c < M.cols(); ++c)
        if (M(i, c) > M(i, best)) best = static_cast<int>(c);
    return best;
}

EvalResult evaluate_cache(const ForwardCache& fc, const std::vector<int>& labels, const Split& split) {
    EvalResult r;
    auto pass = [&](const std::vector<int>& idx, double& loss, double& acc) {
        double s = 0.0;
        int hit = 0;
        for (int i : idx) {
            s += node_loss(fc, i, labels[i]);
            hit += argmax_row(fc.probs, i) == labels[i] ? 1 : 0;
        }
        loss = idx.empty() ? 0.0 : s / static_cast<double>(idx.size());
        acc = idx.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(idx.size());
    };
    pass(split.train, r.R_m, r.acc_m);
    pass(split.test, r.R_u, r.acc_u);
    return r;
}

EvalResult evaluate(const ModelContext& ctx, const std::vector<int>& labels, const Split& split, const Vector& w) {
    return evaluate_cache(forward(ctx, w), labels, split);
}

double gradient_gap_cache(const ModelContext& ctx, const ForwardCache& fc, const std::vector<int>& labels,
                          const Split& split, const Vector& w) {
    std::vector<std::pair<int, double>> rows;
    rows.reserve(split.train.size() + split.test.size());
    for (int i : split.train) rows.emplace_back(i, 1.0 / split.m());
    for (int i : split.test) rows.emplace_back(i, -1.0 / split.u());
    return grad_weighted(ctx, w, fc, rows, labels).norm();
}

double gradient_gap(const ModelContext& ctx, const std::vector<int>& labels, const Split& split, const Vector& w) {
    return gradient_gap_cache(ctx, forward(ctx, w), labels, split, w);
}

double t0_from_theory(double P_F, double alpha, std::optional<double> mu) {
    if (!(alpha > 0.0)) usage_error("t0_from_theory: alpha must be positive");
    if (!(P_F > 0.0)) usage_error("t0_from_theory: P_F must be positive");
    double base = std::pow(2.0 * P_F, 1.0 / alpha);
    if (mu) {
        if (!(*mu > 0.0)) usage_error("t0_from_theory: mu must be positive");
        base *= 2.0 / *mu;
    }
    return std::max(base, 1.0);
}

TrainResult run_sgd(const ModelContext& ctx, const std::vector<int>& labels, const Split& split,
                    const SgdConfig& config, std::optional<Vector> w_init) {
    if (config.T < 1) usage_error("T must be at least 1");
    if (config.batch_size < 1) usage_error("batch size must be at least 1");
    if (config.eval_every < 1) usage_error("eval_every must be at least 1");
    if (split.train.empty() || split.test.empty()) usage_error("split must have nonempty train and test sets");
    if (labels.size() != static_cast<std::size_t>(ctx.n())) usage_error("label count does not match node count");

    std::vector<int> train_labels(labels.size(), -1);
    for (int i : split.train) train_labels[i] = labels[i];

    TrainResult res;
    res.w_init = w_init ? *w_init : init_params(ctx.spec, config.seed);
    if (res.w_init.size() != ctx.layout.total) usage_error("initial parameter vector has wrong length");
    Vector w = res.w_init;
    Vector adam_m = Vector::Zero(w.size());
    Vector adam_v = Vector::Zero(w.size());
    Rng rng(config.seed, "sgd_batches");
    double g_emp = 0.0;

    auto checkpoint = [&](int t, const ForwardCache& fc) {
        Checkpoint c;
        c.t = t;
        const EvalResult e = evaluate_cache(fc, labels, split);
        c.R_m = e.R_m;
        c.R_u = e.R_u;
        c.acc_m = e.acc_m;
        c.acc_u = e.acc_u;
        if (!std::isfinite(c.R_m) || !std::isfinite(c.R_u)) numeric_error("non-finite loss at checkpoint t=" + std::to_string(t));
        c.grad_gap = gradient_gap_cache(ctx, fc, labels, split, w);
        c.dist = (w - res.w_init).norm();
        c.g_emp = g_emp;
        res.trace.rows.push_back(c);
    };

    ForwardCache fc = forward(ctx, w);
    checkpoint(0, fc);
    const double B = static_cast<double>(config.batch_size);
    std::vector<std::pair<int, double>> rows(static_cast<std::size_t>(config.batch_size));
    for (int t = 1; t <= config.T; ++t) {
        const double eta = config.schedule.eta(t);
        for (auto& r : rows) r = {split.train[rng.below(split.train.size())], 1.0 / B};
        Vector g = grad_weighted(ctx, w, fc, rows, train_labels);
        const double gnorm = config.batch_size == 1
                                 ? g.norm()
                                 : grad_weighted(ctx, w, fc, {{rows[0].first, 1.0}}, train_labels).norm();
        g_emp = std::max(g_emp, std::sqrt(eta) * gnorm);
        if (config.l2 > 0.0) g += config.l2 * w;
        if (config.optimizer == Optimizer::Sgd) {
            w -= eta * g;
        } else {
            adam_m = config.adam_beta1 * adam_m + (1.0 - config.adam_beta1) * g;
            adam_v = config.adam_beta2 * adam_v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
            const double bc1 = 1.0 - std::pow(config.adam_beta1, t);
            const double bc2 = 1.0 - std::pow(config.adam_beta2, t);
            w.array() -= eta * (adam_m.array() / bc1) / ((adam_v.array() / bc2).sqrt() + config.adam_eps);
        }
        res.trace.max_dist = std::max(res.trace.max_dist, (w - res.w_init).norm());
        fc = forward(ctx, w);
        if (t % config.eval_every == 0 || t == config.T) checkpoint(t, fc);
    }
    res.w = w;
    return res;
}

}  // namespace transgap
