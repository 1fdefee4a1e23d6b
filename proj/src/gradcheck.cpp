#include "transgap/nn.hpp"
#include "transgap/rng.hpp"

#include <algorithm>
#include <cmath>

namespace transgap {

namespace {

double min_abs_preactivation(const ForwardCache& fc) {
    double m = INFINITY;
    for (const auto& U : fc.U) m = std::min(m, U.cwiseAbs().minCoeff());
    return m;
}

}  // namespace

double gradcheck_tolerance(double q) { return q < 1.5 ? 1e-3 : 1e-5; }

GradcheckResult gradcheck(Arch arch, const GradcheckOptions& opt) {
    if (opt.n < opt.C || opt.C < 1) usage_error("gradcheck: need n >= C >= 1");
    if (opt.instances < 1) usage_error("gradcheck: need at least one instance");
    std::vector<int> sizes(static_cast<std::size_t>(opt.C), opt.n / opt.C);
    sizes.back() += opt.n % opt.C;
    SbmGraph g = sbm_generate(sizes, 0.5, 0.1, opt.seed);
    auto A = std::make_shared<const PropagationMatrix>(normalized_adjacency(g.graph));

    Rng rng(opt.seed, "gradcheck");
    Matrix X(opt.n, opt.d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();

    ModelSpec spec;
    spec.arch = arch;
    spec.d = opt.d;
    spec.h = opt.h;
    spec.C = opt.C;
    spec.activation = ActivationSpec::make(opt.q);
    spec.layers = opt.layers;
    spec.alpha.assign(static_cast<std::size_t>(opt.layers), 0.3);
    spec.beta.assign(static_cast<std::size_t>(opt.layers), 0.6);
    spec.gamma = 0.2;
    spec.K = 3;
    const ModelContext ctx = make_context(spec, A, X);

    GradcheckResult res;
    const bool avoid_kinks = opt.q < 1.5;
    for (int inst = 0; inst < opt.instances; ++inst) {
        Vector w;
        for (int attempt = 0;; ++attempt) {
            w = 2.0 * init_params(spec, rng.next());
            for (const auto& b : ctx.layout.blocks)
                if (!b.is_matrix)
                    for (int k = 0; k < b.rows; ++k) w[b.offset + k] = rng.uniform(-1.0, 1.0);
            if (!avoid_kinks || min_abs_preactivation(forward(ctx, w)) > opt.kink_margin) break;
            ++res.resamples;
            if (attempt > 10000) numeric_error("gradcheck: could not sample weights away from activation kinks");
        }
        const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.n)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.C)));
        const Vector ga = grad_sample(ctx, w, i, y);
        const Vector gf = grad_fd_oracle(ctx, w, i, y, opt.step);
        for (Eigen::Index j = 0; j < ga.size(); ++j) {
            const double diff = std::abs(ga[j] - gf[j]);
            const double den = std::max({std::abs(ga[j]), std::abs(gf[j]), opt.rel_floor});
            res.max_abs_err = std::max(res.max_abs_err, diff);
            res.max_rel_err = std::max(res.max_rel_err, diff / den);
        }
        ++res.instances;
    }
    return res;
}

}  // namespace transgap
