#include "transgap/analysis.hpp"

#include "transgap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace transgap {

double compute_cX(const Matrix& X) {
    if (X.rows() == 0) usage_error("compute_cX: empty feature matrix");
    return X.rowwise().norm().maxCoeff();
}

Matrix row_normalize(const Matrix& X) {
    Matrix Y = X;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        const double r = Y.row(i).norm();
        if (r > 0.0) Y.row(i) /= r;
    }
    return Y;
}

SpectralNorm spectral_norm(const Matrix& M, std::uint64_t seed, double tol, int max_iter) {
    SpectralNorm out;
    if (M.size() == 0 || M.isZero(0.0)) return out;
    Rng rng(seed, "spectral_norm");
    Vector v(M.cols());
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = rng.uniform(-1.0, 1.0);
    v.normalize();
    double lambda = (M * v).squaredNorm();
    out.converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        Vector next = M.transpose() * (M * v);
        const double nn = next.norm();
        if (nn == 0.0) {
            lambda = 0.0;
            out.converged = true;
            out.iterations = it;
            break;
        }
        v = next / nn;
        const double updated = (M * v).squaredNorm();
        const double change = std::abs(updated - lambda);
        lambda = updated;
        out.iterations = it;
        if (change <= tol * std::max(1.0, lambda)) {
            out.converged = true;
            break;
        }
    }
    out.value = std::sqrt(lambda);
    return out;
}

SpectralNorm compute_cW(const Vector& w, const Layout& layout, std::uint64_t seed) {
    if (w.size() != layout.total) usage_error("compute_cW: parameter vector does not match layout");
    SpectralNorm out;
    for (const auto& b : layout.blocks) {
        if (!b.is_matrix) continue;
        const SpectralNorm s = spectral_norm(Matrix(block_view(w, b)), seed);
        out.value = std::max(out.value, s.value);
        out.converged = out.converged && s.converged;
        out.iterations = std::max(out.iterations, s.iterations);
    }
    return out;
}

GraphNorms compute_norms(const ModelSpec& spec, const PropagationMatrix& A, const Vector& w) {
    GraphNorms g;
    g.a_inf = A.inf_norm;
    g.a2_inf = inf_norm_power(A, 2);
    switch (spec.arch) {
        case Arch::GCN:
        case Arch::GCNII: g.g_inf = g.a_inf; break;
        case Arch::SGC: g.g_inf = g.a2_inf; break;
        case Arch::APPNP:
        case Arch::GPRGNN: {
            std::vector<double> coeffs;
            if (spec.arch == Arch::APPNP) {
                coeffs = appnp_coefficients(spec.gamma, spec.K);
            } else if (w.size() > 0) {
                const Layout L = make_layout(spec);
                if (w.size() != L.total) usage_error("compute_norms: parameter vector does not match layout");
                const Block& b = L.find("gamma");
                coeffs.assign(w.data() + b.offset, w.data() + b.offset + b.rows);
            } else {
                coeffs = spec.K == 0 ? std::vector<double>{1.0} : appnp_coefficients(0.1, spec.K);
            }
            g.g_inf = polynomial_inf_norm(A, coeffs, &g.g_exact);
            for (int k = 0; k <= spec.K; ++k) g.power_sum += inf_norm_power(A, k);
            break;
        }
    }
    return g;
}

LipschitzResult lipschitz_constant(const ModelSpec& spec, double c_X, double c_W, const GraphNorms& nm) {
    if (!(c_X >= 0.0) || !(c_W >= 0.0)) usage_error("lipschitz_constant: c_X and c_W must be nonnegative");
    LipschitzResult r;
    const double a = nm.a_inf;
    switch (spec.arch) {
        case Arch::GCN:
            if (spec.layers != 2) usage_error("no Lipschitz formula for GCN with " + std::to_string(spec.layers) + " layers");
            if (!(a > 0.0)) usage_error("lipschitz_constant: missing ||A||_inf");
            r.L_F = 2.0 * c_X * c_W * a * a;
            break;
        case Arch::SGC:
            if (!(nm.a2_inf > 0.0)) usage_error("lipschitz_constant: missing ||A^2||_inf");
            r.L_F = 2.0 * c_X * c_W * nm.a2_inf;
            break;
        case Arch::APPNP:
            if (!(nm.g_inf > 0.0)) usage_error("lipschitz_constant: missing ||g(A)||_inf");
            r.L_F = 2.0 * c_X * c_W * nm.g_inf;
            break;
        case Arch::GPRGNN:
            if (!(nm.power_sum > 0.0)) usage_error("lipschitz_constant: missing power sum");
            r.L1 = std::numbers::sqrt2 * c_X * c_W * c_W * nm.power_sum;
            r.L2 = 2.0 * c_X * c_W * nm.g_inf;
            r.L_F = std::sqrt(r.L1 * r.L1 + r.L2 * r.L2);
            break;
        case Arch::GCNII: {
            if (spec.layers != 2) usage_error("no Lipschitz formula for GCNII with " + std::to_string(spec.layers) + " layers");
            if (!(a > 0.0)) usage_error("lipschitz_constant: missing ||A||_inf");
            const double a1 = spec.alpha[0], a2 = spec.alpha[1];
            const double b1 = spec.beta[0], b2 = spec.beta[1];
            GcniiIntermediates k;
            k.C1 = 1.0 - b1 + b1 * c_W;
            k.C2 = 1.0 - b2 + b2 * c_W;
            k.B1 = c_X * c_W * k.C1 * ((1.0 - a1) * a + a1);
            k.B2 = ((1.0 - a2) * k.B1 * a + a2 * c_X * c_W) * k.C2;
            k.L1 = 2.0 * (2.0 + c_W * c_W * b2 * b2 / (k.C2 * k.C2)) * k.B2 * k.B2;
            k.L2 = 2.0 * (1.0 - a2) * (1.0 - a2) * b1 * b1 * c_W * c_W * a * a * k.B1 * k.B1 * k.C2 * k.C2 / (k.C1 * k.C1);
            r.L1 = k.L1;
            r.L2 = k.L2;
            r.L_F = std::sqrt(k.L1 + k.L2);
            r.gcnii = k;
            break;
        }
    }
    return r;
}

TransductiveTerms transductive_terms(double m, double u) {
    if (!(m >= 1.0) || !(u >= 1.0)) usage_error("transductive_terms: m and u must be at least 1");
    TransductiveTerms t;
    t.Q = 1.0 / m + 1.0 / u;
    t.S = (m + u) / ((m + u - 0.5) * (1.0 - 1.0 / (2.0 * std::max(m, u))));
    t.c0 = std::sqrt(32.0 * std::log(4.0 * std::numbers::e) / 3.0);
    return t;
}

double dudley_constant() { return std::sqrt(std::log(3.0)) + 1.5 * std::sqrt(std::numbers::pi); }

RademacherParts rademacher_parts(double m, double u, double dim, double L_F, double R, double b_ell) {
    if (!(m >= 1.0) || !(u >= 1.0)) usage_error("rademacher_upper: m and u must be at least 1");
    if (!(dim >= 0.0) || !(L_F >= 0.0) || !(R >= 0.0) || !(b_ell >= 0.0))
        usage_error("rademacher_upper: inputs must be nonnegative");
    const double k = std::pow(m + u, 1.5) / (m * u);
    RademacherParts p;
    p.trc = b_ell * k;
    p.dudley = 12.0 * k * std::sqrt(dim) * dudley_constant() * L_F * R;
    return p;
}

double rademacher_upper(double m, double u, double dim, double L_F, double R, double b_ell) {
    return rademacher_parts(m, u, dim, L_F, R, b_ell).total();
}

std::string rate_class_name(RateClass c) {
    switch (c) {
        case RateClass::AlphaLtHalf: return "alpha_lt_half";
        case RateClass::AlphaEqHalf: return "alpha_eq_half";
        case RateClass::AlphaGtHalf: return "alpha_gt_half";
    }
    return "?";
}

RateClass rate_class_of(double alpha) {
    if (std::abs(alpha - 0.5) <= 1e-12) return RateClass::AlphaEqHalf;
    return alpha < 0.5 ? RateClass::AlphaLtHalf : RateClass::AlphaGtHalf;
}

double rate_factor(double alpha, double T) {
    if (!(alpha > 0.0 && alpha <= 1.0)) usage_error("rate: alpha must lie in (0, 1]");
    if (!(T >= 1.0)) usage_error("rate: T must be at least 1");
    const double lt = std::log(T);
    switch (rate_class_of(alpha)) {
        case RateClass::AlphaLtHalf: return std::pow(T, (1.0 - 2.0 * alpha) / 2.0) * std::sqrt(lt);
        case RateClass::AlphaEqHalf: return lt;
        case RateClass::AlphaGtHalf: return std::sqrt(lt);
    }
    return 0.0;
}

BoundReport theorem1_certificate(const BoundInputs& in) {
    if (!(in.delta > 0.0 && in.delta < 1.0)) usage_error("delta must lie in (0, 1)");
    const RademacherParts rp = rademacher_parts(in.m, in.u, in.dim, in.L_F, in.R, in.b_ell);
    const TransductiveTerms tt = transductive_terms(in.m, in.u);
    BoundReport r;
    r.trc_term = rp.trc;
    r.dudley_term = rp.dudley;
    r.conc_term_1 = tt.c0 * tt.Q * std::sqrt(std::min(in.m, in.u));
    r.conc_term_2 = std::sqrt(tt.S * tt.Q / 2.0 * std::log(2.0 / in.delta));
    r.total = r.trc_term + r.dudley_term + r.conc_term_1 + r.conc_term_2;
    r.rate_class = rate_class_of(in.alpha);
    r.rate_value = rate_factor(in.alpha, in.T);
    return r;
}

double theorem2_rate(double alpha, double T) { return rate_factor(alpha, T); }

CorollaryTerms corollary_excess(double alpha, double T, double delta, double rate_value) {
    if (!(alpha > 0.0 && alpha <= 1.0)) usage_error("corollary: alpha must lie in (0, 1]");
    if (!(T >= 1.0)) usage_error("corollary: T must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) usage_error("delta must lie in (0, 1)");
    CorollaryTerms c;
    c.generalization = rate_value;
    if (alpha < 1.0) {
        c.optimization = std::pow(T, -alpha);
    } else {
        const double l = std::log(1.0 / delta);
        c.optimization = std::log(T) * l * l * l / T;
    }
    return c;
}

InitialDiagnostics initial_diagnostics(const ModelContext& ctx, const Vector& w, const std::vector<int>& labels) {
    if (labels.size() != static_cast<std::size_t>(ctx.n())) usage_error("label count does not match node count");
    const ForwardCache fc = forward(ctx, w);
    InitialDiagnostics d;
    for (int i = 0; i < ctx.n(); ++i) {
        d.b_ell = std::max(d.b_ell, node_loss(fc, i, labels[i]));
        const double gn = grad_weighted(ctx, w, fc, {{i, 1.0}}, labels).norm();
        d.b_g = std::max(d.b_g, gn);
        d.mean_grad_norm += gn;
        d.mean_grad_norm_sq += gn * gn;
    }
    d.mean_grad_norm /= ctx.n();
    d.mean_grad_norm_sq /= ctx.n();
    return d;
}

}  // namespace transgap
