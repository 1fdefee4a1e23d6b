#include "transgap/nn.hpp"
#include "transgap/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>

namespace transgap {

namespace {

void check_finite(const Matrix& M, const char* layer) {
    if (!M.allFinite()) numeric_error(std::string("non-finite values in layer ") + layer);
}

Matrix act(const ActivationSpec& a, const Matrix& U) {
    return U.unaryExpr([&a](double x) { return a.eval(x); });
}

Matrix act_grad(const ActivationSpec& a, const Matrix& U, const Matrix& dH) {
    return dH.cwiseProduct(U.unaryExpr([&a](double x) { return a.deriv(x); }));
}

void put(Vector& g, const Block& b, const Matrix& M) { block_view(g, b) = M; }

}  // namespace

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::GCN: return "gcn";
        case Arch::GCNII: return "gcnii";
        case Arch::SGC: return "sgc";
        case Arch::APPNP: return "appnp";
        case Arch::GPRGNN: return "gpr";
    }
    return "?";
}

Arch parse_arch(const std::string& s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "gcn") return Arch::GCN;
    if (l == "gcnii") return Arch::GCNII;
    if (l == "sgc") return Arch::SGC;
    if (l == "appnp") return Arch::APPNP;
    if (l == "gpr" || l == "gprgnn" || l == "gpr-gnn") return Arch::GPRGNN;
    usage_error("unknown architecture '" + s + "'");
}

void ModelSpec::validate() const {
    if (d <= 0 || h <= 0 || C <= 0) usage_error("model dimensions must be positive");
    if (!(activation.q > 1.0 && activation.q <= 2.0)) usage_error("activation exponent q must lie in (1, 2]");
    if (arch == Arch::GCN && layers < 2) usage_error("GCN needs at least 2 layers");
    if (arch == Arch::GCNII) {
        if (layers < 1) usage_error("GCNII needs at least 1 layer");
        if (alpha.size() != static_cast<std::size_t>(layers) || beta.size() != static_cast<std::size_t>(layers))
            usage_error("GCNII alpha/beta lists must have one entry per layer");
        for (std::size_t l = 0; l < alpha.size(); ++l)
            if (!(alpha[l] >= 0.0 && alpha[l] <= 1.0 && beta[l] >= 0.0 && beta[l] <= 1.0))
                usage_error("GCNII alpha and beta must lie in [0,1]");
    }
    if (arch == Arch::APPNP) {
        if (!(gamma >= 0.0 && gamma <= 1.0)) usage_error("APPNP gamma must lie in [0,1]");
        if (K < 1) usage_error("APPNP K must be at least 1");
    }
    if (arch == Arch::GPRGNN && K < 0) usage_error("GPR-GNN K must be nonnegative");
}

const Block& Layout::find(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return b;
    usage_error("layout has no block named " + name);
}

Layout make_layout(const ModelSpec& spec) {
    spec.validate();
    Layout L;
    auto add = [&L](std::string name, int r, int c, bool is_matrix = true) {
        L.blocks.push_back(Block{std::move(name), r, c, L.total, is_matrix});
        L.total += static_cast<std::int64_t>(r) * c;
    };
    switch (spec.arch) {
        case Arch::GCN:
            for (int l = 1; l <= spec.layers; ++l)
                add("W" + std::to_string(l), l == 1 ? spec.d : spec.h, l == spec.layers ? spec.C : spec.h);
            break;
        case Arch::GCNII:
            add("W0", spec.d, spec.h);
            for (int l = 1; l <= spec.layers; ++l) add("W" + std::to_string(l), spec.h, spec.h);
            add("W" + std::to_string(spec.layers + 1), spec.h, spec.C);
            break;
        case Arch::SGC:
        case Arch::APPNP:
            add("W1", spec.d, spec.h);
            add("W2", spec.h, spec.C);
            break;
        case Arch::GPRGNN:
            add("W1", spec.d, spec.h);
            add("W2", spec.h, spec.C);
            add("gamma", spec.K + 1, 1, false);
            break;
    }
    return L;
}

Eigen::Map<const Matrix> block_view(const Vector& w, const Block& b) {
    return Eigen::Map<const Matrix>(w.data() + b.offset, b.rows, b.cols);
}

Eigen::Map<Matrix> block_view(Vector& w, const Block& b) {
    return Eigen::Map<Matrix>(w.data() + b.offset, b.rows, b.cols);
}

Vector init_params(const ModelSpec& spec, std::uint64_t seed) {
    const Layout L = make_layout(spec);
    Vector w(L.total);
    Rng rng(seed, "init_params");
    for (const auto& b : L.blocks) {
        if (!b.is_matrix) {
            const auto c = appnp_coefficients(0.1, spec.K == 0 ? 1 : spec.K);
            for (int k = 0; k < b.rows; ++k) w[b.offset + k] = spec.K == 0 ? 1.0 : c[k];
            continue;
        }
        const double r = 1.0 / std::sqrt(static_cast<double>(b.rows));
        for (std::int64_t k = 0; k < b.size(); ++k) w[b.offset + k] = rng.uniform(-r, r);
    }
    return w;
}

Matrix ModelContext::apply_filter(const Matrix& M) const {
    if (filter) return filter->apply(M);
    return apply_polynomial(*A, filter_coeffs, M);
}

ModelContext make_context(const ModelSpec& spec, std::shared_ptr<const PropagationMatrix> A, Matrix X) {
    spec.validate();
    if (!A) usage_error("model context needs a propagation matrix");
    if (X.rows() != A->n) usage_error("feature rows do not match node count");
    if (X.cols() != spec.d) usage_error("feature width " + std::to_string(X.cols()) + " does not match d=" + std::to_string(spec.d));
    ModelContext ctx;
    ctx.spec = spec;
    ctx.layout = make_layout(spec);
    ctx.A = std::move(A);
    ctx.X = std::move(X);
    if (spec.arch == Arch::GCN) ctx.propagated_X = ctx.A->apply(ctx.X);
    if (spec.arch == Arch::SGC) ctx.propagated_X = ctx.A->apply(ctx.A->apply(ctx.X));
    if (spec.arch == Arch::APPNP) {
        ctx.filter_coeffs = appnp_coefficients(spec.gamma, spec.K);
        if (ctx.A->n <= kMaterializeLimit)
            ctx.filter = std::make_shared<const PropagationMatrix>(materialize_polynomial(*ctx.A, ctx.filter_coeffs));
    }
    return ctx;
}

// Cache contents per architecture:
//   GCN    S[l] = A H(l-1) (S[0] = A X), U[l] = S[l] W(l+1), H[l] = sigma(U[l]) for l < L-1;
//          logits = S[L-1] W(L).
//   SGC    S[0] = A^2 X, U[0] = S[0] W1, logits = U[0] W2.
//   GCNII  U[0] = X W0, H[0] = sigma(U[0]); for l >= 1
//          S[l] = (1-alpha_l) A H[l-1] + alpha_l H[0], U[l] = S[l] Psi(beta_l, W_l), H[l] = sigma(U[l]);
//          logits = H[L] W(L+1).
//   APPNP  U[0] = X W1, H[0] = sigma(U[0]), U[1] = H[0] W2, H[1] = sigma(U[1]), logits = g(A) H[1].
//   GPR    as APPNP up to H[1]; powers = [H[1], A H[1], ..., A^K H[1]], logits = sum_k gamma_k powers[k].
ForwardCache forward(const ModelContext& ctx, const Vector& w) {
    const ModelSpec& s = ctx.spec;
    const Layout& L = ctx.layout;
    if (w.size() != L.total) usage_error("parameter vector length does not match layout");
    const ActivationSpec& a = s.activation;
    const PropagationMatrix& A = *ctx.A;
    ForwardCache fc;
    switch (s.arch) {
        case Arch::GCN: {
            const int nl = s.layers;
            fc.S.push_back(ctx.propagated_X);
            for (int l = 1; l < nl; ++l) {
                fc.U.push_back(fc.S.back() * block_view(w, L.blocks[l - 1]));
                fc.H.push_back(act(a, fc.U.back()));
                check_finite(fc.H.back(), ("H" + std::to_string(l)).c_str());
                fc.S.push_back(A.apply(fc.H.back()));
            }
            fc.logits = fc.S.back() * block_view(w, L.blocks[nl - 1]);
            break;
        }
        case Arch::SGC: {
            fc.S.push_back(ctx.propagated_X);
            fc.U.push_back(fc.S[0] * block_view(w, L.blocks[0]));
            fc.logits = fc.U[0] * block_view(w, L.blocks[1]);
            break;
        }
        case Arch::GCNII: {
            const int nl = s.layers;
            fc.U.push_back(ctx.X * block_view(w, L.blocks[0]));
            fc.H.push_back(act(a, fc.U[0]));
            fc.S.emplace_back();
            check_finite(fc.H[0], "H0");
            for (int l = 1; l <= nl; ++l) {
                const double al = s.alpha[l - 1];
                const double be = s.beta[l - 1];
                fc.S.push_back((1.0 - al) * A.apply(fc.H[l - 1]) + al * fc.H[0]);
                fc.U.push_back((1.0 - be) * fc.S[l] + be * (fc.S[l] * block_view(w, L.blocks[l])));
                fc.H.push_back(act(a, fc.U[l]));
                check_finite(fc.H[l], ("H" + std::to_string(l)).c_str());
            }
            fc.logits = fc.H[nl] * block_view(w, L.blocks[nl + 1]);
            break;
        }
        case Arch::APPNP:
        case Arch::GPRGNN: {
            fc.U.push_back(ctx.X * block_view(w, L.blocks[0]));
            fc.H.push_back(act(a, fc.U[0]));
            fc.U.push_back(fc.H[0] * block_view(w, L.blocks[1]));
            fc.H.push_back(act(a, fc.U[1]));
            check_finite(fc.H[1], "H2");
            if (s.arch == Arch::APPNP) {
                fc.logits = ctx.apply_filter(fc.H[1]);
            } else {
                fc.powers = gpr_powers(A, fc.H[1], s.K);
                const auto gamma = block_view(w, L.blocks[2]);
                fc.logits = Matrix::Zero(A.n, s.C);
                for (int k = 0; k <= s.K; ++k) fc.logits += gamma(k, 0) * fc.powers[k];
            }
            break;
        }
    }
    check_finite(fc.logits, "logits");
    fc.probs.resize(fc.logits.rows(), fc.logits.cols());
    for (Eigen::Index i = 0; i < fc.logits.rows(); ++i) {
        const Vector row = fc.logits.row(i).transpose();
        const double mx = row.maxCoeff();
        const Vector e = (row.array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
        fc.probs.row(i) = (e / e.sum()).transpose();
    }
    return fc;
}

LossResult softmax_xent(const Eigen::Ref<const Vector>& logits, int label) {
    if (label < 0 || label >= logits.size()) usage_error("label " + std::to_string(label) + " out of range");
    if (!logits.allFinite()) numeric_error("non-finite logits");
    const double mx = logits.maxCoeff();
    const Vector e = (logits.array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
    LossResult r;
    r.probs = e / e.sum();
    r.loss = -std::log(std::max(r.probs[label], 1e-12));
    return r;
}

double node_loss(const ForwardCache& fc, int i, int label) {
    if (label < 0 || label >= fc.probs.cols()) usage_error("label " + std::to_string(label) + " out of range");
    return -std::log(std::max(fc.probs(i, label), 1e-12));
}

double loss_sample(const ModelContext& ctx, const Vector& w, int i, int label) {
    return node_loss(forward(ctx, w), i, label);
}

Vector grad_weighted(const ModelContext& ctx, const Vector& w, const ForwardCache& fc,
                     const std::vector<std::pair<int, double>>& rows, const std::vector<int>& labels) {
    const ModelSpec& s = ctx.spec;
    const Layout& L = ctx.layout;
    const ActivationSpec& a = s.activation;
    const PropagationMatrix& A = *ctx.A;
    const int n = A.n;

    Matrix G = Matrix::Zero(n, s.C);
    for (const auto& [i, wt] : rows) {
        if (i < 0 || i >= n) usage_error("node index out of range");
        const int y = labels.at(static_cast<std::size_t>(i));
        if (y < 0 || y >= s.C) usage_error("label out of range");
        for (int c = 0; c < s.C; ++c) G(i, c) += wt * (fc.probs(i, c) - (c == y ? 1.0 : 0.0));
    }

    Vector g = Vector::Zero(L.total);
    switch (s.arch) {
        case Arch::GCN: {
            const int nl = s.layers;
            put(g, L.blocks[nl - 1], fc.S[nl - 1].transpose() * G);
            Matrix dH = A.apply(Matrix(G * block_view(w, L.blocks[nl - 1]).transpose()));
            for (int l = nl - 1; l >= 1; --l) {
                const Matrix dU = act_grad(a, fc.U[l - 1], dH);
                put(g, L.blocks[l - 1], fc.S[l - 1].transpose() * dU);
                if (l > 1) dH = A.apply(Matrix(dU * block_view(w, L.blocks[l - 1]).transpose()));
            }
            break;
        }
        case Arch::SGC: {
            put(g, L.blocks[1], fc.U[0].transpose() * G);
            const Matrix dU = G * block_view(w, L.blocks[1]).transpose();
            put(g, L.blocks[0], fc.S[0].transpose() * dU);
            break;
        }
        case Arch::GCNII: {
            const int nl = s.layers;
            put(g, L.blocks[nl + 1], fc.H[nl].transpose() * G);
            Matrix dH = G * block_view(w, L.blocks[nl + 1]).transpose();
            Matrix dH0 = Matrix::Zero(n, s.h);
            for (int l = nl; l >= 1; --l) {
                const double al = s.alpha[l - 1];
                const double be = s.beta[l - 1];
                const Matrix dU = act_grad(a, fc.U[l], dH);
                put(g, L.blocks[l], be * (fc.S[l].transpose() * dU));
                const Matrix dS = (1.0 - be) * dU + be * (dU * block_view(w, L.blocks[l]).transpose());
                dH0 += al * dS;
                dH = (1.0 - al) * A.apply(dS);
            }
            dH0 += dH;
            put(g, L.blocks[0], ctx.X.transpose() * act_grad(a, fc.U[0], dH0));
            break;
        }
        case Arch::APPNP:
        case Arch::GPRGNN: {
            Matrix dH1;
            if (s.arch == Arch::APPNP) {
                dH1 = ctx.apply_filter(G);
            } else {
                const Block& gb = L.blocks[2];
                const auto gamma = block_view(w, gb);
                std::vector<double> coeffs(static_cast<std::size_t>(s.K) + 1);
                for (int k = 0; k <= s.K; ++k) {
                    coeffs[k] = gamma(k, 0);
                    g[gb.offset + k] = G.cwiseProduct(fc.powers[k]).sum();
                }
                dH1 = apply_polynomial(A, coeffs, G);
            }
            const Matrix dU1 = act_grad(a, fc.U[1], dH1);
            put(g, L.blocks[1], fc.H[0].transpose() * dU1);
            const Matrix dU0 = act_grad(a, fc.U[0], Matrix(dU1 * block_view(w, L.blocks[1]).transpose()));
            put(g, L.blocks[0], ctx.X.transpose() * dU0);
            break;
        }
    }
    return g;
}

Vector grad_sample(const ModelContext& ctx, const Vector& w, int i, int label) {
    std::vector<int> labels(static_cast<std::size_t>(ctx.n()), 0);
    if (i < 0 || i >= ctx.n()) usage_error("node index out of range");
    labels[i] = label;
    return grad_weighted(ctx, w, forward(ctx, w), {{i, 1.0}}, labels);
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& w, double step) {
    if (!(step > 0.0)) usage_error("finite-difference step must be positive");
    Vector g(w.size());
    Vector wp = w;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        wp[j] = w[j] + step;
        const double lp = f(wp);
        wp[j] = w[j] - step;
        const double lm = f(wp);
        wp[j] = w[j];
        g[j] = (lp - lm) / (2.0 * step);
    }
    return g;
}

Vector grad_fd_oracle(const ModelContext& ctx, const Vector& w, int i, int label, double step) {
    return central_difference([&](const Vector& v) { return loss_sample(ctx, v, i, label); }, w, step);
}

void save_params(const std::string& path, const Vector& w, const Layout& layout) {
    static_assert(std::endian::native == std::endian::little, "parameter files are little-endian");
    if (w.size() != layout.total) usage_error("parameter vector length does not match layout");
    std::ofstream out(path, std::ios::binary);
    if (!out) data_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    nlohmann::ordered_json j;
    j["total"] = layout.total;
    j["dtype"] = "float64-le";
    j["order"] = "column-major";
    for (const auto& b : layout.blocks)
        j["blocks"].push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"offset", b.offset}});
    std::ofstream side(path + ".json");
    if (!side) data_error("cannot write " + path + ".json");
    side << j.dump(2) << "\n";
}

Vector load_params(const std::string& path, const Layout& layout) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error("cannot read " + path);
    Vector w(layout.total);
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(w.size() * sizeof(double)) || in.peek() != EOF)
        data_error(path + " does not match the expected parameter count " + std::to_string(layout.total));
    return w;
}

}  // namespace transgap
