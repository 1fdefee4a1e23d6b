#pragma once

#include "transgap/common.hpp"
#include "transgap/graph.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace transgap {

/// Hoelder-smooth modification of ReLU with exponent q in (1, 2]:
/// sigma(x) = 0 (x <= 0), x^q (0 < x <= t), x - t + c (x > t),
/// with t = (1/q)^(1/(q-1)) and c = t^q.
struct ActivationSpec {
    double q = 2.0;
    double t = 0.5;
    double c = 0.25;

    static ActivationSpec make(double q);
    double eval(double x) const;
    double deriv(double x) const;
    /// Constant of the vector Hoelder property in dimension d: q d^((2-q)/2).
    double holder_constant(int d) const;
    /// sup_x |sigma(x) - relu(x)| = t - t^q.
    double max_relu_deviation() const { return t - c; }
};

double act_eval(const ActivationSpec& a, double x);
double act_deriv(const ActivationSpec& a, double x);

enum class Arch { GCN, GCNII, SGC, APPNP, GPRGNN };

std::string arch_name(Arch a);
/// Accepts gcn, gcnii, sgc, appnp, gpr / gprgnn (case-insensitive).
Arch parse_arch(const std::string& s);

struct ModelSpec {
    Arch arch = Arch::GCN;
    int d = 1;
    int h = 1;
    int C = 2;
    ActivationSpec activation;
    /// Propagation depth for GCN (number of weight layers) and GCNII (number
    /// of residual layers). 2 is the standard model; larger values give the
    /// stacked depth variants.
    int layers = 2;
    /// GCNII per-layer residual and identity-mapping weights (length = layers).
    std::vector<double> alpha{0.1, 0.1};
    std::vector<double> beta{0.5, 0.5};
    /// APPNP teleport probability.
    double gamma = 0.1;
    /// APPNP / GPR-GNN polynomial order.
    int K = 10;

    void validate() const;
};

struct Block {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::int64_t offset = 0;
    bool is_matrix = true;
    std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
};

/// Column-major parameter layout. GCN: [W1..WL], SGC/APPNP: [W1; W2],
/// GCNII: [W0; W1..WL; W(L+1)], GPR-GNN: [W1; W2; gamma(K+1)].
struct Layout {
    std::vector<Block> blocks;
    std::int64_t total = 0;

    const Block& find(const std::string& name) const;
};

Layout make_layout(const ModelSpec& spec);

/// Read-only view of a matrix block inside a flat parameter vector.
Eigen::Map<const Matrix> block_view(const Vector& w, const Block& b);
Eigen::Map<Matrix> block_view(Vector& w, const Block& b);

/// Uniform on +-1/sqrt(fan_in) per matrix; GPR gamma set to the APPNP
/// coefficients with teleport 0.1.
Vector init_params(const ModelSpec& spec, std::uint64_t seed);

/// Model inputs that do not depend on w: propagation operator, features and
/// derived constant products.
struct ModelContext {
    ModelSpec spec;
    Layout layout;
    std::shared_ptr<const PropagationMatrix> A;
    Matrix X;
    /// GCN with 2 layers: A X. SGC: A^2 X.
    Matrix propagated_X;
    /// APPNP filter coefficients and, when n <= kMaterializeLimit, the filter.
    std::vector<double> filter_coeffs;
    std::shared_ptr<const PropagationMatrix> filter;

    int n() const { return A->n; }
    Matrix apply_filter(const Matrix& M) const;
};

ModelContext make_context(const ModelSpec& spec, std::shared_ptr<const PropagationMatrix> A, Matrix X);

struct ForwardCache {
    /// Per-layer propagated inputs, pre-activations and activations. Their
    /// meaning per architecture is documented in models.cpp.
    std::vector<Matrix> S;
    std::vector<Matrix> U;
    std::vector<Matrix> H;
    std::vector<Matrix> powers;
    Matrix logits;
    Matrix probs;
};

ForwardCache forward(const ModelContext& ctx, const Vector& w);

struct LossResult {
    double loss = 0.0;
    Vector probs;
};

/// Max-subtracted softmax followed by -log(max(prob[label], 1e-12)).
LossResult softmax_xent(const Eigen::Ref<const Vector>& logits, int label);

/// Per-node cross-entropy from a forward cache.
double node_loss(const ForwardCache& fc, int i, int label);

double loss_sample(const ModelContext& ctx, const Vector& w, int i, int label);

/// Sum over the given (node, weight) pairs of weight * grad l(w; z_node),
/// computed by a single backward pass seeded at the output rows in the given
/// order.
Vector grad_weighted(const ModelContext& ctx, const Vector& w, const ForwardCache& fc,
                     const std::vector<std::pair<int, double>>& rows, const std::vector<int>& labels);

Vector grad_sample(const ModelContext& ctx, const Vector& w, int i, int label);

/// Central differences (f(w + s e_j) - f(w - s e_j)) / (2 s) for every j.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& w, double step);

/// central_difference applied to w -> l(w; z_i).
Vector grad_fd_oracle(const ModelContext& ctx, const Vector& w, int i, int label, double step);

struct GradcheckOptions {
    int n = 12;
    int d = 4;
    int h = 3;
    int C = 2;
    double q = 2.0;
    std::uint64_t seed = 1;
    int instances = 10;
    double step = 1e-6;
    int layers = 2;
    /// Denominator floor of the componentwise relative error
    /// |a - f| / max(|a|, |f|, floor).
    double rel_floor = 1e-4;
    /// Preactivations closer than this to 0 are avoided by resampling w.
    double kink_margin = 1e-4;
};

struct GradcheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    int instances = 0;
    int resamples = 0;
};

/// Default tolerance: 1e-5, loosened to 1e-3 for q < 1.5.
double gradcheck_tolerance(double q);

/// Compares grad_sample with grad_fd_oracle on `instances` random (w, i)
/// pairs for a seeded SBM graph with C balanced blocks and Gaussian features.
/// For q < 1.5, weights are resampled until every preactivation is at least
/// kink_margin away from 0.
GradcheckResult gradcheck(Arch arch, const GradcheckOptions& opt);

/// Writes raw little-endian float64 values to `path` and the layout to
/// `path + ".json"`.
void save_params(const std::string& path, const Vector& w, const Layout& layout);
Vector load_params(const std::string& path, const Layout& layout);

}  // namespace transgap
