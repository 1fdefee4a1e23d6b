#pragma once

#include "transgap/common.hpp"
#include "transgap/graph.hpp"
#include "transgap/nn.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace transgap {

/// Maximum row 2-norm of X.
double compute_cX(const Matrix& X);
/// Rescales every nonzero row of X to unit 2-norm.
Matrix row_normalize(const Matrix& X);

struct SpectralNorm {
    double value = 0.0;
    bool converged = true;
    int iterations = 0;
};

/// Largest singular value by power iteration on M^T M from a seeded start
/// vector; stops when the Rayleigh quotient changes by at most tol.
SpectralNorm spectral_norm(const Matrix& M, std::uint64_t seed = 0, double tol = 1e-10, int max_iter = 10000);

/// Maximum spectral norm over the weight matrices of w (GPR gamma excluded).
SpectralNorm compute_cW(const Vector& w, const Layout& layout, std::uint64_t seed = 0);

/// Operator norms the constants depend on.
struct GraphNorms {
    double a_inf = 0.0;      ///< ||A||_inf
    double a2_inf = 0.0;     ///< ||A^2||_inf
    double g_inf = 0.0;      ///< ||g(A)||_inf (APPNP) or ||g(A, gamma)||_inf (GPR)
    double power_sum = 0.0;  ///< sum_{k=0..K} ||A^k||_inf
    bool g_exact = true;
};

/// Norms for the given model. For GPR, gamma is read from w (or taken as the
/// APPNP coefficients with teleport 0.1 when w is empty).
GraphNorms compute_norms(const ModelSpec& spec, const PropagationMatrix& A, const Vector& w = Vector());

struct GcniiIntermediates {
    double B1 = 0.0, B2 = 0.0, C1 = 0.0, C2 = 0.0, L1 = 0.0, L2 = 0.0;
};

struct LipschitzResult {
    double L_F = 0.0;
    /// GPR: gamma-block and weight-block components; GCNII: L1 and L2 of the
    /// square-root formula.
    double L1 = 0.0;
    double L2 = 0.0;
    std::optional<GcniiIntermediates> gcnii;
};

/// Closed-form Lipschitz constant of w -> l(w; z) over the c_W ball.
/// Only the 2-layer models carry a formula; deeper stacks are rejected.
LipschitzResult lipschitz_constant(const ModelSpec& spec, double c_X, double c_W, const GraphNorms& norms);

/// Per-block coefficient tables and their aggregate.
struct HolderResult {
    /// linear[h][i], holder[h][i]: coefficient of the gradient block h with
    /// respect to parameter block i, in layout block order.
    std::vector<std::vector<double>> linear;
    std::vector<std::vector<double>> holder;
    std::vector<double> P_col;   ///< P_i = sum_h P_hi
    std::vector<double> Pt_col;  ///< P~_i = sum_h P~_hi
    double activation_P = 0.0;
    double alpha_tilde = 0.0;
    double P_F = 0.0;
    std::string aggregation = "column-sum aggregation";
};

/// P_F = (sum P_i^2)^(1/2) + (sum P~_i^(2/(2-a)))^(1-a/2) with a = alpha_tilde.
/// The activation constant q d^((2-q)/2) uses d = the widest layer passed
/// through sigma (h, or max(h, C) for APPNP/GPR).
HolderResult holder_constant(const ModelSpec& spec, double c_X, double c_W, const GraphNorms& norms, double alpha_tilde);

/// Aggregation step alone, exposed for testing.
double aggregate_holder(const std::vector<double>& P_col, const std::vector<double>& Pt_col, double alpha_tilde);

struct TransductiveTerms {
    double Q = 0.0;
    double S = 0.0;
    double c0 = 0.0;
};

/// Q = 1/m + 1/u, S = (m+u) / ((m+u-1/2)(1 - 1/(2 max(m,u)))), c0 = sqrt(32 ln(4e)/3).
TransductiveTerms transductive_terms(double m, double u);

/// sqrt(ln 3) + 1.5 sqrt(pi).
double dudley_constant();

struct RademacherParts {
    double trc = 0.0;
    double dudley = 0.0;
    double total() const { return trc + dudley; }
};

RademacherParts rademacher_parts(double m, double u, double dim, double L_F, double R, double b_ell);
/// b_ell (m+u)^{3/2}/(mu) + 12 (m+u)^{3/2}/(mu) sqrt(dim) (sqrt(ln 3) + 1.5 sqrt(pi)) L_F R.
double rademacher_upper(double m, double u, double dim, double L_F, double R, double b_ell);

struct BoundInputs {
    double m = 1.0;
    double u = 1.0;
    double dim = 1.0;
    double T = 1.0;
    double delta = 0.05;
    double alpha = 1.0;
    double L_F = 0.0;
    double R = 0.0;
    double b_ell = 0.0;
    double b_g = 0.0;
};

enum class RateClass { AlphaLtHalf, AlphaEqHalf, AlphaGtHalf };
std::string rate_class_name(RateClass c);

struct BoundReport {
    double trc_term = 0.0;
    double dudley_term = 0.0;
    double conc_term_1 = 0.0;
    double conc_term_2 = 0.0;
    double total = 0.0;
    RateClass rate_class = RateClass::AlphaGtHalf;
    double rate_value = 0.0;
};

RateClass rate_class_of(double alpha);
/// T^{(1-2a)/2} sqrt(ln T) (a < 1/2), ln T (a = 1/2), sqrt(ln T) (a > 1/2).
double rate_factor(double alpha, double T);

BoundReport theorem1_certificate(const BoundInputs& in);

/// Rate factor of the gradient-gap theorem (same classes as rate_factor).
double theorem2_rate(double alpha, double T);

struct CorollaryTerms {
    double generalization = 0.0;
    double optimization = 0.0;
    double total() const { return generalization + optimization; }
};

/// Optimization term T^{-a} (a < 1) or ln(T) ln^3(1/delta) / T (a = 1); the
/// generalization component is passed through.
CorollaryTerms corollary_excess(double alpha, double T, double delta, double rate_value);

/// Empirical diagnostics at a parameter vector over all labelled nodes.
struct InitialDiagnostics {
    double b_ell = 0.0;         ///< max_i l(w; z_i)
    double b_g = 0.0;           ///< max_i ||grad l(w; z_i)||
    double mean_grad_norm = 0.0;
    double mean_grad_norm_sq = 0.0;
};

InitialDiagnostics initial_diagnostics(const ModelContext& ctx, const Vector& w, const std::vector<int>& labels);

}  // namespace transgap
