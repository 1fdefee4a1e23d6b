#pragma once

#include "transgap/common.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace transgap {

/// Immutable undirected, unweighted graph in compressed-sparse-row form.
/// Rows are sorted ascending, symmetric, with no self-loops or duplicates.
struct SparseGraph {
    int n = 0;
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> col_idx;

    int degree(int i) const { return static_cast<int>(row_ptr[i + 1] - row_ptr[i]); }
    /// Number of undirected edges (half the stored directed entries).
    std::int64_t edge_count() const { return static_cast<std::int64_t>(col_idx.size()) / 2; }
    /// Undirected edges as (u, v) pairs with u < v, in row order.
    std::vector<std::pair<int, int>> edges() const;
    /// Throws Data error if any structural invariant is broken.
    void validate() const;
};

struct DegreeStats {
    int deg_min = 0;
    int deg_max = 0;
    int n = 0;
    std::int64_t edge_count = 0;
};

/// Sparse operator in CSR form with 64-bit values and a cached infinity norm
/// (maximum absolute row sum, accumulated left to right).
struct PropagationMatrix {
    int n = 0;
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> col_idx;
    std::vector<double> values;
    double inf_norm = 0.0;

    /// Y = P * X for a dense n x d matrix.
    Matrix apply(const Matrix& X) const;
    Vector apply(const Vector& x) const;
    Matrix to_dense() const;
    std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }
    /// Recomputes inf_norm from the stored values.
    void refresh_norm();
};

enum class SelfLoopPolicy { Reject, Ignore };

SparseGraph build_graph(const std::vector<std::pair<int, int>>& edges, int n,
                        SelfLoopPolicy policy = SelfLoopPolicy::Reject);

DegreeStats degree_stats(const SparseGraph& g);

/// (D+I)^{-1/2} (A+I) (D+I)^{-1/2}.
PropagationMatrix normalized_adjacency(const SparseGraph& g);

/// ||P^k||_inf as the largest entry of P^k 1, via k sparse mat-vecs.
/// Exact for nonnegative P.
double inf_norm_power(const PropagationMatrix& P, int k);

/// sqrt((deg_max + 1) / (deg_min + 1)).
double degree_bound(const DegreeStats& s);

/// Coefficients c_k, k = 0..K, of the personalized PageRank filter:
/// c_k = gamma (1-gamma)^k for k < K and c_K = (1-gamma)^K.
std::vector<double> appnp_coefficients(double gamma, int K);

/// Graphs at or below this size get the APPNP filter materialized.
inline constexpr int kMaterializeLimit = 5000;

/// Materialized APPNP filter sum_k c_k P^k.
PropagationMatrix appnp_filter(const PropagationMatrix& P, double gamma, int K);

/// Materializes sum_k coeffs[k] P^k row by row (values may be signed;
/// zero entries are dropped).
PropagationMatrix materialize_polynomial(const PropagationMatrix& P, const std::vector<double>& coeffs);

/// sum_k coeffs[k] P^k X by Horner's rule, without forming any power.
Matrix apply_polynomial(const PropagationMatrix& P, const std::vector<double>& coeffs, const Matrix& X);

/// ||sum_k coeffs[k] P^k||_inf for nonnegative P. Exact via mat-vecs when all
/// coefficients are nonnegative; exact by materialization for signed
/// coefficients when n <= kMaterializeLimit; otherwise the triangle-inequality
/// bound sum_k |coeffs[k]| ||P^k||_inf. `exact` reports which case applied.
double polynomial_inf_norm(const PropagationMatrix& P, const std::vector<double>& coeffs, bool* exact = nullptr);

/// [X, PX, ..., P^K X].
std::vector<Matrix> gpr_powers(const PropagationMatrix& P, const Matrix& X, int K);

/// Removes each undirected edge independently with probability p.
SparseGraph drop_edge(const SparseGraph& g, double p, std::uint64_t seed);

struct SbmGraph {
    SparseGraph graph;
    std::vector<int> labels;
};

/// Planted-partition graph; node ids are assigned block by block.
SbmGraph sbm_generate(const std::vector<int>& sizes, double p_in, double p_out, std::uint64_t seed);

}  // namespace transgap
