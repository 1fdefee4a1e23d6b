#include "transgap/graph.hpp"

#include "transgap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace transgap {

std::vector<std::pair<int, int>> SparseGraph::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(edge_count()));
    for (int u = 0; u < n; ++u)
        for (auto e = row_ptr[u]; e < row_ptr[u + 1]; ++e)
            if (col_idx[e] > u) out.emplace_back(u, col_idx[e]);
    return out;
}

void SparseGraph::validate() const {
    if (n <= 0) data_error("graph must have at least one node");
    if (row_ptr.size() != static_cast<std::size_t>(n) + 1 || row_ptr[0] != 0)
        data_error("row_ptr has wrong length or nonzero start");
    if (row_ptr[n] != static_cast<std::int64_t>(col_idx.size())) data_error("row_ptr[n] != entry count");
    for (int u = 0; u < n; ++u) {
        if (row_ptr[u + 1] < row_ptr[u]) data_error("row_ptr decreasing at row " + std::to_string(u));
        for (auto e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
            const int v = col_idx[e];
            if (v < 0 || v >= n) data_error("column index out of range in row " + std::to_string(u));
            if (v == u) data_error("self-loop stored at node " + std::to_string(u));
            if (e > row_ptr[u] && col_idx[e - 1] >= v) data_error("row " + std::to_string(u) + " not strictly sorted");
            const auto b = col_idx.begin() + row_ptr[v];
            const auto en = col_idx.begin() + row_ptr[v + 1];
            if (!std::binary_search(b, en, u)) data_error("asymmetric entry (" + std::to_string(u) + "," + std::to_string(v) + ")");
        }
    }
}

void PropagationMatrix::refresh_norm() {
    inf_norm = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += std::abs(values[e]);
        inf_norm = std::max(inf_norm, s);
    }
}

Matrix PropagationMatrix::apply(const Matrix& X) const {
    if (X.rows() != n) usage_error("propagation: matrix has " + std::to_string(X.rows()) + " rows, expected " + std::to_string(n));
    Matrix Y(n, X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double* x = X.col(c).data();
        double* y = Y.col(c).data();
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += values[e] * x[col_idx[e]];
            y[i] = s;
        }
    }
    return Y;
}

Vector PropagationMatrix::apply(const Vector& x) const {
    if (x.size() != n) usage_error("propagation: vector length mismatch");
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += values[e] * x[col_idx[e]];
        y[i] = s;
    }
    return y;
}

Matrix PropagationMatrix::to_dense() const {
    Matrix M = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) M(i, col_idx[e]) = values[e];
    return M;
}

SparseGraph build_graph(const std::vector<std::pair<int, int>>& edges, int n, SelfLoopPolicy policy) {
    if (n <= 0) data_error("graph must have at least one node");
    std::vector<std::pair<int, int>> dir;
    dir.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n)
            data_error("edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range for n=" + std::to_string(n));
        if (u == v) {
            if (policy == SelfLoopPolicy::Reject) data_error("self-loop at node " + std::to_string(u));
            continue;
        }
        dir.emplace_back(u, v);
        dir.emplace_back(v, u);
    }
    std::sort(dir.begin(), dir.end());
    dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

    SparseGraph g;
    g.n = n;
    g.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    g.col_idx.reserve(dir.size());
    for (const auto& [u, v] : dir) {
        ++g.row_ptr[u + 1];
        g.col_idx.push_back(v);
    }
    for (int i = 0; i < n; ++i) g.row_ptr[i + 1] += g.row_ptr[i];
    return g;
}

DegreeStats degree_stats(const SparseGraph& g) {
    DegreeStats s;
    s.n = g.n;
    s.edge_count = g.edge_count();
    s.deg_min = g.n > 0 ? g.degree(0) : 0;
    s.deg_max = s.deg_min;
    for (int i = 1; i < g.n; ++i) {
        s.deg_min = std::min(s.deg_min, g.degree(i));
        s.deg_max = std::max(s.deg_max, g.degree(i));
    }
    return s;
}

PropagationMatrix normalized_adjacency(const SparseGraph& g) {
    PropagationMatrix P;
    P.n = g.n;
    P.row_ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
    P.col_idx.reserve(g.col_idx.size() + g.n);
    P.values.reserve(g.col_idx.size() + g.n);
    std::vector<double> inv_sqrt(g.n);
    for (int i = 0; i < g.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
    for (int i = 0; i < g.n; ++i) {
        bool diag_done = false;
        for (auto e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
            const int j = g.col_idx[e];
            if (!diag_done && j > i) {
                P.col_idx.push_back(i);
                P.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
                diag_done = true;
            }
            P.col_idx.push_back(j);
            P.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
        }
        if (!diag_done) {
            P.col_idx.push_back(i);
            P.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
        }
        P.row_ptr[i + 1] = static_cast<std::int64_t>(P.col_idx.size());
    }
    P.refresh_norm();
    return P;
}

double inf_norm_power(const PropagationMatrix& P, int k) {
    if (k < 0) usage_error("inf_norm_power: k must be nonnegative");
    if (k == 0) return 1.0;
    Vector v = Vector::Ones(P.n);
    for (int i = 0; i < k; ++i) v = P.apply(v);
    return v.maxCoeff();
}

double degree_bound(const DegreeStats& s) {
    return std::sqrt(static_cast<double>(s.deg_max + 1) / static_cast<double>(s.deg_min + 1));
}

std::vector<double> appnp_coefficients(double gamma, int K) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) usage_error("APPNP gamma must lie in [0,1]");
    if (K < 1) usage_error("APPNP K must be at least 1");
    std::vector<double> c(static_cast<std::size_t>(K) + 1);
    double r = 1.0;
    for (int k = 0; k < K; ++k) {
        c[k] = gamma * r;
        r *= 1.0 - gamma;
    }
    c[K] = r;
    return c;
}

PropagationMatrix materialize_polynomial(const PropagationMatrix& P, const std::vector<double>& coeffs) {
    const int n = P.n;
    PropagationMatrix G;
    G.n = n;
    G.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    Vector r(n), acc(n);
    for (int i = 0; i < n; ++i) {
        r.setZero();
        r[i] = 1.0;
        acc.setZero();
        acc[i] = coeffs.empty() ? 0.0 : coeffs[0];
        for (std::size_t k = 1; k < coeffs.size(); ++k) {
            r = P.apply(r);
            acc += coeffs[k] * r;
        }
        for (int j = 0; j < n; ++j) {
            if (acc[j] != 0.0) {
                G.col_idx.push_back(j);
                G.values.push_back(acc[j]);
            }
        }
        G.row_ptr[i + 1] = static_cast<std::int64_t>(G.col_idx.size());
    }
    G.refresh_norm();
    return G;
}

PropagationMatrix appnp_filter(const PropagationMatrix& P, double gamma, int K) {
    return materialize_polynomial(P, appnp_coefficients(gamma, K));
}

Matrix apply_polynomial(const PropagationMatrix& P, const std::vector<double>& coeffs, const Matrix& X) {
    if (coeffs.empty()) return Matrix::Zero(X.rows(), X.cols());
    Matrix r = coeffs.back() * X;
    for (std::size_t k = coeffs.size() - 1; k-- > 0;) r = P.apply(r) + coeffs[k] * X;
    return r;
}

double polynomial_inf_norm(const PropagationMatrix& P, const std::vector<double>& coeffs, bool* exact) {
    const bool nonneg = std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c >= 0.0; });
    if (nonneg) {
        if (exact) *exact = true;
        return apply_polynomial(P, coeffs, Matrix(Vector::Ones(P.n))).maxCoeff();
    }
    if (P.n <= kMaterializeLimit) {
        if (exact) *exact = true;
        return materialize_polynomial(P, coeffs).inf_norm;
    }
    if (exact) *exact = false;
    double s = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) s += std::abs(coeffs[k]) * inf_norm_power(P, static_cast<int>(k));
    return s;
}

std::vector<Matrix> gpr_powers(const PropagationMatrix& P, const Matrix& X, int K) {
    if (K < 0) usage_error("gpr_powers: K must be nonnegative");
    if (X.rows() != P.n) usage_error("gpr_powers: dimension mismatch");
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(K) + 1);
    out.push_back(X);
    for (int k = 1; k <= K; ++k) out.push_back(P.apply(out.back()));
    return out;
}

SparseGraph drop_edge(const SparseGraph& g, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) usage_error("drop_edge: p must lie in [0,1]");
    Rng rng(seed, "drop_edge");
    std::vector<std::pair<int, int>> kept;
    for (const auto& e : g.edges())
        if (!rng.bernoulli(p)) kept.push_back(e);
    return build_graph(kept, g.n);
}

SbmGraph sbm_generate(const std::vector<int>& sizes, double p_in, double p_out, std::uint64_t seed) {
    if (sizes.empty()) usage_error("sbm_generate: empty block list");
    if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0))
        usage_error("sbm_generate: probabilities must lie in [0,1]");
    SbmGraph out;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
        if (sizes[b] <= 0) usage_error("sbm_generate: block sizes must be positive");
        out.labels.insert(out.labels.end(), static_cast<std::size_t>(sizes[b]), static_cast<int>(b));
    }
    const int n = static_cast<int>(out.labels.size());
    Rng rng(seed, "sbm_edges");
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.bernoulli(out.labels[u] == out.labels[v] ? p_in : p_out)) edges.emplace_back(u, v);
    out.graph = build_graph(edges, n);
    return out;
}

}  // namespace transgap
