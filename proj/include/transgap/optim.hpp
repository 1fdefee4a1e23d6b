#pragma once

#include "transgap/common.hpp"
#include "transgap/nn.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace transgap {

/// Disjoint train/test partition of the node set.
struct Split {
    std::vector<int> train;
    std::vector<int> test;
    int m() const { return static_cast<int>(train.size()); }
    int u() const { return static_cast<int>(test.size()); }
};

struct LrSchedule {
    enum class Kind { InverseTime, Constant };
    Kind kind = Kind::InverseTime;
    double c = 1.0;
    double t0 = 10.0;

    /// c / (t + t0) for inverse time, c for constant; t starts at 1.
    double eta(int t) const;
};

enum class Optimizer { Sgd, Adam };

struct SgdConfig {
    int T = 300;
    int batch_size = 1;
    std::uint64_t seed = 0;
    LrSchedule schedule;
    Optimizer optimizer = Optimizer::Sgd;
    int eval_every = 10;
    double l2 = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct Checkpoint {
    int t = 0;
    double R_m = 0.0;
    double R_u = 0.0;
    double acc_m = 0.0;
    double acc_u = 0.0;
    double grad_gap = 0.0;
    double dist = 0.0;
    /// Running maximum of sqrt(eta_t) ||grad l(w_t; z)||_2 up to this checkpoint.
    double g_emp = 0.0;
};

struct TrainTrace {
    std::vector<Checkpoint> rows;
    /// max over all iterates w(1..T+1) of ||w(t) - w(1)||_2.
    double max_dist = 0.0;

    static const char* csv_header() { return "t,R_m,R_u,acc_m,acc_u,grad_gap,dist,g_emp"; }
    std::string to_csv() const;
    static TrainTrace from_csv(const std::string& text);
};

struct EvalResult {
    double R_m = 0.0;
    double R_u = 0.0;
    double acc_m = 0.0;
    double acc_u = 0.0;
};

/// Index of the largest entry, lowest index on ties.
int argmax_row(const Matrix& M, Eigen::Index i);

EvalResult evaluate(const ModelContext& ctx, const std::vector<int>& labels, const Split& split, const Vector& w);
EvalResult evaluate_cache(const ForwardCache& fc, const std::vector<int>& labels, const Split& split);

/// || (1/m) sum_train grad l - (1/u) sum_test grad l ||_2.
double gradient_gap(const ModelContext& ctx, const std::vector<int>& labels, const Split& split, const Vector& w);
double gradient_gap_cache(const ModelContext& ctx, const ForwardCache& fc, const std::vector<int>& labels,
                          const Split& split, const Vector& w);

/// max((2 P_F)^(1/alpha), 1), or max((2/mu)(2 P_F)^(1/alpha), 1) when mu is given.
double t0_from_theory(double P_F, double alpha, std::optional<double> mu = std::nullopt);

struct TrainResult {
    Vector w;
    Vector w_init;
    TrainTrace trace;
};

/// Transductive SGD: T updates on batches drawn uniformly with replacement
/// from the training nodes. Only training labels are visible to the updates;
/// test labels are read solely for checkpoint evaluation.
TrainResult run_sgd(const ModelContext& ctx, const std::vector<int>& labels, const Split& split,
                    const SgdConfig& config, std::optional<Vector> w_init = std::nullopt);

/// Formats a double with 17 significant digits.
std::string fmt17(double x);

}  // namespace transgap
