#pragma once

#include "transgap/common.hpp"
#include "transgap/graph.hpp"
#include "transgap/nn.hpp"
#include "transgap/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace transgap {

struct DatasetBundle {
    std::string name;
    SparseGraph graph;
    Matrix X;
    std::vector<int> labels;
    int num_classes = 0;

    int n() const { return graph.n; }
    int d() const { return static_cast<int>(X.cols()); }
    void validate() const;
};

/// Reads edges.tsv, features.csv, labels.csv and meta.json from `dir`.
DatasetBundle load_bundle(const std::string& dir, bool row_normalize_features = false);
/// Writes the four bundle files; floats use 17 significant digits.
void save_bundle(const DatasetBundle& b, const std::string& dir);

/// Class-conditional Gaussian features on an SBM graph:
/// x_i = signal * mu_{y_i} + noise * eps_i with mu_c, eps_i ~ N(0, I_d / d).
struct SbmFeatures {
    int d = 128;
    double signal = 2.0;
    double noise = 10.0;
};

DatasetBundle make_sbm_bundle(const std::vector<int>& sizes, double p_in, double p_out, std::uint64_t seed,
                              const SbmFeatures& feat, const std::string& name = "sbm");

/// floor(frac * n) training nodes chosen by a seeded shuffle; the rest are test nodes.
Split make_split(int n, double train_frac, std::uint64_t seed);

struct ExperimentConfig {
    /// Model ids: gcn, sgc, gcnii, appnp, gpr, gcn_star, gcnii_star (the
    /// *_star ids are the deep stacks with `deep_layers` propagation layers).
    std::vector<std::string> models{"gcn", "sgc"};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double train_frac = 0.30;
    int T = 300;
    int hidden = 64;
    int batch_size = 512;
    Optimizer optimizer = Optimizer::Adam;
    LrSchedule schedule{LrSchedule::Kind::Constant, 0.01, 0.0};
    int eval_every = 10;
    double q = 2.0;
    int K = 10;
    double gamma = 0.1;
    double gcnii_alpha = 0.1;
    double gcnii_beta = 0.5;
    int deep_layers = 6;
    double l2 = 0.0;
    /// Worker threads; 0 means TRANSGAP_THREADS or the hardware concurrency.
    int threads = 0;
    /// When nonempty, report.json and per-run curve CSVs are written here.
    std::string output_dir;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

ModelSpec model_spec_for(const std::string& model_id, int d, int C, const ExperimentConfig& cfg);

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population standard deviation, summed in the given order.
Stat mean_std(const std::vector<double>& xs);

struct RunResult {
    std::string model;
    std::uint64_t seed = 0;
    double loss_gap = 0.0;
    double acc_gap = 0.0;
    double test_acc = 0.0;
    double grad_gap = 0.0;
    Checkpoint final;
    TrainTrace trace;
};

struct CurvePoint {
    int t = 0;
    double mean = 0.0;
    double std = 0.0;
};

struct ModelRow {
    std::string model;
    Stat loss_gap, acc_gap, test_acc, grad_gap;
    std::vector<RunResult> runs;
    std::vector<CurvePoint> curve;
};

struct GapReport {
    std::string dataset;
    std::vector<ModelRow> rows;

    const ModelRow& row(const std::string& model) const;
    nlohmann::ordered_json to_json(const ExperimentConfig& cfg, const DatasetBundle& data) const;
};

/// Per-checkpoint mean and population std of |R_m - R_u| across traces.
std::vector<CurvePoint> curve_report(const std::vector<TrainTrace>& traces);

/// Trains every (model, seed) pair on a fresh split and initialization and
/// aggregates the final gaps. Runs execute in a work pool; assembly order is
/// fixed, so results do not depend on scheduling.
GapReport run_experiment(const ExperimentConfig& cfg, const DatasetBundle& data);

/// TRANSGAP_THREADS if set and positive, otherwise the hardware concurrency.
int default_worker_count();

/// Runs task(i) for i in [0, count) on `threads` workers. The first failing
/// index (lowest i) is rethrown after all workers finish.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

/// Reads a whole file; Data error naming the file if it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace transgap
