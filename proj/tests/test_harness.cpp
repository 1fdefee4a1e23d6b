#include "transgap/cli.hpp"
#include "transgap/harness.hpp"

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

using namespace transgap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("transgap_test_harness_" + name);
    fs::remove_all(p);
    return p;
}

DatasetBundle triangle() {
    DatasetBundle b;
    b.name = "triangle";
    b.graph = build_graph({{0, 1}, {0, 2}, {1, 2}}, 3);
    b.X.resize(3, 2);
    b.X << 0.1, -2.5, 1.0 / 3.0, 7.0, 1e-17, 0.0;
    b.labels = {0, 1, 1};
    b.num_classes = 2;
    return b;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.models = {"gcn"};
    c.seeds = {0};
    c.T = 1;
    c.hidden = 4;
    c.batch_size = 4;
    c.eval_every = 1;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_CASE("bundle round trip is exact and byte stable") {
    const fs::path a = scratch("rt_a"), b = scratch("rt_b");
    const DatasetBundle t = triangle();
    save_bundle(t, a.string());
    const DatasetBundle l = load_bundle(a.string());
    CHECK(l.n() == 3);
    CHECK(l.d() == 2);
    CHECK(l.num_classes == 2);
    CHECK(l.name == "triangle");
    CHECK(l.labels == t.labels);
    CHECK(l.X == t.X);
    CHECK(l.graph.edges() == t.graph.edges());
    save_bundle(l, b.string());
    for (const char* f : {"meta.json", "edges.tsv", "features.csv", "labels.csv"})
        CHECK(read_file((a / f).string()) == read_file((b / f).string()));

    const DatasetBundle rn = load_bundle(a.string(), true);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(rn.X.row(i).norm() - 1.0) < 1e-15);
}

TEST_CASE("bundle validation errors") {
    const fs::path a = scratch("bad");
    save_bundle(triangle(), a.string());
    write_file((a / "labels.csv").string(), "0\n2\n1\n");
    try {
        load_bundle(a.string());
        FAIL("expected a data error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
        CHECK(std::string(e.what()).find("labels.csv:2") != std::string::npos);
    }
    write_file((a / "labels.csv").string(), "0\n1\n1\n");
    write_file((a / "edges.tsv").string(), "0\t5\n");
    CHECK_THROWS_AS(load_bundle(a.string()), Error);
    write_file((a / "edges.tsv").string(), "0\t1\n");
    write_file((a / "features.csv").string(), "1,2\n3\n4,5\n");
    CHECK_THROWS_AS(load_bundle(a.string()), Error);
    fs::remove(a / "meta.json");
    try {
        load_bundle(a.string());
        FAIL("expected a data error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
        CHECK(std::string(e.what()).find("meta.json") != std::string::npos);
    }
    CHECK_THROWS_AS(read_file((a / "nope.txt").string()), Error);
}

TEST_CASE("make_split sizes, disjointness and determinism") {
    const Split s = make_split(10, 0.3, 4);
    CHECK(s.m() == 3);
    CHECK(s.u() == 7);
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 10);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 9);
    const Split s2 = make_split(10, 0.3, 4);
    CHECK(s.train == s2.train);
    CHECK(s.test == s2.test);
    int differing = 0;
    for (std::uint64_t k = 0; k < 20; ++k) differing += make_split(100, 0.3, k).train != make_split(100, 0.3, k + 20).train;
    CHECK(differing == 20);
    CHECK_THROWS_AS(make_split(10, 0.0, 1), Error);
    CHECK_THROWS_AS(make_split(10, 1.0, 1), Error);
}

TEST_CASE("mean_std uses the population convention") {
    const Stat s = mean_std({1.0, 3.0});
    CHECK(s.mean == 2.0);
    CHECK(s.std == 1.0);
    CHECK(mean_std({5.0}).std == 0.0);
}

TEST_CASE("make_sbm_bundle is deterministic and valid") {
    SbmFeatures f;
    f.d = 6;
    const DatasetBundle a = make_sbm_bundle({10, 12}, 0.3, 0.05, 9, f);
    const DatasetBundle b = make_sbm_bundle({10, 12}, 0.3, 0.05, 9, f);
    CHECK(a.X == b.X);
    CHECK(a.labels == b.labels);
    CHECK(a.graph.edges() == b.graph.edges());
    CHECK(a.n() == 22);
    CHECK(a.d() == 6);
    CHECK(a.num_classes == 2);
    CHECK(std::count(a.labels.begin(), a.labels.end(), 1) == 12);
}

TEST_CASE("run_experiment: single run has zero spread and duplicate seeds agree") {
    const DatasetBundle data = make_sbm_bundle({12, 12}, 0.3, 0.05, 1, SbmFeatures{8, 2.0, 1.0});
    ExperimentConfig c = small_config();
    const GapReport r = run_experiment(c, data);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].loss_gap.std == 0.0);
    CHECK(r.rows[0].runs.size() == 1);

    c.seeds = {3, 3};
    c.T = 5;
    const GapReport d = run_experiment(c, data);
    const auto& runs = d.row("gcn").runs;
    CHECK(runs[0].loss_gap == runs[1].loss_gap);
    CHECK(runs[0].grad_gap == runs[1].grad_gap);
    CHECK(d.row("gcn").loss_gap.std == 0.0);
    CHECK_THROWS_AS(d.row("sgc"), Error);

    c.models = {"gcn", "bogus"};
    CHECK_THROWS_AS(run_experiment(c, data), Error);
}

TEST_CASE("run_experiment is independent of the thread count") {
    const DatasetBundle data = make_sbm_bundle({12, 12}, 0.3, 0.05, 2, SbmFeatures{8, 2.0, 1.0});
    ExperimentConfig c = small_config();
    c.models = {"gcn", "sgc", "gpr"};
    c.seeds = {0, 1, 2};
    c.T = 8;
    c.eval_every = 4;
    const std::string one = run_experiment(c, data).to_json(c, data).dump();
    c.threads = 3;
    const nlohmann::ordered_json three = run_experiment(c, data).to_json(c, data);
    CHECK(one == three.dump());
}

TEST_CASE("curve_report: single trace and flat curve") {
    TrainTrace t;
    t.rows = {{0, 1.0, 1.5, 0, 0, 0, 0, 0}, {5, 0.5, 0.25, 0, 0, 0, 0, 0}};
    const auto c = curve_report({t});
    REQUIRE(c.size() == 2);
    CHECK(c[0].t == 0);
    CHECK(c[0].mean == 0.5);
    CHECK(c[1].mean == 0.25);
    CHECK(c[1].std == 0.0);

    const DatasetBundle data = make_sbm_bundle({10, 10}, 0.3, 0.05, 3, SbmFeatures{4, 1.0, 1.0});
    ExperimentConfig cfg = small_config();
    cfg.T = 6;
    cfg.eval_every = 2;
    cfg.seeds = {0, 1};
    cfg.optimizer = Optimizer::Sgd;
    cfg.schedule = LrSchedule{LrSchedule::Kind::Constant, 0.0, 0.0};
    const GapReport rep = run_experiment(cfg, data);
    const auto& curve = rep.row("gcn").curve;
    REQUIRE(curve.size() == 4);
    for (const auto& p : curve) {
        CHECK(p.mean == curve[0].mean);
        CHECK(p.std == curve[0].std);
    }
}

TEST_CASE("report is consistent with the per-run curve files") {
    const fs::path dir = scratch("report");
    const DatasetBundle data = make_sbm_bundle({15, 15}, 0.3, 0.05, 4, SbmFeatures{6, 2.0, 1.0});
    ExperimentConfig c = small_config();
    c.models = {"gcn", "appnp"};
    c.seeds = {0, 1, 2};
    c.T = 12;
    c.eval_every = 5;
    c.output_dir = dir.string();
    run_experiment(c, data);
    const auto rep = nlohmann::json::parse(read_file((dir / "report.json").string()));
    CHECK(rep["schema"] == "transgap/1");
    CHECK(rep["std_kind"] == "population");
    for (const auto& m : rep["models"]) {
        std::vector<double> gaps;
        for (const auto& run : m["runs"]) {
            const TrainTrace tr = TrainTrace::from_csv(read_file((dir / run["curve_file"].get<std::string>()).string()));
            CHECK(tr.rows.back().t == 12);
            const double g = std::abs(tr.rows.back().R_m - tr.rows.back().R_u);
            CHECK(std::abs(g - run["loss_gap"].get<double>()) <= 1e-12);
            gaps.push_back(g);
        }
        const Stat s = mean_std(gaps);
        CHECK(std::abs(s.mean - m["loss_gap"]["mean"].get<double>()) <= 1e-12);
        CHECK(std::abs(s.std - m["loss_gap"]["std"].get<double>()) <= 1e-12);
        CHECK(fs::exists(dir / ("gapcurve_" + m["model"].get<std::string>() + ".csv")));
    }
}

TEST_CASE("parallel_for runs every index and rethrows the lowest failure") {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    try {
        parallel_for(20, 3, [](int i) {
            if (i == 7 || i == 13) throw std::runtime_error("fail " + std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "fail 7");
    }
    parallel_for(0, 2, [](int) { throw std::runtime_error("never"); });
}

TEST_CASE("merge_config fills only absent flags") {
    const std::string cfg = R"({"seed": 5, "row-normalize": true, "drop-edge": false,
                                "train": {"T": 40, "lr": 0.5}, "analyze": {"delta": 0.1},
                                "models": ["gcn", "sgc"]})";
    const auto m = merge_config({"train", "--data", "d", "--T", "7"}, cfg);
    auto value_of = [&](const std::string& flag) -> std::string {
        const auto it = std::find(m.begin(), m.end(), flag);
        if (it == m.end() || it + 1 == m.end()) return "<absent>";
        return *(it + 1);
    };
    CHECK(std::count(m.begin(), m.end(), "--T") == 1);
    CHECK(value_of("--T") == "7");
    CHECK(value_of("--lr") == "0.5");
    CHECK(value_of("--seed") == "5");
    CHECK(value_of("--models") == "gcn,sgc");
    CHECK(std::count(m.begin(), m.end(), "--row-normalize") == 1);
    CHECK(std::count(m.begin(), m.end(), "--drop-edge") == 0);
    CHECK(std::count(m.begin(), m.end(), "--delta") == 0);
    CHECK_THROWS_AS(merge_config({"train"}, "[1,2]"), Error);
    CHECK_THROWS_AS(merge_config({"train"}, "{not json"), Error);
}
