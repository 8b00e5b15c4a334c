#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"
#include "vlcuav/config.hpp"
#include "vlcuav/harness.hpp"

using namespace vlcuav;
using namespace vlcuav::harness;

namespace {

// Small enough to train in well under a second.
ExperimentConfig fast_config() {
    ExperimentConfig c;
    c.predictor.grid_side = 8;
    c.synth.side = 8;
    c.predictor.feature_maps = {2};
    c.predictor.hidden = 4;
    c.predictor.seq_len = 2;
    c.predictor.epochs = 5;
    c.predictor.learn_rate = 0.5;
    c.train_chunks = 2;
    c.chunk_frames = 6;
    c.eval_stride = 3;
    c.users = 4;
    c.replicates = 2;
    c.options.starts = 2;
    return c;
}

std::string csv_of(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    write_csv(rows, out);
    return out.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vlcuav_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("config: every key round trips through dump and parse") {
    auto c = fast_config();
    c.id = "round trip";
    c.params.b_bar = 0.9;
    c.variants = {"proposed", "center"};
    std::ostringstream first;
    config::dump(c, first);
    std::istringstream in(first.str());
    const auto back = config::parse(in);
    std::ostringstream second;
    config::dump(back, second);
    CHECK(first.str() == second.str());
    for (const auto& k : config::keys()) CHECK(config::value_of(back, k.key) == config::value_of(c, k.key));
}

TEST_CASE("config: keys are unique and include the channel and optimizer names") {
    std::set<std::string> seen;
    for (const auto& k : config::keys()) {
        CHECK(seen.insert(k.key).second);
        CHECK(!k.help.empty());
    }
    for (const char* k : {"gamma", "delta", "epsilon", "eta_r", "phi_half", "psi_c", "rho", "xi", "n_e", "n_w", "H",
                          "d_min", "lambda_0", "L", "S", "K", "S_m", "D_h", "D_q", "N", "alpha", "e", "T", "U", "D"})
        CHECK(seen.count(k) == 1);
}

TEST_CASE("config: parsing") {
    std::istringstream in("# comment\n\nU = 7\nH=30   # trailing\nK = 2, 3\nL = 2\nvariants = proposed center\n");
    const auto c = config::parse(in);
    CHECK(c.users == 7);
    CHECK(c.params.altitude == 30);
    CHECK(c.predictor.feature_maps == std::vector<int>{2, 3});
    CHECK(c.predictor.layers == 2);
    CHECK(c.variants == std::vector<std::string>{"proposed", "center"});

    ExperimentConfig d;
    config::apply(d, "lambda_0", "16");
    CHECK(d.predictor.grid_side == 16);
    CHECK(d.synth.side == 16);
    config::apply(d, "b_bar", "auto");
    CHECK(!d.params.b_bar);
    config::apply(d, "b_bar", "0.5");
    CHECK(*d.params.b_bar == 0.5);
}

TEST_CASE("config: errors") {
    ExperimentConfig c;
    CHECK_THROWS_AS(config::apply(c, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(config::apply(c, "U", "seven"), ConfigError);
    CHECK_THROWS_AS(config::apply(c, "U", "7.5"), ConfigError);
    CHECK_THROWS_AS(config::apply(c, "synth_axis_drift", "maybe"), ConfigError);
    std::istringstream in("U = 3\nbogus = 1\n");
    try {
        config::parse(in);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::istringstream no_eq("U 3\n");
    CHECK_THROWS_AS(config::parse(no_eq), ConfigError);
    CHECK_THROWS_AS(config::load("/nonexistent/vlcuav.conf"), DataError);
}

TEST_CASE("experiment validation") {
    auto c = fast_config();
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.variants.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.variants = {"proposed", "bogus"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.declared_features = c.predictor.feature_count() + 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.declared_features = c.predictor.feature_count();
    CHECK_NOTHROW(bad.validate());
    bad = c;
    bad.synth.side = 10;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.chunk_frames = bad.predictor.seq_len;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.grid_file = "/nonexistent/grid.illumgrid";
    CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("history continues one scene across calls") {
    const auto c = fast_config();
    const auto whole = history(c, 0, 10);
    const auto part = history(c, 6, 3);
    for (int f = 0; f < 3; ++f) CHECK((part.frames[f].values - whole.frames[f + 6].values).cwiseAbs().maxCoeff() < 1e-12);
    const auto train = training_set(c);
    REQUIRE(train.size() == 2);
    CHECK(train[1].length() == 6);
    CHECK((train[1].frames[0].values - whole.frames[6].values).cwiseAbs().maxCoeff() < 1e-12);
    const auto held = heldout_window(c, 1);
    CHECK(held.length() == 3);
    const auto later = history(c, 12 + 3, 1);
    CHECK((held.frames[0].values - later.frames[0].values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("user draws") {
    const auto c = fast_config();
    const auto a = draw_users(c, 0);
    const auto b = draw_users(c, 0);
    const auto d = draw_users(c, 1);
    REQUIRE(a.size() == 4);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(a[j].pos == b[j].pos);
        CHECK(a[j].rate == b[j].rate);
        CHECK(a[j].pos.x() >= 0.0);
        CHECK(a[j].pos.x() <= c.area);
        CHECK(a[j].rate >= c.rate_min);
        CHECK(a[j].rate <= c.rate_max);
    }
    CHECK(a[0].pos != d[0].pos);
    CHECK(replicate_seed(c, 0) != replicate_seed(c, 1));
}

TEST_CASE("scenario scales and stretches the raw grid") {
    const auto c = fast_config();
    const auto raw = history(c, 0, 1).frames[0];
    const auto s = make_scenario(c, draw_users(c, 0), raw);
    CHECK(s.grid.cell_size == doctest::Approx(c.area / 8));
    CHECK(s.grid.values.isApprox(raw.values * c.illum_scale));
    CHECK(s.fleet_size == c.fleet);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("pipeline emits one scored row per variant") {
    auto c = fast_config();
    c.variants = all_variants();
    PredictorCache cache;
    const auto rows = run_pipeline(c, 0, cache);
    REQUIRE(rows.size() == all_variants().size());
    std::map<std::string, MetricsRow> by;
    for (const auto& r : rows) by[r.variant] = r;
    for (const auto& r : rows) {
        CHECK(r.status == "ok");
        CHECK(r.feasible);
        CHECK(r.total_power > 0.0);
        CHECK(r.total_power >= r.raw_power * (1 - 1e-12) - 0.0);
    }
    CHECK(by["actual-illum"].mse == 0.0);
    CHECK(by["exhaustive"].mse == 0.0);
    CHECK(by["proposed"].mse > 0.0);
    CHECK(by["actual-illum"].total_power == doctest::Approx(by["actual-illum"].raw_power));
    CHECK(cache.contains(2));
}

TEST_CASE("sweep flags failed runs instead of aborting") {
    auto c = fast_config();
    c.variants = {"proposed", "center"};
    PredictorCache cache;
    // seq_len above every chunk length fails validation inside the run
    const auto rows = sweep(c, SweepVar::SeqLen, {2, 9}, cache);
    int failed = 0;
    for (const auto& r : rows) {
        if (r.sweep_value == 9) {
            CHECK(r.status.rfind("failed", 0) == 0);
            CHECK(!r.feasible);
            ++failed;
        } else {
            CHECK(r.status == "ok");
        }
    }
    CHECK(failed == 2 * c.replicates);
    CHECK_THROWS_AS(sweep(c, SweepVar::Users, {}, cache), ConfigError);
    CHECK_THROWS_AS(sweep(c, SweepVar::Users, {2.5}, cache), ConfigError);
    CHECK(parse_sweep_var("height") == SweepVar::Height);
    CHECK(parse_sweep_var("U") == SweepVar::Users);
    CHECK_THROWS_AS(parse_sweep_var("colour"), ConfigError);
}

TEST_CASE("CSV round trip") {
    MetricsRow a;
    a.id = "exp, \"quoted\"";
    a.variant = "proposed";
    a.sweep_var = "H";
    a.sweep_value = 20;
    a.replicate = 3;
    a.seed = 18446744073709551615ull;
    a.total_power = 0.1 + 0.2;
    a.raw_power = 1e-300;
    a.mse = 2.5e-3;
    a.iterations = 7;
    a.feasible = true;
    a.status = "failed: plan: x, y";
    MetricsRow b = a;
    b.variant = "center";
    b.feasible = false;
    b.status = "ok";
    const std::string text = csv_of({a, b});
    CHECK(text.rfind(csv_header() + "\n", 0) == 0);
    std::istringstream in(text);
    const auto back = read_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == a.id);
    CHECK(back[0].status == a.status);
    CHECK(back[0].seed == a.seed);
    CHECK(back[0].total_power == a.total_power);
    CHECK(back[0].raw_power == a.raw_power);
    CHECK(back[1].feasible == false);
    CHECK(csv_of(back) == text);
    std::istringstream bad("not,a,header\n");
    CHECK_THROWS_AS(read_csv(bad), DataError);
}

TEST_CASE("reduction percent and summary") {
    CHECK(reduction_percent(10.0, 6.0) == doctest::Approx(40.0));
    CHECK(reduction_percent(10.0, 12.0) == doctest::Approx(-20.0));
    CHECK_THROWS_AS(reduction_percent(0.0, 1.0), NumericalError);
    std::vector<MetricsRow> rows;
    for (int r = 0; r < 2; ++r)
        for (const char* v : {"proposed", "center"}) {
            MetricsRow row;
            row.id = "s";
            row.variant = v;
            row.sweep_var = "U";
            row.sweep_value = 10;
            row.replicate = r;
            row.total_power = std::string(v) == "proposed" ? 6.0 : 10.0;
            row.feasible = true;
            rows.push_back(row);
        }
    std::ostringstream out;
    write_summary(rows, out);
    CHECK(out.str().find("reduction vs center: 40.0%") != std::string::npos);
}

TEST_CASE("report writes the CSV, summary and timing files") {
    const auto dir = scratch_dir("report");
    MetricsRow row;
    row.id = "r";
    row.variant = "proposed";
    row.sweep_var = "H";
    row.sweep_value = 20;
    row.total_power = 1.0;
    report({row}, dir);
    CHECK(std::filesystem::exists(dir / "sweep_H.csv"));
    CHECK(std::filesystem::exists(dir / "summary.txt"));
    CHECK(std::filesystem::exists(dir / "timing.csv"));
    CHECK_THROWS_AS(report({}, dir), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("repeated sweeps give byte-identical CSV") {
    auto c = fast_config();
    c.variants = {"proposed", "persistence", "center"};
    PredictorCache first;
    PredictorCache second;
    const auto a = csv_of(sweep(c, SweepVar::Users, {3, 5}, first));
    const auto b = csv_of(sweep(c, SweepVar::Users, {3, 5}, second));
    CHECK(a == b);
}
