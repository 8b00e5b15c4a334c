// vlcuav: command-line front end for the illumination-aware UAV deployment pipeline.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vlcuav/config.hpp"
#include "vlcuav/harness.hpp"

using namespace vlcuav;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value

    harness::ExperimentConfig load() const {
        harness::ExperimentConfig c = config_path.empty() ? harness::ExperimentConfig{} : config::load(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            config::apply(c, kv.substr(0, eq), kv.substr(eq + 1));
        }
        return c;
    }
};

void add_common(CLI::App* app, Common& common) {
    app->add_option("-c,--config", common.config_path, "experiment configuration file");
    app->add_option("-s,--set", common.overrides, "override one setting (key=value), repeatable");
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::string s = text;
    for (auto& ch : s)
        if (ch == ',') ch = ' ';
    std::istringstream in(s);
    for (std::string tok; in >> tok;) {
        double v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw ConfigError("--values: '" + tok + "' is not a number");
        out.push_back(v);
    }
    return out;
}

void write_solution(const opt::DeploymentSolution& s, std::ostream& out) {
    out << "total_power " << s.total_power << '\n';
    for (std::size_t i = 0; i < s.poses.size(); ++i)
        out << "uav " << i << ' ' << s.poses[i].pos.x() << ' ' << s.poses[i].pos.y() << ' ' << s.poses[i].power << '\n';
    out << "association";
    for (int a : s.association.assign) out << ' ' << a;
    out << '\n';
}

int fail(const std::string& stage, const std::string& what, int code) {
    // library messages often already name the stage
    const std::string prefix = stage + ": ";
    std::cerr << "vlcuav: " << (what.rfind(prefix, 0) == 0 ? "" : prefix) << what << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Illumination-aware VLC UAV deployment: synthesis, forecasting, planning and sweeps"};
    app.require_subcommand(1);
    Common common;
    std::string stage = "setup";

    auto* defaults = app.add_subcommand("defaults", "print every configuration key with its current value");
    add_common(defaults, common);

    auto* synth = app.add_subcommand("synth", "write a synthetic illumination history");
    add_common(synth, common);
    std::string synth_out;
    int synth_start = 0;
    int synth_frames = 0;
    synth->add_option("-o,--out", synth_out, "output ILLUMGRID file")->required();
    synth->add_option("--start", synth_start, "first frame index");
    synth->add_option("--frames", synth_frames, "frame count (default: training span plus held-out windows)");

    auto* train = app.add_subcommand("train", "fit the predictor on the training history and write a checkpoint");
    add_common(train, common);
    std::string train_out;
    train->add_option("-o,--out", train_out, "checkpoint path")->required();

    auto* predict = app.add_subcommand("predict", "forecast the frame after the last T frames of a sequence");
    add_common(predict, common);
    std::string predict_in;
    std::string predict_out;
    predict->add_option("-i,--input", predict_in, "ILLUMGRID sequence")->required();
    predict->add_option("-o,--out", predict_out, "output ILLUMGRID file (one frame)")->required();

    auto* plan = app.add_subcommand("plan", "plan a deployment on the last frame of a grid file");
    add_common(plan, common);
    std::string plan_grid;
    std::string plan_variant = "proposed";
    int plan_replicate = 0;
    plan->add_option("-g,--grid", plan_grid, "ILLUMGRID file; its last frame is planned on")->required();
    plan->add_option("--variant", plan_variant, "proposed, center, assoc-only, placement-only or exhaustive");
    plan->add_option("--replicate", plan_replicate, "user draw index");

    auto* sweep = app.add_subcommand("sweep", "run every variant over a swept variable and write the report");
    add_common(sweep, common);
    std::string sweep_var;
    std::string sweep_values;
    sweep->add_option("--var", sweep_var, "users, height or seq_len")->required();
    sweep->add_option("--values", sweep_values, "comma separated values")->required();

    auto* rep = app.add_subcommand("report", "rebuild the summary from a metrics CSV");
    std::string report_in;
    std::string report_out;
    rep->add_option("-i,--input", report_in, "metrics CSV")->required();
    rep->add_option("-o,--out", report_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code(ErrorCategory::Usage);
    }

    try {
        if (*defaults) {
            stage = "config";
            config::dump(common.load(), std::cout);
        } else if (*synth) {
            stage = "config";
            auto c = common.load();
            c.validate();
            stage = "synth";
            const int frames = synth_frames > 0 ? synth_frames
                                                : c.train_chunks * c.chunk_frames + c.replicates * c.eval_stride +
                                                      c.predictor.seq_len + 1;
            auto seq = harness::history(c, synth_start, frames);
            for (auto& f : seq.frames) f.cell_size = c.area / f.side();
            illum::save_grid_sequence(seq, synth_out);
        } else if (*train) {
            stage = "config";
            auto c = common.load();
            c.checkpoint.clear();
            c.validate();
            stage = "train";
            predictor::PredictorConfig pc = c.predictor;
            pc.seed = c.seed;
            const auto result = predictor::train(harness::training_set(c), pc);
            std::cout << "epochs " << pc.epochs << " initial loss "
                      << (result.loss_trace.empty() ? 0.0 : result.loss_trace.front()) << " final loss "
                      << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << '\n';
            stage = "checkpoint";
            predictor::save_checkpoint(pc, result.weights, train_out);
        } else if (*predict) {
            stage = "config";
            auto c = common.load();
            c.validate();
            stage = "data";
            const auto seq = illum::load_grid_sequence(predict_in);
            const int T = c.predictor.seq_len;
            if (seq.length() < T) throw DataError("sequence has fewer than T = " + std::to_string(T) + " frames");
            stage = "train";
            harness::PredictorCache cache;
            const auto& w = cache.get(c);
            stage = "predict";
            const std::span<const illum::IlluminationGrid> last(seq.frames.data() + (seq.length() - T),
                                                               static_cast<std::size_t>(T));
            illum::GridSequence out;
            out.dt = seq.dt;
            out.frames.push_back(predictor::predict_next(last, w, c.predictor));
            out.frames.back().cell_size = seq.frames.back().cell_size;
            out.frames.back().origin = seq.frames.back().origin;
            illum::save_grid_sequence(out, predict_out);
        } else if (*plan) {
            stage = "config";
            auto c = common.load();
            c.validate();
            stage = "data";
            const auto seq = illum::load_grid_sequence(plan_grid);
            stage = "scenario";
            const auto scenario = harness::make_scenario(c, harness::draw_users(c, plan_replicate), seq.frames.back());
            scenario.validate();
            stage = "plan";
            opt::DeploymentSolution s;
            if (plan_variant == "proposed") s = opt::optimize(scenario, c.options);
            else if (plan_variant == "center") s = opt::baseline_center(scenario);
            else if (plan_variant == "assoc-only") s = opt::baseline_assoc_only(scenario, c.options);
            else if (plan_variant == "placement-only") s = opt::baseline_fixed_association(scenario, c.options);
            else if (plan_variant == "exhaustive") s = opt::exhaustive_oracle(scenario);
            else throw ConfigError("unknown plan variant '" + plan_variant + "'");
            write_solution(s, std::cout);
            const auto check = opt::check_feasibility(scenario, s);
            std::cout << "feasible " << (check.feasible ? 1 : 0) << " iterations " << s.iterations << '\n';
        } else if (*sweep) {
            stage = "config";
            auto c = common.load();
            const auto var = harness::parse_sweep_var(sweep_var);
            const auto values = parse_values(sweep_values);
            c.validate();
            stage = "sweep";
            harness::PredictorCache cache;
            const auto rows = harness::sweep(c, var, values, cache);
            stage = "report";
            harness::report(rows, c.out_dir);
            int failed = 0;
            for (const auto& r : rows) failed += r.status.rfind("failed", 0) == 0;
            std::cout << rows.size() << " rows written to " << c.out_dir.string();
            if (failed) std::cout << " (" << failed << " failed)";
            std::cout << '\n';
        } else if (*rep) {
            stage = "report";
            std::ifstream in(report_in);
            if (!in) throw DataError("cannot open " + report_in);
            harness::report(harness::read_csv(in), report_out);
        }
    } catch (const Error& e) {
        return fail(stage, e.what(), exit_code(e.category()));
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(stage, e.what(), exit_code(ErrorCategory::Data));
    } catch (const std::exception& e) {
        return fail(stage, e.what(), exit_code(ErrorCategory::Numerical));
    }
    return 0;
}
