#include "vlcuav/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <tuple>

namespace vlcuav::harness {

namespace {

// Re-raise with the pipeline stage prepended, keeping the error category.
template <typename F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.category(), stage + ": " + e.what());
    }
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

bool known_variant(const std::string& name) {
    const auto& all = all_variants();
    return std::find(all.begin(), all.end(), name) != all.end();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

// ---- configuration -------------------------------------------------------

ExperimentConfig::ExperimentConfig() {
    // street-grid scene: one static source, one drifting source, three pulsing sources
    synth.side = predictor.grid_side;
    synth.static_blobs = 1;
    synth.drifting_blobs = 1;
    synth.pulsing_blobs = 3;
    synth.period_min = 2.5;
    synth.period_max = 4.0;
    synth.speed_min = 0.4;
    synth.speed_max = 0.6;
    synth.axis_drift = true;
}

void ExperimentConfig::validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("experiment: " + what); };
    params.validate();
    if (users < 1) bad("U must be >= 1");
    if (fleet < 1) bad("D must be >= 1");
    if (!(area > 0) || !std::isfinite(area)) bad("area must be positive");
    if (!(rate_min > 0) || !(rate_max >= rate_min) || !std::isfinite(rate_max)) bad("need 0 < rate_min <= rate_max");
    if (!(illum_scale >= 0) || !std::isfinite(illum_scale)) bad("illum_scale must be nonnegative");
    predictor.validate();
    if (declared_features != 0 && declared_features != predictor.feature_count())
        bad("N = " + std::to_string(declared_features) + " disagrees with the architecture (N = " +
            std::to_string(predictor.feature_count()) + ")");
    if (train_chunks < 1) bad("train_chunks must be >= 1");
    if (chunk_frames < predictor.seq_len + 1) bad("chunk_frames must exceed T");
    if (eval_stride < 1) bad("eval_stride must be >= 1");
    if (replicates < 1) bad("replicates must be >= 1");
    if (variants.empty()) bad("variant list is empty");
    for (const auto& v : variants)
        if (!known_variant(v)) bad("unknown variant '" + v + "'");
    options.validate();
    if (grid_file.empty()) {
        if (synth.side != predictor.grid_side) bad("synthetic grid side must equal lambda_0");
        illum::SynthConfig s = synth;
        s.frames = 1;
        s.validate();
    } else if (!std::filesystem::exists(grid_file)) {
        throw DataError("experiment: grid file " + grid_file.string() + " does not exist");
    }
    if (!checkpoint.empty() && !std::filesystem::exists(checkpoint))
        throw DataError("experiment: checkpoint " + checkpoint.string() + " does not exist");
}

// ---- data ----------------------------------------------------------------

illum::GridSequence history(const ExperimentConfig& config, int start, int count) {
    if (start < 0 || count < 1) throw ConfigError("history: bad frame range");
    if (config.grid_file.empty()) {
        illum::SynthConfig s = config.synth;
        s.frames = count;
        s.start_time = start * s.dt;
        return illum::synth_sequence(config.seed, s);
    }
    illum::GridSequence all = illum::load_grid_sequence(config.grid_file);
    if (start + count > all.length()) {
        std::ostringstream os;
        os << "history: frames " << start << ".." << start + count - 1 << " requested but "
           << config.grid_file.string() << " holds " << all.length();
        throw DataError(os.str());
    }
    if (all.frames.front().side() != config.predictor.grid_side)
        throw DataError("history: grid side differs from lambda_0");
    illum::GridSequence out;
    out.dt = all.dt;
    out.frames.assign(all.frames.begin() + start, all.frames.begin() + start + count);
    return out;
}

std::vector<illum::GridSequence> training_set(const ExperimentConfig& config) {
    std::vector<illum::GridSequence> out;
    for (int k = 0; k < config.train_chunks; ++k)
        out.push_back(history(config, k * config.chunk_frames, config.chunk_frames));
    return out;
}

illum::GridSequence heldout_window(const ExperimentConfig& config, int replicate) {
    const int start = config.train_chunks * config.chunk_frames + replicate * config.eval_stride;
    return history(config, start, config.predictor.seq_len + 1);
}

predictor::PredictorWeights fit_predictor(const ExperimentConfig& config) {
    predictor::PredictorConfig pc = config.predictor;
    pc.seed = config.seed;
    if (!config.checkpoint.empty()) return predictor::load_checkpoint(config.checkpoint, pc);
    const auto data = training_set(config);
    return predictor::train(data, pc).weights;
}

const predictor::PredictorWeights& PredictorCache::get(const ExperimentConfig& config) {
    const int key = config.predictor.seq_len;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, fit_predictor(config)).first;
    return it->second;
}

void PredictorCache::put(int seq_len, predictor::PredictorWeights weights) { cache_[seq_len] = std::move(weights); }

std::uint64_t replicate_seed(const ExperimentConfig& config, int replicate) {
    return splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(replicate) + 1));
}

std::vector<User> draw_users(const ExperimentConfig& config, int replicate) {
    std::mt19937_64 rng(replicate_seed(config, replicate));
    std::uniform_real_distribution<double> pos(0.0, config.area);
    std::uniform_real_distribution<double> rate(config.rate_min, config.rate_max);
    std::vector<User> users(static_cast<std::size_t>(config.users));
    for (auto& u : users) {
        const double v = pos(rng);
        const double w = pos(rng);
        u.pos = {v, w};
        u.rate = config.rate_min == config.rate_max ? config.rate_min : rate(rng);
    }
    return users;
}

opt::Scenario make_scenario(const ExperimentConfig& config, const std::vector<User>& users,
                            const illum::IlluminationGrid& raw_grid) {
    opt::Scenario s;
    s.users = users;
    s.fleet_size = config.fleet;
    s.area = {config.area, config.area};
    s.params = config.params;
    s.grid = illum::IlluminationGrid(raw_grid.values * config.illum_scale, config.area / raw_grid.side());
    return s;
}

// ---- pipeline ------------------------------------------------------------

std::vector<MetricsRow> run_pipeline(const ExperimentConfig& config, int replicate, PredictorCache& cache) {
    staged("config", [&] { config.validate(); });
    const illum::GridSequence window = staged("data", [&] { return heldout_window(config, replicate); });
    const int T = config.predictor.seq_len;
    const std::span<const illum::IlluminationGrid> observed(window.frames.data(), static_cast<std::size_t>(T));
    const illum::IlluminationGrid& actual = window.frames.back();
    const predictor::PredictorWeights& weights = staged("train", [&]() -> const predictor::PredictorWeights& {
        return cache.get(config);
    });
    const illum::IlluminationGrid predicted =
        staged("predict", [&] { return predictor::predict_next(observed, weights, config.predictor); });
    const double mse_predicted = illum::mean_squared_error(predicted, actual);
    const double mse_persistence = illum::mean_squared_error(observed.back(), actual);

    const auto users = draw_users(config, replicate);
    const auto [on_actual, on_predicted, on_persistence] = staged("scenario", [&] {
        auto a = make_scenario(config, users, actual);
        auto p = make_scenario(config, users, predicted);
        auto q = make_scenario(config, users, observed.back());
        a.validate();
        return std::make_tuple(a, p, q);
    });

    std::vector<MetricsRow> rows;
    for (const auto& variant : config.variants) {
        MetricsRow row;
        row.id = config.id;
        row.variant = variant;
        row.sweep_var = "-";
        row.replicate = replicate;
        row.seed = replicate_seed(config, replicate);
        const auto t0 = std::chrono::steady_clock::now();
        if (variant == "exhaustive" && (config.fleet > 2 || config.users > 6)) {
            row.status = "skipped: exhaustive oracle needs D <= 2 and U <= 6";
            rows.push_back(row);
            continue;
        }
        const opt::DeploymentSolution planned = staged("plan " + variant, [&] {
            if (variant == "proposed") return opt::optimize(on_predicted, config.options);
            if (variant == "actual-illum") return opt::optimize(on_actual, config.options);
            if (variant == "persistence") return opt::optimize(on_persistence, config.options);
            if (variant == "center") return opt::baseline_center(on_predicted);
            if (variant == "assoc-only") return opt::baseline_assoc_only(on_predicted, config.options);
            if (variant == "placement-only") return opt::baseline_fixed_association(on_predicted, config.options);
            return opt::exhaustive_oracle(on_actual);
        });
        const opt::DeploymentSolution scored = staged("score " + variant, [&] { return opt::top_up(on_actual, planned); });
        const auto check = opt::check_feasibility(on_actual, scored);
        row.total_power = scored.total_power;
        row.raw_power = planned.total_power;
        if (variant == "persistence") row.mse = mse_persistence;
        else if (variant == "actual-illum" || variant == "exhaustive") row.mse = 0.0;
        else row.mse = mse_predicted;
        row.iterations = planned.iterations;
        row.feasible = check.feasible;
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(row);
    }
    return rows;
}

SweepVar parse_sweep_var(const std::string& name) {
    if (name == "users" || name == "U") return SweepVar::Users;
    if (name == "height" || name == "H") return SweepVar::Height;
    if (name == "seq_len" || name == "T") return SweepVar::SeqLen;
    throw ConfigError("sweep: unknown variable '" + name + "' (users, height or seq_len)");
}

std::string sweep_label(SweepVar var) {
    switch (var) {
    case SweepVar::Users: return "U";
    case SweepVar::Height: return "H";
    case SweepVar::SeqLen: return "T";
    }
    return "-";
}

std::vector<MetricsRow> sweep(const ExperimentConfig& config, SweepVar var, const std::vector<double>& values,
                              PredictorCache& cache) {
    if (values.empty()) throw ConfigError("sweep: no values given");
    if (config.variants.empty()) throw ConfigError("sweep: variant list is empty");
    std::vector<MetricsRow> rows;
    for (double value : values) {
        ExperimentConfig c = config;
        const auto as_int = [&](const char* what) {
            if (value != std::floor(value) || value < 1) throw ConfigError(std::string("sweep: ") + what + " must be a positive integer");
            return static_cast<int>(value);
        };
        switch (var) {
        case SweepVar::Users: c.users = as_int("U"); break;
        case SweepVar::Height: c.params.altitude = value; break;
        case SweepVar::SeqLen: c.predictor.seq_len = as_int("T"); break;
        }
        for (int r = 0; r < c.replicates; ++r) {
            std::vector<MetricsRow> part;
            try {
                part = run_pipeline(c, r, cache);
            } catch (const Error& e) {
                for (const auto& variant : c.variants) {
                    MetricsRow row;
                    row.id = c.id;
                    row.variant = variant;
                    row.replicate = r;
                    row.seed = replicate_seed(c, r);
                    row.status = std::string("failed: ") + e.what();
                    part.push_back(row);
                }
            }
            for (auto& row : part) {
                row.sweep_var = sweep_label(var);
                row.sweep_value = value;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

// ---- output --------------------------------------------------------------

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

template <typename T>
T parse_field(const std::string& s, const char* name) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError(std::string("metrics csv: bad ") + name + " '" + s + "'");
    return v;
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", v);
    return buf;
}

} // namespace

std::string csv_header() {
    return "id,variant,sweep_var,sweep_value,replicate,seed,total_power,raw_power,mse,iterations,feasible,status";
}

void write_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
    out << csv_header() << '\n';
    for (const auto& r : rows) {
        out << quote(r.id) << ',' << r.variant << ',' << r.sweep_var << ',' << fmt(r.sweep_value) << ',' << r.replicate
            << ',' << r.seed << ',' << fmt(r.total_power) << ',' << fmt(r.raw_power) << ',' << fmt(r.mse) << ','
            << r.iterations << ',' << (r.feasible ? 1 : 0) << ',' << quote(r.status) << '\n';
    }
}

std::vector<MetricsRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != csv_header()) throw DataError("metrics csv: missing or unexpected header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 12) throw DataError("metrics csv: expected 12 columns in '" + line + "'");
        MetricsRow r;
        r.id = f[0];
        r.variant = f[1];
        r.sweep_var = f[2];
        r.sweep_value = parse_field<double>(f[3], "sweep_value");
        r.replicate = parse_field<int>(f[4], "replicate");
        r.seed = parse_field<std::uint64_t>(f[5], "seed");
        r.total_power = parse_field<double>(f[6], "total_power");
        r.raw_power = parse_field<double>(f[7], "raw_power");
        r.mse = parse_field<double>(f[8], "mse");
        r.iterations = parse_field<int>(f[9], "iterations");
        r.feasible = parse_field<int>(f[10], "feasible") != 0;
        r.status = f[11];
        rows.push_back(std::move(r));
    }
    return rows;
}

double reduction_percent(double base, double proposed) {
    if (!(base > 0)) throw NumericalError("reduction_percent: baseline power must be positive");
    return 100.0 * (base - proposed) / base;
}

void write_summary(const std::vector<MetricsRow>& rows, std::ostream& out) {
    // sweep points in order of first appearance
    std::vector<std::pair<std::string, double>> points;
    for (const auto& r : rows) {
        const std::pair<std::string, double> p{r.sweep_var, r.sweep_value};
        if (std::find(points.begin(), points.end(), p) == points.end()) points.push_back(p);
    }
    for (const auto& [var, value] : points) {
        out << "sweep " << var << " = " << fmt(value) << '\n';
        std::vector<std::pair<std::string, double>> means;
        for (const auto& variant : all_variants()) {
            double sum = 0.0;
            double mse = 0.0;
            int ok = 0;
            int total = 0;
            for (const auto& r : rows) {
                if (r.sweep_var != var || r.sweep_value != value || r.variant != variant) continue;
                ++total;
                if (r.status != "ok") continue;
                sum += r.total_power;
                mse += r.mse;
                ++ok;
            }
            if (total == 0) continue;
            out << "  " << variant << ": runs " << ok << '/' << total;
            if (ok > 0) {
                out << ", mean power " << fmt(sum / ok) << " W, mean mse " << fmt(mse / ok);
                means.emplace_back(variant, sum / ok);
            }
            out << '\n';
        }
        const auto prop = std::find_if(means.begin(), means.end(), [](const auto& m) { return m.first == "proposed"; });
        if (prop == means.end()) continue;
        for (const auto& [variant, mean] : means) {
            if (variant == "proposed" || !(mean > 0)) continue;
            out << "  reduction vs " << variant << ": " << percent(reduction_percent(mean, prop->second)) << '\n';
        }
    }
}

void report(const std::vector<MetricsRow>& rows, const std::filesystem::path& dir) {
    if (rows.empty()) throw ConfigError("report: no metrics rows");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw DataError("report: cannot create output directory " + dir.string());
    const auto open = [&](const std::string& name) {
        std::ofstream f(dir / name);
        if (!f) throw DataError("report: cannot write " + (dir / name).string());
        return f;
    };
    // one CSV per sweep variable
    std::vector<std::string> vars;
    for (const auto& r : rows)
        if (std::find(vars.begin(), vars.end(), r.sweep_var) == vars.end()) vars.push_back(r.sweep_var);
    for (const auto& var : vars) {
        std::vector<MetricsRow> part;
        std::copy_if(rows.begin(), rows.end(), std::back_inserter(part), [&](const auto& r) { return r.sweep_var == var; });
        auto f = open(var == "-" ? std::string("run.csv") : "sweep_" + var + ".csv");
        write_csv(part, f);
        if (!f) throw DataError("report: write failed in " + dir.string());
    }
    {
        auto f = open("summary.txt");
        write_summary(rows, f);
        if (!f) throw DataError("report: write failed in " + dir.string());
    }
    auto f = open("timing.csv");
    f << "id,variant,sweep_var,sweep_value,replicate,wall_seconds\n";
    for (const auto& r : rows)
        f << quote(r.id) << ',' << r.variant << ',' << r.sweep_var << ',' << fmt(r.sweep_value) << ',' << r.replicate
          << ',' << fmt(r.wall_seconds) << '\n';
    if (!f) throw DataError("report: write failed in " + dir.string());
}

} // namespace vlcuav::harness
