#include "vlcuav/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace vlcuav::config {

using harness::ExperimentConfig;

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expect) {
    throw ConfigError("config: key '" + key + "' expects " + expect + ", got '" + value + "'");
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::string s = value;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T v{};
    const char* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        if constexpr (std::is_floating_point_v<T>) bad_value(key, value, "a number");
        else bad_value(key, value, "an integer");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    bad_value(key, value, "true or false");
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_same_v<T, std::string>) out += values[i];
        else out += fmt(values[i]);
    }
    return out;
}

struct Entry {
    std::string key;
    std::string help;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

// Field binders: one per value type.
template <typename T>
Entry bind(std::string key, std::string help, T ExperimentConfig::*field) {
    const std::string k = key;
    return {std::move(key), std::move(help),
            [k, field](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, bool>) c.*field = parse_bool(k, v);
                else c.*field = parse_number<T>(k, v);
            },
            [field](const ExperimentConfig& c) { return fmt(c.*field); }};
}

template <typename Part, typename T>
Entry bind(std::string key, std::string help, Part ExperimentConfig::*part, T Part::*field) {
    const std::string k = key;
    return {std::move(key), std::move(help),
            [k, part, field](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, bool>) (c.*part).*field = parse_bool(k, v);
                else (c.*part).*field = parse_number<T>(k, v);
            },
            [part, field](const ExperimentConfig& c) { return fmt((c.*part).*field); }};
}

Entry bind_path(std::string key, std::string help, std::filesystem::path ExperimentConfig::*field) {
    return {std::move(key), std::move(help), [field](ExperimentConfig& c, const std::string& v) { c.*field = v; },
            [field](const ExperimentConfig& c) { return (c.*field).string(); }};
}

const std::vector<Entry>& table() {
    using H = ExperimentConfig;
    using P = predictor::PredictorConfig;
    using S = illum::SynthConfig;
    using O = opt::Options;
    using V = VlcParams;
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> t;
        // experiment
        t.push_back({"id", "experiment id written to every metrics row",
                     [](H& c, const std::string& v) {
                         if (v.empty() || v.find_first_of(",\"\n") != std::string::npos)
                             bad_value("id", v, "a nonempty name without commas or quotes");
                         c.id = v;
                     },
                     [](const H& c) { return c.id; }});
        t.push_back(bind("seed", "master seed (scene, weight init, user draws)", &H::seed));
        t.push_back(bind("replicates", "held-out windows / user draws per sweep point", &H::replicates));
        t.push_back({"variants", "comparison variants: proposed, actual-illum, persistence, center, assoc-only, "
                                 "placement-only, exhaustive",
                     [](H& c, const std::string& v) {
                         auto list = split_list(v);
                         for (const auto& name : list)
                             if (std::find(harness::all_variants().begin(), harness::all_variants().end(), name) ==
                                 harness::all_variants().end())
                                 bad_value("variants", name, "a known variant name");
                         c.variants = std::move(list);
                     },
                     [](const H& c) { return join(c.variants); }});
        t.push_back(bind_path("out_dir", "output directory for the sweep CSVs, summary.txt and timing.csv", &H::out_dir));
        // channel
        t.push_back(bind("phi_half", "transmitter semiangle at half power, degrees", &H::params, &V::phi_half));
        t.push_back(bind("psi_c", "receiver FOV semiangle, degrees", &H::params, &V::psi_c));
        t.push_back(bind("rho", "detector area, m^2", &H::params, &V::rho));
        t.push_back(bind("xi", "illumination target, A/W", &H::params, &V::xi));
        t.push_back(bind("n_e", "concentrator refractive index", &H::params, &V::n_e));
        t.push_back(bind("n_w", "noise standard deviation", &H::params, &V::n_w));
        t.push_back(bind("X", "LoS model parameter X", &H::params, &V::env_x));
        t.push_back(bind("Y", "LoS model parameter Y", &H::params, &V::env_y));
        t.push_back(bind("eta_r", "illumination demand", &H::params, &V::eta_r));
        t.push_back(bind("H", "UAV altitude, m", &H::params, &V::altitude));
        t.push_back(bind("d_min", "minimum squared UAV separation, m^2", &H::params, &V::d_min));
        t.push_back({"b_bar", "homogeneous LoS probability, or 'auto' for the value at 90 degrees elevation",
                     [](H& c, const std::string& v) {
                         if (v == "auto") c.params.b_bar.reset();
                         else c.params.b_bar = parse_number<double>("b_bar", v);
                     },
                     [](const H& c) { return c.params.b_bar ? fmt(*c.params.b_bar) : std::string("auto"); }});
        // scenario
        t.push_back(bind("U", "number of users", &H::users));
        t.push_back(bind("D", "number of UAVs", &H::fleet));
        t.push_back(bind("area", "side of the square service area, m", &H::area));
        t.push_back(bind("rate_min", "lower bound of the uniform user rate draw, Mbps", &H::rate_min));
        t.push_back(bind("rate_max", "upper bound of the uniform user rate draw, Mbps", &H::rate_max));
        t.push_back(bind("illum_scale", "factor from grid values to ambient illumination", &H::illum_scale));
        // history
        t.push_back(bind_path("grid_file", "ILLUMGRID history file (empty: synthetic)", &H::grid_file));
        t.push_back(bind("train_chunks", "training chunks taken from the start of the history", &H::train_chunks));
        t.push_back(bind("chunk_frames", "frames per training chunk", &H::chunk_frames));
        t.push_back(bind("eval_stride", "frames between consecutive held-out windows", &H::eval_stride));
        t.push_back(bind("dt", "synthetic frame spacing, minutes", &H::synth, &S::dt));
        t.push_back(bind("synth_static", "static light sources", &H::synth, &S::static_blobs));
        t.push_back(bind("synth_drifting", "drifting light sources", &H::synth, &S::drifting_blobs));
        t.push_back(bind("synth_pulsing", "pulsing light sources", &H::synth, &S::pulsing_blobs));
        t.push_back(bind("synth_amp_min", "minimum source amplitude", &H::synth, &S::amp_min));
        t.push_back(bind("synth_amp_max", "maximum source amplitude", &H::synth, &S::amp_max));
        t.push_back(bind("synth_sigma_min", "minimum source width, cells", &H::synth, &S::sigma_min));
        t.push_back(bind("synth_sigma_max", "maximum source width, cells", &H::synth, &S::sigma_max));
        t.push_back(bind("synth_speed_min", "minimum drift speed, cells per minute", &H::synth, &S::speed_min));
        t.push_back(bind("synth_speed_max", "maximum drift speed, cells per minute", &H::synth, &S::speed_max));
        t.push_back(bind("synth_axis_drift", "restrict drift headings to the grid axes", &H::synth, &S::axis_drift));
        t.push_back(bind("synth_period_min", "minimum pulse period, minutes", &H::synth, &S::period_min));
        t.push_back(bind("synth_period_max", "maximum pulse period, minutes", &H::synth, &S::period_max));
        t.push_back(bind("synth_pulse_depth", "relative pulse swing in [0, 1]", &H::synth, &S::pulse_depth));
        t.push_back(bind("synth_square_pulse", "on/off pulses instead of sinusoids", &H::synth, &S::square_pulse));
        t.push_back(bind("synth_background", "constant background level", &H::synth, &S::background));
        t.push_back(bind("synth_noise", "std of per-cell noise", &H::synth, &S::noise));
        // predictor
        t.push_back({"lambda_0", "grid side in cells (also the synthetic grid side)",
                     [](H& c, const std::string& v) {
                         c.predictor.grid_side = parse_number<int>("lambda_0", v);
                         c.synth.side = c.predictor.grid_side;
                     },
                     [](const H& c) { return fmt(c.predictor.grid_side); }});
        t.push_back(bind("L", "convolution / deconvolution layers", &H::predictor, &P::layers));
        t.push_back(bind("S", "kernel side", &H::predictor, &P::kernel));
        t.push_back({"K", "feature maps per layer (list of L counts)",
                     [](H& c, const std::string& v) {
                         std::vector<int> maps;
                         for (const auto& tok : split_list(v)) maps.push_back(parse_number<int>("K", tok));
                         if (maps.empty()) bad_value("K", v, "a list of counts");
                         c.predictor.feature_maps = std::move(maps);
                     },
                     [](const H& c) { return join(c.predictor.feature_maps); }});
        t.push_back(bind("S_m", "pooling window side", &H::predictor, &P::pool));
        t.push_back(bind("D_h", "GRU hidden width", &H::predictor, &P::hidden));
        t.push_back(bind("D_q", "accepted and ignored", &H::d_q));
        t.push_back(bind("N", "feature vector length; 0 skips the consistency check", &H::declared_features));
        t.push_back(bind("alpha", "learning rate", &H::predictor, &P::learn_rate));
        t.push_back(bind("e", "training epochs", &H::predictor, &P::epochs));
        t.push_back(bind("T", "input sequence length", &H::predictor, &P::seq_len));
        t.push_back(bind("init_range", "uniform init half-width; 0 selects fan-scaled ranges", &H::predictor,
                         &P::init_range));
        t.push_back(bind_path("checkpoint", "predictor checkpoint to load instead of training", &H::checkpoint));
        // optimizer
        t.push_back(bind("gamma", "placement dual step", &H::options, &O::gamma));
        t.push_back(bind("delta", "association dual step", &H::options, &O::delta));
        t.push_back(bind("epsilon", "placement dual residual tolerance", &H::options, &O::epsilon));
        t.push_back(bind("dual_cap", "placement dual steps per convexified problem", &H::options, &O::dual_cap));
        t.push_back(bind("sca_cap", "SCA iterations per placement", &H::options, &O::sca_cap));
        t.push_back(bind("sca_tol", "SCA relative decrease tolerance", &H::options, &O::sca_tol));
        t.push_back(bind("outer_cap", "placement/association alternations", &H::options, &O::outer_cap));
        t.push_back(bind("outer_tol", "alternation relative decrease tolerance", &H::options, &O::outer_tol));
        t.push_back(bind("assoc_cap", "association dual steps", &H::options, &O::assoc_cap));
        t.push_back(bind("assoc_stable", "stop after this many unchanged associations (0: run to the cap)",
                         &H::options, &O::assoc_stable));
        t.push_back(bind("starts", "farthest-point initialisations", &H::options, &O::starts));
        t.push_back(bind("multi_start", "also start from the centre layout", &H::options, &O::multi_start));
        t.push_back(bind("refine_passes", "single-user reassignment sweeps", &H::options, &O::refine_passes));
        return t;
    }();
    return entries;
}

const Entry& find(const std::string& key) {
    for (const auto& e : table())
        if (e.key == key) return e;
    throw ConfigError("config: unknown key '" + key + "'");
}

} // namespace

const std::vector<KeyInfo>& keys() {
    static const std::vector<KeyInfo> out = [] {
        std::vector<KeyInfo> k;
        for (const auto& e : table()) k.push_back({e.key, e.help});
        return k;
    }();
    return out;
}

void apply(ExperimentConfig& config, const std::string& key, const std::string& value) {
    find(key).set(config, trim(value));
}

ExperimentConfig parse(std::istream& in, ExperimentConfig base) {
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        try {
            if (eq == std::string::npos) throw ConfigError("config: expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            apply(base, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(number) + ": " + e.what());
        }
    }
    return base;
}

ExperimentConfig load(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open " + path.string());
    try {
        return parse(in, std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string value_of(const ExperimentConfig& config, const std::string& key) { return find(key).get(config); }

void dump(const ExperimentConfig& config, std::ostream& out) {
    for (const auto& e : table()) out << "# " << e.help << '\n' << e.key << " = " << e.get(config) << '\n';
}

} // namespace vlcuav::config
