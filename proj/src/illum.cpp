#include "vlcuav/illum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace vlcuav::illum {

IlluminationGrid::IlluminationGrid(Eigen::MatrixXd v, double cell, Eigen::Vector2d o)
    : values(std::move(v)), cell_size(cell), origin(std::move(o)) {}

bool IlluminationGrid::contains(double v, double w) const {
    const double ext = extent();
    return v >= origin.x() && v <= origin.x() + ext && w >= origin.y() && w <= origin.y() + ext;
}

void IlluminationGrid::validate() const {
    if (values.rows() != values.cols()) throw DataError("illumination grid must be square");
    if (values.rows() < 2) throw DataError("illumination grid side must be >= 2");
    if (!(cell_size > 0) || !std::isfinite(cell_size)) throw DataError("illumination grid cell size must be positive");
    if (!values.allFinite()) throw DataError("illumination grid holds non-finite values");
    if ((values.array() < 0).any()) throw DataError("illumination grid holds negative values");
}

double sample(const IlluminationGrid& grid, double v, double w) {
    if (!grid.contains(v, w)) {
        std::ostringstream os;
        os << "sample: (" << v << ", " << w << ") outside the grid footprint";
        throw DataError(os.str());
    }
    const int last = grid.side() - 1;
    const auto index = [&](double coord, double start) {
        const int k = static_cast<int>(std::floor((coord - start) / grid.cell_size));
        return std::clamp(k, 0, last);
    };
    return grid.values(index(v, grid.origin.x()), index(w, grid.origin.y()));
}

IlluminationGrid scaled(const IlluminationGrid& grid, double scale) {
    return IlluminationGrid(grid.values * scale, grid.cell_size, grid.origin);
}

double mean_squared_error(const IlluminationGrid& a, const IlluminationGrid& b) {
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
        throw ShapeError("mean_squared_error: grid sizes differ");
    return (a.values - b.values).squaredNorm() / static_cast<double>(a.values.size());
}

void GridSequence::validate() const {
    if (frames.empty()) throw DataError("grid sequence has no frames");
    if (!(dt > 0)) throw DataError("grid sequence dt must be positive");
    const auto& first = frames.front();
    for (const auto& f : frames) {
        f.validate();
        if (f.side() != first.side() || f.cell_size != first.cell_size || f.origin != first.origin)
            throw DataError("grid sequence frames disagree on geometry");
    }
}

namespace {

[[noreturn]] void fail(GridFileErrorKind kind, const std::string& what) {
    throw GridFileError(kind, "ILLUMGRID: " + what);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(' ', pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

} // namespace

GridSequence read_grid_sequence(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(GridFileErrorKind::MalformedHeader, "missing header");
    const auto head = split_spaces(line);
    int side = 0;
    int frames = 0;
    double cell = 0;
    double dt = 0;
    if (head.size() != 6 || head[0] != "ILLUMGRID" || head[1] != "v1" || !parse_number(head[2], side) ||
        !parse_number(head[3], frames) || !parse_number(head[4], cell) || !parse_number(head[5], dt))
        fail(GridFileErrorKind::MalformedHeader, "expected 'ILLUMGRID v1 <side> <frames> <cell_size_m> <dt_min>'");
    if (side < 2 || frames < 1 || !(cell > 0) || !(dt > 0) || !std::isfinite(cell) || !std::isfinite(dt))
        fail(GridFileErrorKind::MalformedHeader, "header values out of range");

    GridSequence seq;
    seq.dt = dt;
    seq.frames.reserve(frames);
    for (int f = 0; f < frames; ++f) {
        Eigen::MatrixXd values(side, side);
        for (int r = 0; r < side; ++r) {
            if (!std::getline(in, line)) {
                std::ostringstream os;
                os << "payload ends in frame " << f << " row " << r << " (" << frames << " frames declared)";
                fail(GridFileErrorKind::Truncated, os.str());
            }
            const auto toks = split_spaces(line);
            if (static_cast<int>(toks.size()) != side) {
                std::ostringstream os;
                os << "frame " << f << " row " << r << " has " << toks.size() << " values, expected " << side;
                fail(GridFileErrorKind::DimensionMismatch, os.str());
            }
            for (int c = 0; c < side; ++c) {
                double v = 0;
                if (!parse_number(toks[c], v) || !std::isfinite(v))
                    fail(GridFileErrorKind::MalformedValue, "unparsable value '" + std::string(toks[c]) + "'");
                if (v < 0) fail(GridFileErrorKind::NegativeValue, "negative value " + std::string(toks[c]));
                values(r, c) = v;
            }
        }
        seq.frames.emplace_back(std::move(values), cell);
    }
    while (std::getline(in, line)) {
        if (!line.empty()) fail(GridFileErrorKind::DimensionMismatch, "payload longer than the header declares");
    }
    return seq;
}

void write_grid_sequence(const GridSequence& seq, std::ostream& out) {
    seq.validate();
    const int side = seq.frames.front().side();
    out << "ILLUMGRID v1 " << side << ' ' << seq.length() << ' ' << format_double(seq.frames.front().cell_size) << ' '
        << format_double(seq.dt) << '\n';
    std::string row;
    for (const auto& frame : seq.frames) {
        for (int r = 0; r < side; ++r) {
            row.clear();
            for (int c = 0; c < side; ++c) {
                if (c) row += ' ';
                row += format_double(frame.values(r, c));
            }
            row += '\n';
            out << row;
        }
    }
}

GridSequence load_grid_sequence(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(GridFileErrorKind::Io, "cannot open " + path.string());
    return read_grid_sequence(in);
}

void save_grid_sequence(const GridSequence& seq, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(GridFileErrorKind::Io, "cannot write " + path.string());
    write_grid_sequence(seq, out);
    if (!out) fail(GridFileErrorKind::Io, "write failed for " + path.string());
}

void SynthConfig::validate() const {
    auto bad = [](const char* what) { throw ConfigError(std::string("synth config: ") + what); };
    if (side < 2) bad("side must be >= 2");
    if (frames < 1) bad("frames must be >= 1");
    if (!(cell_size > 0) || !(dt > 0)) bad("cell_size and dt must be positive");
    if (static_blobs < 0 || drifting_blobs < 0 || pulsing_blobs < 0) bad("blob counts must be nonnegative");
    if (!(amp_min >= 0 && amp_max >= amp_min)) bad("need 0 <= amp_min <= amp_max");
    if (!(sigma_min > 0 && sigma_max >= sigma_min)) bad("need 0 < sigma_min <= sigma_max");
    if (!(speed_min >= 0 && speed_max >= speed_min)) bad("need 0 <= speed_min <= speed_max");
    if (!(period_min > 0 && period_max >= period_min)) bad("need 0 < period_min <= period_max");
    if (!(pulse_depth >= 0 && pulse_depth <= 1)) bad("pulse_depth must lie in [0, 1]");
    if (!(background >= 0)) bad("background must be nonnegative");
    if (!std::isfinite(start_time)) bad("start_time must be finite");
    if (!(noise >= 0)) bad("noise must be nonnegative");
}

namespace {

enum class BlobKind { Static, Drifting, Pulsing };

struct Blob {
    BlobKind kind;
    Eigen::Vector2d center;    // cells, at t = 0
    Eigen::Vector2d velocity;  // cells per minute
    double amplitude;
    double sigma;
    double period;
    double phase;
};

double wrap_delta(double d, double side) {
    return d - side * std::round(d / side);
}

} // namespace

GridSequence synth_sequence(std::uint64_t seed, const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const double side = config.side;
    const double two_pi = 2.0 * std::numbers::pi;

    std::vector<Blob> blobs;
    const auto add = [&](BlobKind kind, int count) {
        for (int k = 0; k < count; ++k) {
            Blob b{};
            b.kind = kind;
            b.center = {uniform(0, side), uniform(0, side)};
            b.amplitude = uniform(config.amp_min, config.amp_max);
            b.sigma = uniform(config.sigma_min, config.sigma_max);
            b.velocity.setZero();
            b.period = 1.0;
            b.phase = 0.0;
            if (kind == BlobKind::Drifting) {
                double heading = uniform(0, two_pi);
                if (config.axis_drift) heading = 0.5 * std::numbers::pi * std::floor(heading / (0.5 * std::numbers::pi));
                const double speed = uniform(config.speed_min, config.speed_max);
                b.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
            } else if (kind == BlobKind::Pulsing) {
                b.period = uniform(config.period_min, config.period_max);
                b.phase = uniform(0, two_pi);
            }
            blobs.push_back(b);
        }
    };
    add(BlobKind::Static, config.static_blobs);
    add(BlobKind::Drifting, config.drifting_blobs);
    add(BlobKind::Pulsing, config.pulsing_blobs);

    GridSequence seq;
    seq.dt = config.dt;
    seq.frames.reserve(config.frames);
    for (int t = 0; t < config.frames; ++t) {
        const double minutes = config.start_time + t * config.dt;
        Eigen::MatrixXd values = Eigen::MatrixXd::Constant(config.side, config.side, config.background);
        for (const auto& b : blobs) {
            Eigen::Vector2d c = b.center + b.velocity * minutes;
            double amp = b.amplitude;
            if (b.kind == BlobKind::Pulsing) {
                const double angle = two_pi * minutes / b.period + b.phase;
                if (config.square_pulse) {
                    const double cycle = angle / two_pi - std::floor(angle / two_pi);
                    if (cycle >= 0.5) amp *= 1.0 - config.pulse_depth;
                } else {
                    amp *= 1.0 - 0.5 * config.pulse_depth * (1.0 - std::cos(angle));
                }
            }
            const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
            for (int i = 0; i < config.side; ++i) {
                const double dx = wrap_delta(i + 0.5 - c.x(), side);
                for (int j = 0; j < config.side; ++j) {
                    const double dy = wrap_delta(j + 0.5 - c.y(), side);
                    values(i, j) += amp * std::exp(-(dx * dx + dy * dy) * inv);
                }
            }
        }
        if (config.noise > 0) {
            // keyed on the absolute frame index so a continued scene sees the same noise
            const auto step = static_cast<std::int64_t>(std::llround(minutes / config.dt));
            std::seed_seq key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)};
            std::mt19937_64 frame_rng(key);
            std::normal_distribution<double> gauss(0.0, config.noise);
            for (Eigen::Index k = 0; k < values.size(); ++k) values.data()[k] = std::max(0.0, values.data()[k] + gauss(frame_rng));
        }
        seq.frames.emplace_back(std::move(values), config.cell_size);
    }
    return seq;
}

} // namespace vlcuav::illum
