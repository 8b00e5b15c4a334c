#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "vlcuav/predictor.hpp"

namespace vlcuav::predictor {

// Text checkpoint:
//   VLCPRED v1
//   layers <L>
//   kernel <S>
//   pool <S_m>
//   feature_maps <K1> ... <KL>
//   hidden <D_h>
//   grid_side <lambda_0>
//   blocks <count>
// then per parameter block (for_each order) a line "<rows> <cols>" followed by
// `rows` lines of `cols` values written with 17 significant digits.

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

[[noreturn]] void bad(const std::string& what) { throw DataError("checkpoint: " + what); }

std::istringstream next_line(std::istream& in, const char* expect) {
    std::string line;
    if (!std::getline(in, line)) bad(std::string("unexpected end of file, expected ") + expect);
    return std::istringstream(line);
}

int read_keyed_int(std::istream& in, const std::string& key) {
    auto ls = next_line(in, key.c_str());
    std::string k;
    int v = 0;
    if (!(ls >> k >> v) || k != key) bad("expected '" + key + " <int>'");
    return v;
}

PredictorConfig read_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "VLCPRED v1") bad("missing 'VLCPRED v1' header");
    PredictorConfig cfg;
    cfg.layers = read_keyed_int(in, "layers");
    cfg.kernel = read_keyed_int(in, "kernel");
    cfg.pool = read_keyed_int(in, "pool");
    {
        auto ls = next_line(in, "feature_maps");
        std::string k;
        if (!(ls >> k) || k != "feature_maps") bad("expected 'feature_maps ...'");
        cfg.feature_maps.clear();
        int v = 0;
        while (ls >> v) cfg.feature_maps.push_back(v);
    }
    cfg.hidden = read_keyed_int(in, "hidden");
    cfg.grid_side = read_keyed_int(in, "grid_side");
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        bad(std::string("declared architecture is invalid: ") + e.what());
    }
    return cfg;
}

} // namespace

void write_checkpoint(const PredictorConfig& config, const PredictorWeights& weights, std::ostream& out) {
    out << "VLCPRED v1\n"
        << "layers " << config.layers << '\n'
        << "kernel " << config.kernel << '\n'
        << "pool " << config.pool << '\n'
        << "feature_maps";
    for (int k : config.feature_maps) out << ' ' << k;
    out << '\n'
        << "hidden " << config.hidden << '\n'
        << "grid_side " << config.grid_side << '\n';
    std::size_t blocks = 0;
    weights.for_each([&](const auto&) { ++blocks; });
    out << "blocks " << blocks << '\n';
    std::string row;
    weights.for_each([&](const auto& block) {
        out << block.rows() << ' ' << block.cols() << '\n';
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
            row.clear();
            for (Eigen::Index c = 0; c < block.cols(); ++c) {
                if (c) row += ' ';
                row += format_double(block(r, c));
            }
            row += '\n';
            out << row;
        }
    });
}

PredictorConfig read_checkpoint_config(std::istream& in) { return read_header(in); }

PredictorWeights read_checkpoint(std::istream& in, const PredictorConfig& expected) {
    const PredictorConfig stored = read_header(in);
    if (!stored.same_architecture(expected)) {
        std::ostringstream os;
        os << "architecture mismatch: file has L=" << stored.layers << " S=" << stored.kernel
           << " S_m=" << stored.pool << " D_h=" << stored.hidden << " side=" << stored.grid_side
           << ", configuration has L=" << expected.layers << " S=" << expected.kernel << " S_m=" << expected.pool
           << " D_h=" << expected.hidden << " side=" << expected.grid_side;
        throw ShapeError(os.str());
    }
    PredictorWeights w = PredictorWeights::zeros(expected);
    std::size_t expected_blocks = 0;
    w.for_each([&](const auto&) { ++expected_blocks; });
    if (static_cast<std::size_t>(read_keyed_int(in, "blocks")) != expected_blocks) bad("block count mismatch");
    std::size_t index = 0;
    w.for_each([&](auto& block) {
        auto dims = next_line(in, "block shape");
        Eigen::Index rows = 0;
        Eigen::Index cols = 0;
        if (!(dims >> rows >> cols) || rows != block.rows() || cols != block.cols()) {
            std::ostringstream os;
            os << "block " << index << " has wrong shape (expected " << block.rows() << " x " << block.cols() << ")";
            bad(os.str());
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            std::string line;
            if (!std::getline(in, line)) bad("truncated block data");
            const char* p = line.data();
            const char* end = line.data() + line.size();
            for (Eigen::Index c = 0; c < cols; ++c) {
                while (p < end && *p == ' ') ++p;
                double v = 0;
                const auto res = std::from_chars(p, end, v);
                if (res.ec != std::errc()) bad("unparsable value in block data");
                block(r, c) = v;
                p = res.ptr;
            }
            while (p < end && *p == ' ') ++p;
            if (p != end) bad("too many values in block row");
        }
        ++index;
    });
    if (!w.all_finite()) bad("non-finite weights");
    return w;
}

void save_checkpoint(const PredictorConfig& config, const PredictorWeights& weights, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("checkpoint: cannot write " + path.string());
    write_checkpoint(config, weights, out);
    if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

PredictorWeights load_checkpoint(const std::filesystem::path& path, const PredictorConfig& expected) {
    std::ifstream in(path);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());
    return read_checkpoint(in, expected);
}

} // namespace vlcuav::predictor
