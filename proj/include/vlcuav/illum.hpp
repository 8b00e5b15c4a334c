// illum.hpp
//
// Ambient illumination grids, their time series, the ILLUMGRID text format
// and a seeded generator of synthetic night-light sequences.

#ifndef VLCUAV_ILLUM_HPP
#define VLCUAV_ILLUM_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vlcuav/errors.hpp"

namespace vlcuav::illum {

/// Square field of ambient illumination. `values(i, j)` covers
/// [x0 + i*cell, x0 + (i+1)*cell) x [y0 + j*cell, y0 + (j+1)*cell), i.e. the
/// first index runs along the user coordinate v and the second along w.
struct IlluminationGrid {
    Eigen::MatrixXd values;
    double cell_size = 1.0;
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();

    IlluminationGrid() = default;
    IlluminationGrid(Eigen::MatrixXd v, double cell, Eigen::Vector2d o = Eigen::Vector2d::Zero());

    int side() const { return static_cast<int>(values.rows()); }
    double extent() const { return cell_size * side(); }
    bool contains(double v, double w) const;

    /// Throws DataError on a non-square, too small, negative or non-finite grid.
    void validate() const;
};

/// Value of the cell containing (v, w). A coordinate exactly on the far edge
/// belongs to the last cell; anything outside the footprint throws DataError.
double sample(const IlluminationGrid& grid, double v, double w);

/// Same field with every value multiplied by `scale`.
IlluminationGrid scaled(const IlluminationGrid& grid, double scale);

/// Mean squared cell difference.
double mean_squared_error(const IlluminationGrid& a, const IlluminationGrid& b);

struct GridSequence {
    std::vector<IlluminationGrid> frames;
    double dt = 1.0;  // minutes per step

    int length() const { return static_cast<int>(frames.size()); }
    void validate() const;
};

// ILLUMGRID v1 text format:
//   ILLUMGRID v1 <side> <frames> <cell_size_m> <dt_min>
// followed by frames*side lines of `side` values separated by single spaces.
// Line k of frame f holds values(k, 0..side-1). Numbers are written with 17
// significant digits so a save/load cycle is bit exact.

enum class GridFileErrorKind { MalformedHeader, DimensionMismatch, NegativeValue, Truncated, MalformedValue, Io };

class GridFileError : public DataError {
public:
    GridFileError(GridFileErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
    GridFileErrorKind kind() const noexcept { return kind_; }

private:
    GridFileErrorKind kind_;
};

GridSequence read_grid_sequence(std::istream& in);
void write_grid_sequence(const GridSequence& seq, std::ostream& out);
GridSequence load_grid_sequence(const std::filesystem::path& path);
void save_grid_sequence(const GridSequence& seq, const std::filesystem::path& path);

/// Gaussian light sources for the synthetic generator. Positions and speeds
/// are expressed in cells and cells/minute; blobs wrap around the grid edges.
struct SynthConfig {
    int side = 30;
    int frames = 40;
    double cell_size = 80.0 / 30.0;
    double dt = 1.0;
    int static_blobs = 2;
    int drifting_blobs = 2;
    int pulsing_blobs = 2;
    double amp_min = 0.4;
    double amp_max = 1.0;
    double sigma_min = 1.5;     // cells
    double sigma_max = 3.0;
    double speed_min = 0.2;     // cells per minute
    double speed_max = 0.6;
    bool axis_drift = false;    // drift headings restricted to +-v / +-w (street grid)
    double period_min = 3.0;    // minutes
    double period_max = 6.0;
    double pulse_depth = 0.9;   // 0..1, relative amplitude swing
    bool square_pulse = false;  // on/off cycles (dimmed for the second half period) instead of a sinusoid
    double background = 0.0;
    double start_time = 0.0;    // minutes; the same seed at a later start continues the same scene
    double noise = 0.0;         // std of additive per-cell noise (result clipped at 0)

    void validate() const;
    int blob_count() const { return static_blobs + drifting_blobs + pulsing_blobs; }
};

/// Deterministic synthetic sequence for `seed`.
GridSequence synth_sequence(std::uint64_t seed, const SynthConfig& config);

} // namespace vlcuav::illum

#endif // VLCUAV_ILLUM_HPP
