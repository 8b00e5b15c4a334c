// harness.hpp
//
// Experiment pipeline: build a scenario from a seeded user draw and an
// illumination history, forecast the next grid, plan deployments for every
// comparison variant and score them on the grid that actually occurs.

#ifndef VLCUAV_HARNESS_HPP
#define VLCUAV_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vlcuav/channel.hpp"
#include "vlcuav/errors.hpp"
#include "vlcuav/illum.hpp"
#include "vlcuav/optimizer.hpp"
#include "vlcuav/predictor.hpp"

namespace vlcuav::harness {

/// Comparison variants in report order.
inline const std::vector<std::string>& all_variants() {
    static const std::vector<std::string> v{"proposed", "actual-illum", "persistence", "center",
                                            "assoc-only", "placement-only", "exhaustive"};
    return v;
}

struct ExperimentConfig {
    std::string id = "exp";
    std::uint64_t seed = 1;  // master seed: scene, weights, user draws

    VlcParams params;
    int users = 10;                 // U
    int fleet = 2;                  // D
    double area = 80.0;             // side of the square service area, m
    double rate_min = 0.5;          // Mbps
    double rate_max = 1.5;
    double illum_scale = 1e-3;      // grid value -> ambient illumination in eta_r units

    // Illumination history: a grid file or the synthetic generator. Training
    // uses `train_chunks` consecutive chunks of `chunk_frames` frames; held-out
    // window r starts `eval_stride * r` frames after the training span.
    std::filesystem::path grid_file;
    illum::SynthConfig synth;
    int train_chunks = 12;
    int chunk_frames = 20;
    int eval_stride = 20;

    predictor::PredictorConfig predictor;
    std::filesystem::path checkpoint;  // load instead of training when set
    int declared_features = 0;         // N; when nonzero it must match the architecture
    int d_q = 16;                      // accepted for completeness, not used by any model

    opt::Options options;
    std::vector<std::string> variants{"proposed", "actual-illum", "persistence", "center", "assoc-only",
                                      "placement-only"};
    int replicates = 5;               // held-out windows / user draws per sweep point
    std::filesystem::path out_dir = "out";

    ExperimentConfig();
    /// Throws ConfigError on inconsistent settings and DataError on missing files.
    void validate() const;
};

struct MetricsRow {
    std::string id;
    std::string variant;
    std::string sweep_var;       // U, H, T or "-" for a single run
    double sweep_value = 0.0;
    int replicate = 0;
    std::uint64_t seed = 0;      // seed of the user draw
    double total_power = 0.0;    // scored on the actual grid (after top-up)
    double raw_power = 0.0;      // as planned on the variant's own grid
    double mse = 0.0;            // MSE of the grid the variant planned on
    int iterations = 0;          // outer alternations (0 for fixed layouts)
    bool feasible = false;       // re-validated on the actual grid
    std::string status = "ok";   // "ok" or an error with its stage
    double wall_seconds = 0.0;   // kept out of the deterministic CSV
};

/// Trained weights per sequence length, shared across the runs of a sweep.
class PredictorCache {
public:
    const predictor::PredictorWeights& get(const ExperimentConfig& config);
    void put(int seq_len, predictor::PredictorWeights weights);
    bool contains(int seq_len) const { return cache_.count(seq_len) != 0; }

private:
    std::map<int, predictor::PredictorWeights> cache_;
};

/// `count` frames of the illumination history starting at frame `start`.
illum::GridSequence history(const ExperimentConfig& config, int start, int count);
/// Training chunks of the configured history.
std::vector<illum::GridSequence> training_set(const ExperimentConfig& config);
/// Held-out window `replicate`: seq_len observed frames plus the target.
illum::GridSequence heldout_window(const ExperimentConfig& config, int replicate);

/// Predictor fitted on the training set (or loaded from the checkpoint).
predictor::PredictorWeights fit_predictor(const ExperimentConfig& config);

/// Seeded user draw for one replicate.
std::vector<User> draw_users(const ExperimentConfig& config, int replicate);
/// Seed used by `draw_users`.
std::uint64_t replicate_seed(const ExperimentConfig& config, int replicate);

/// Scenario for `users` on a raw grid (scaled by illum_scale, stretched over the area).
opt::Scenario make_scenario(const ExperimentConfig& config, const std::vector<User>& users,
                            const illum::IlluminationGrid& raw_grid);

/// One replicate of every configured variant.
std::vector<MetricsRow> run_pipeline(const ExperimentConfig& config, int replicate, PredictorCache& cache);

enum class SweepVar { Users, Height, SeqLen };
SweepVar parse_sweep_var(const std::string& name);
std::string sweep_label(SweepVar var);  // "U", "H" or "T"

/// run_pipeline for every value and replicate; failed runs become flagged rows.
std::vector<MetricsRow> sweep(const ExperimentConfig& config, SweepVar var, const std::vector<double>& values,
                              PredictorCache& cache);

// CSV columns, in order:
// id,variant,sweep_var,sweep_value,replicate,seed,total_power,raw_power,mse,iterations,feasible,status
std::string csv_header();
void write_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
std::vector<MetricsRow> read_csv(std::istream& in);

/// Per sweep value: mean scored power per variant and % reduction of
/// "proposed" against every other variant, to 0.1%.
void write_summary(const std::vector<MetricsRow>& rows, std::ostream& out);
/// (P_base - P_prop) / P_base in percent.
double reduction_percent(double base, double proposed);

/// Writes metrics.csv, summary.txt and timing.csv into `dir`.
void report(const std::vector<MetricsRow>& rows, const std::filesystem::path& dir);

} // namespace vlcuav::harness

#endif // VLCUAV_HARNESS_HPP
