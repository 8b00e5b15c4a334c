// optimizer.hpp
//
// Minimum total transmit power deployment of a VLC UAV fleet: successive
// convex approximation of the UAV separation constraint with a dual
// decomposition inner solver for positions and powers, a dual method for the
// user association, their alternation, a brute-force oracle for tiny
// instances and the comparison baselines.
//
// A user j served by UAV i requires P_i >= c_j d_ij^p, where p = m + 3 and
// c_j is the demand coefficient at the user's ambient level.

#ifndef VLCUAV_OPTIMIZER_HPP
#define VLCUAV_OPTIMIZER_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "vlcuav/channel.hpp"
#include "vlcuav/errors.hpp"
#include "vlcuav/illum.hpp"

namespace vlcuav::opt {

using Point = Vec2<double>;

struct Scenario {
    std::vector<User> users;
    int fleet_size = 1;
    Point area{80.0, 80.0};  // width, height; the area spans [0, w] x [0, h]
    VlcParams params;
    illum::IlluminationGrid grid;

    /// Throws ConfigError / DataError on an inconsistent scenario and
    /// InfeasibleGeometry when the fleet cannot be separated by d_min inside the area.
    void validate() const;
    int user_count() const { return static_cast<int>(users.size()); }
};

struct Association {
    std::vector<int> assign;  // serving UAV per user
};

struct DualState {
    Eigen::MatrixXd lambda_alpha;  // D x U
    Eigen::MatrixXd lambda_beta;   // D x D, upper triangle used
    Eigen::MatrixXd mu;            // D x U, row sums <= 1
    double step_gamma = 0.01;
    double step_delta = 0.01;

    static DualState zeros(int fleet, int users, double gamma, double delta);
};

struct Options {
    double gamma = 0.01;        // placement dual step
    double delta = 0.01;        // association dual step
    double epsilon = 1e-4;      // placement dual residual tolerance
    int dual_cap = 10000;       // inner placement dual steps
    int sca_cap = 200;
    double sca_tol = 1e-6;      // relative objective decrease
    int outer_cap = 50;
    double outer_tol = 1e-6;
    int assoc_cap = 10000;
    int assoc_stable = 0;       // stop after this many unchanged associations (0: run to the cap)
    int starts = 8;             // farthest-point initialisations from distinct seeded users
    bool multi_start = true;    // also start from the centre layout
    int refine_passes = 10;     // single-user reassignment sweeps on the best start (0: off)
    std::uint64_t seed = 1;

    void validate() const;
};

struct DeploymentSolution {
    std::vector<UavPose> poses;
    Association association;
    double total_power = 0.0;
    std::vector<double> trace;  // objective after each outer (or SCA) iteration
    DualState dual;
    bool converged = false;
    int iterations = 0;
};

/// Demand coefficients c_j at each user's ambient level on the scenario grid.
Eigen::VectorXd demand_coefficients(const Scenario& scenario);

/// Linearisation of |q_i - q_k|^2 around the reference points; never exceeds the true value.
double taylor_separation(const Point& qi, const Point& qk, const Point& qi_ref, const Point& qk_ref);

/// Per-UAV powers max_j c_j d_ij^p over its users (0 for UAVs without users).
Eigen::VectorXd assigned_powers(const Scenario& scenario, const Eigen::VectorXd& coeffs,
                                const std::vector<Point>& positions, const Association& association);

/// D x U matrix of c_j d_ij^p.
Eigen::MatrixXd power_matrix(const Scenario& scenario, const Eigen::VectorXd& coeffs,
                             const std::vector<Point>& positions);

struct PlacementResult {
    std::vector<UavPose> poses;
    DualState dual;
    int iterations = 0;
    bool converged = false;
    std::vector<bool> inactive;  // UAVs with no users, frozen at their reference
};

/// One convexified placement problem around `reference`: dual ascent on the
/// linearised separation and the power/distance constraints.
PlacementResult placement_subproblem(const Scenario& scenario, const Association& association,
                                     const std::vector<Point>& reference, DualState dual, const Options& options);

struct ScaResult {
    std::vector<UavPose> poses;
    std::vector<double> trace;  // objective at the start and after each accepted step
    DualState dual;
    int iterations = 0;
    bool converged = false;
};

/// Successive convex approximation for a fixed association.
ScaResult sca_placement(const Scenario& scenario, const Association& association, const std::vector<Point>& initial,
                        const Options& options);

struct AssociationResult {
    Association association;
    Eigen::VectorXd powers;
    double total_power = 0.0;
    DualState dual;
    int iterations = 0;
    bool converged = false;
};

/// Dual method for the user association at fixed positions. The best integral
/// association visited (or `incumbent`, if better) is returned.
AssociationResult association_solve(const Scenario& scenario, const std::vector<Point>& positions, DualState dual,
                                     const Options& options, const std::optional<Association>& incumbent = std::nullopt);

/// Alternating placement and association until the total power settles.
DeploymentSolution optimize(const Scenario& scenario, const Options& options = {});

/// Brute force over a resolution x resolution position lattice covering the
/// area and all associations. Limited to D <= 2, U <= 6, resolution <= 15.
DeploymentSolution exhaustive_oracle(const Scenario& scenario, int resolution = 15);

/// Exact minimum over all D^U associations at fixed positions.
AssociationResult exhaustive_association(const Scenario& scenario, const std::vector<Point>& positions);

/// Symmetric layout about the area centre.
std::vector<Point> center_layout(const Scenario& scenario);
/// Each user to its closest UAV (ties to the lowest index).
Association nearest_association(const std::vector<Point>& positions, const std::vector<User>& users);
/// Farthest-point seeds over user positions, starting from user `first`.
std::vector<Point> farthest_point_seeds(const Scenario& scenario, int first);
/// Distinct starting users for `count` farthest-point initialisations, in seeded order.
std::vector<int> seed_users(int users, int count, std::uint64_t seed);
/// Push pairs closer than sqrt(d_min) apart until every pair is separated.
std::vector<Point> separate(std::vector<Point> positions, double d_min);

DeploymentSolution baseline_center(const Scenario& scenario);
DeploymentSolution baseline_assoc_only(const Scenario& scenario, const Options& options = {});
DeploymentSolution baseline_fixed_association(const Scenario& scenario, const Options& options = {});

/// Assemble a solution (powers recomputed exactly) for positions + association.
DeploymentSolution make_solution(const Scenario& scenario, const std::vector<Point>& positions,
                                 const Association& association);

struct FeasibilityReport {
    bool feasible = true;
    double worst_illumination = 0.0;  // max relative shortfall
    double worst_rate = 0.0;
    double worst_separation = 0.0;    // max (d_min - |q_i - q_k|^2), clipped at 0
};

/// Checks illumination, rate and separation constraints against `scenario`'s grid.
FeasibilityReport check_feasibility(const Scenario& scenario, const DeploymentSolution& solution,
                                    double rel_tol = 1e-6, double sep_tol = 1e-9);

/// Raise each UAV's power to what `scenario` requires for the same positions
/// and association (never lowers a power).
DeploymentSolution top_up(const Scenario& scenario, const DeploymentSolution& solution);

} // namespace vlcuav::opt

#endif // VLCUAV_OPTIMIZER_HPP
