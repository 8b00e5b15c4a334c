#include "vlcuav/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace vlcuav::opt {

namespace {

double sq(double v) { return v * v; }

std::vector<Point> positions_of(const std::vector<UavPose>& poses) {
    std::vector<Point> out;
    out.reserve(poses.size());
    for (const auto& p : poses) out.push_back(p.pos);
    return out;
}

double total_of(const Eigen::VectorXd& powers) { return powers.sum(); }

void check_association(const Association& a, int fleet, int users) {
    if (static_cast<int>(a.assign.size()) != users) throw ShapeError("association length does not match user count");
    for (int i : a.assign)
        if (i < 0 || i >= fleet) throw ShapeError("association refers to a UAV outside the fleet");
}

} // namespace

// ---- scenario ------------------------------------------------------------

void Scenario::validate() const {
    params.validate();
    if (fleet_size < 1) throw ConfigError("scenario: fleet size must be >= 1");
    if (users.empty()) throw ConfigError("scenario: at least one user is required");
    if (!(area.x() > 0 && area.y() > 0)) throw ConfigError("scenario: area sides must be positive");
    grid.validate();
    for (std::size_t j = 0; j < users.size(); ++j) {
        const auto& u = users[j];
        std::ostringstream os;
        if (!(u.rate > 0)) {
            os << "scenario: user " << j << " needs a positive rate";
            throw ConfigError(os.str());
        }
        if (u.pos.x() < 0 || u.pos.x() > area.x() || u.pos.y() < 0 || u.pos.y() > area.y()) {
            os << "scenario: user " << j << " at (" << u.pos.x() << ", " << u.pos.y() << ") lies outside the area";
            throw DataError(os.str());
        }
        if (!grid.contains(u.pos.x(), u.pos.y())) {
            os << "scenario: user " << j << " lies outside the illumination grid";
            throw DataError(os.str());
        }
    }
    if (params.d_min > 0) {
        // square lattice with spacing sqrt(d_min) bounds how many UAVs fit
        const double pitch = std::sqrt(params.d_min);
        const double fit = (std::floor(area.x() / pitch) + 1) * (std::floor(area.y() / pitch) + 1);
        if (fleet_size > fit) {
            std::ostringstream os;
            os << "scenario: " << fleet_size << " UAVs cannot keep squared separation " << params.d_min
               << " m^2 inside a " << area.x() << " x " << area.y() << " m area";
            throw InfeasibleGeometry(os.str());
        }
    }
}

DualState DualState::zeros(int fleet, int users, double gamma, double delta) {
    DualState d;
    d.lambda_alpha = Eigen::MatrixXd::Zero(fleet, users);
    d.lambda_beta = Eigen::MatrixXd::Zero(fleet, fleet);
    d.mu = Eigen::MatrixXd::Zero(fleet, users);
    d.step_gamma = gamma;
    d.step_delta = delta;
    return d;
}

void Options::validate() const {
    if (!(gamma > 0) || !(delta > 0)) throw ConfigError("optimizer: gamma and delta must be positive");
    if (!(epsilon > 0)) throw ConfigError("optimizer: epsilon must be positive");
    if (dual_cap < 1 || sca_cap < 1 || outer_cap < 1 || assoc_cap < 1)
        throw ConfigError("optimizer: iteration caps must be >= 1");
    if (!(sca_tol >= 0) || !(outer_tol >= 0)) throw ConfigError("optimizer: tolerances must be nonnegative");
    if (assoc_stable < 0) throw ConfigError("optimizer: assoc_stable must be nonnegative");
    if (refine_passes < 0) throw ConfigError("optimizer: refine_passes must be nonnegative");
    if (starts < 1) throw ConfigError("optimizer: starts must be >= 1");
}

// ---- building blocks -----------------------------------------------------

Eigen::VectorXd demand_coefficients(const Scenario& scenario) {
    Eigen::VectorXd c(scenario.user_count());
    for (int j = 0; j < scenario.user_count(); ++j) {
        const auto& u = scenario.users[j];
        c(j) = channel::demand_coefficient(u, illum::sample(scenario.grid, u.pos.x(), u.pos.y()), scenario.params);
    }
    return c;
}

double taylor_separation(const Point& qi, const Point& qk, const Point& qi_ref, const Point& qk_ref) {
    const Point dr = qi_ref - qk_ref;
    return -dr.squaredNorm() + 2.0 * dr.dot(qi - qk);
}

Eigen::MatrixXd power_matrix(const Scenario& scenario, const Eigen::VectorXd& coeffs,
                             const std::vector<Point>& positions) {
    const double p = channel::path_exponent(scenario.params);
    const double h2 = sq(scenario.params.altitude);
    Eigen::MatrixXd e(static_cast<Eigen::Index>(positions.size()), scenario.user_count());
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (int j = 0; j < scenario.user_count(); ++j)
            e(static_cast<Eigen::Index>(i), j) =
                coeffs(j) * std::pow((positions[i] - scenario.users[j].pos).squaredNorm() + h2, 0.5 * p);
    return e;
}

Eigen::VectorXd assigned_powers(const Scenario& scenario, const Eigen::VectorXd& coeffs,
                                const std::vector<Point>& positions, const Association& association) {
    check_association(association, static_cast<int>(positions.size()), scenario.user_count());
    const double p = channel::path_exponent(scenario.params);
    const double h2 = sq(scenario.params.altitude);
    Eigen::VectorXd power = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(positions.size()));
    for (int j = 0; j < scenario.user_count(); ++j) {
        const int i = association.assign[j];
        const double need = coeffs(j) * std::pow((positions[i] - scenario.users[j].pos).squaredNorm() + h2, 0.5 * p);
        power(i) = std::max(power(i), need);
    }
    return power;
}

DeploymentSolution make_solution(const Scenario& scenario, const std::vector<Point>& positions,
                                 const Association& association) {
    const Eigen::VectorXd power = assigned_powers(scenario, demand_coefficients(scenario), positions, association);
    DeploymentSolution s;
    for (std::size_t i = 0; i < positions.size(); ++i) s.poses.push_back({positions[i], power(static_cast<Eigen::Index>(i))});
    s.association = association;
    s.total_power = total_of(power);
    s.trace = {s.total_power};
    s.dual = DualState::zeros(static_cast<int>(positions.size()), scenario.user_count(), 0.01, 0.01);
    s.converged = true;
    return s;
}

std::vector<Point> separate(std::vector<Point> positions, double d_min) {
    if (!(d_min > 0) || positions.size() < 2) return positions;
    const double target = std::sqrt(d_min) * (1.0 + 1e-9);
    const std::size_t n = positions.size();
    for (int pass = 0; pass < 1000; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = i + 1; k < n; ++k) {
                Point diff = positions[i] - positions[k];
                const double dist = diff.norm();
                if (dist * dist >= d_min) continue;
                if (dist < 1e-12) {
                    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i * n + k) / static_cast<double>(n * n);
                    diff = Point(std::cos(angle), std::sin(angle));
                } else {
                    diff /= dist;
                }
                const double push = 0.5 * (target - dist);
                positions[i] += push * diff;
                positions[k] -= push * diff;
                moved = true;
            }
        }
        if (!moved) return positions;
    }
    throw NumericalError("separate: could not separate the UAV positions");
}

std::vector<Point> center_layout(const Scenario& scenario) {
    const Point c = 0.5 * scenario.area;
    const int d = scenario.fleet_size;
    std::vector<Point> out;
    if (d == 1) {
        out.push_back(c);
    } else {
        const double r = std::sqrt(2.0) * std::min(scenario.area.x(), scenario.area.y()) / 4.0;
        for (int k = 0; k < d; ++k) {
            const double angle = std::numbers::pi / 4.0 + 2.0 * std::numbers::pi * k / d;
            out.push_back(c + r * Point(std::cos(angle), std::sin(angle)));
        }
    }
    return separate(std::move(out), scenario.params.d_min);
}

Association nearest_association(const std::vector<Point>& positions, const std::vector<User>& users) {
    Association a;
    a.assign.reserve(users.size());
    for (const auto& u : users) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < positions.size(); ++i) {
            const double d = (positions[i] - u.pos).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        a.assign.push_back(best);
    }
    return a;
}

std::vector<int> seed_users(int users, int count, std::uint64_t seed) {
    std::vector<int> order(static_cast<std::size_t>(users));
    for (int j = 0; j < users; ++j) order[j] = j;
    std::mt19937_64 rng(seed);
    for (int j = users - 1; j > 0; --j) std::swap(order[j], order[rng() % static_cast<std::uint64_t>(j + 1)]);
    order.resize(static_cast<std::size_t>(std::clamp(count, 1, users)));
    return order;
}

std::vector<Point> farthest_point_seeds(const Scenario& scenario, int first) {
    const int n = scenario.user_count();
    if (first < 0 || first >= n) throw ConfigError("farthest_point_seeds: starting user out of range");
    std::vector<Point> out{scenario.users[first].pos};
    Eigen::VectorXd nearest(n);
    for (int j = 0; j < n; ++j) nearest(j) = (scenario.users[j].pos - out.front()).squaredNorm();
    while (static_cast<int>(out.size()) < scenario.fleet_size && static_cast<int>(out.size()) < n) {
        Eigen::Index far = 0;
        nearest.maxCoeff(&far);
        out.push_back(scenario.users[far].pos);
        for (int j = 0; j < n; ++j) nearest(j) = std::min(nearest(j), (scenario.users[j].pos - out.back()).squaredNorm());
    }
    // more UAVs than users: fill from the centre layout
    const auto fill = center_layout(scenario);
    for (std::size_t k = out.size(); k < static_cast<std::size_t>(scenario.fleet_size); ++k) out.push_back(fill[k]);
    return separate(std::move(out), scenario.params.d_min);
}

// ---- placement -----------------------------------------------------------

PlacementResult placement_subproblem(const Scenario& scenario, const Association& association,
                                     const std::vector<Point>& reference, DualState dual, const Options& options) {
    const int D = scenario.fleet_size;
    const int U = scenario.user_count();
    if (static_cast<int>(reference.size()) != D) throw ShapeError("placement_subproblem: reference count != fleet size");
    check_association(association, D, U);
    if (dual.lambda_alpha.rows() != D || dual.lambda_alpha.cols() != U || dual.lambda_beta.rows() != D ||
        dual.lambda_beta.cols() != D)
        dual = DualState::zeros(D, U, options.gamma, options.delta);
    if (dual.mu.rows() != D || dual.mu.cols() != U) dual.mu = Eigen::MatrixXd::Zero(D, U);
    dual.step_gamma = options.gamma;

    const VlcParams& prm = scenario.params;
    const double p = channel::path_exponent(prm);
    const double h2 = sq(prm.altitude);
    const Eigen::VectorXd c = demand_coefficients(scenario);

    // Normalised units: powers in multiples of s = max_j c_j H^p, so that every
    // constraint is O(1) and a single step size suits all scenarios.
    const double s = c.maxCoeff() * std::pow(prm.altitude, p);
    const Eigen::VectorXd alpha = (c / s).array().pow(2.0 / p).matrix();
    const double alpha_bar = alpha.mean();
    const double gamma = options.gamma;

    PlacementResult res;
    res.inactive.assign(static_cast<std::size_t>(D), true);
    for (int j = 0; j < U; ++j) res.inactive[association.assign[j]] = false;

    Eigen::VectorXd lambda(U);
    for (int j = 0; j < U; ++j) lambda(j) = std::max(dual.lambda_alpha(association.assign[j], j), 0.0);
    Eigen::MatrixXd beta = dual.lambda_beta.cwiseMax(0.0);

    std::vector<Point> q = reference;
    Eigen::VectorXd weight(D);
    Eigen::VectorXd pi(D);
    std::vector<Point> num(static_cast<std::size_t>(D));
    int it = 0;
    for (; it < options.dual_cap; ++it) {
        weight.setZero();
        Eigen::VectorXd lam_sum = Eigen::VectorXd::Zero(D);
        for (auto& v : num) v.setZero();
        for (int j = 0; j < U; ++j) {
            const int i = association.assign[j];
            lam_sum(i) += lambda(j);
            weight(i) += lambda(j) * alpha(j);
            num[i] += lambda(j) * alpha(j) * scenario.users[j].pos;
        }
        for (int i = 0; i < D; ++i) pi(i) = std::pow((2.0 / p) * lam_sum(i), p / (p - 2.0));
        for (int i = 0; i < D; ++i)
            for (int k = i + 1; k < D; ++k) {
                const Point dr = reference[i] - reference[k];
                num[i] += beta(i, k) * alpha_bar * dr;
                num[k] -= beta(i, k) * alpha_bar * dr;
            }
        for (int i = 0; i < D; ++i) q[i] = (weight(i) > 0 && !res.inactive[i]) ? Point(num[i] / weight(i)) : reference[i];

        double step = 0.0;
        for (int j = 0; j < U; ++j) {
            const int i = association.assign[j];
            const double d2 = (q[i] - scenario.users[j].pos).squaredNorm() + h2;
            const double next = std::max(lambda(j) + gamma * (alpha(j) * d2 - std::pow(pi(i), 2.0 / p)), 0.0);
            step = std::max(step, std::abs(next - lambda(j)));
            lambda(j) = next;
        }
        for (int i = 0; i < D; ++i)
            for (int k = i + 1; k < D; ++k) {
                const double g = taylor_separation(q[i], q[k], reference[i], reference[k]);
                const double next = std::max(beta(i, k) + gamma * alpha_bar * (prm.d_min - g), 0.0);
                step = std::max(step, std::abs(next - beta(i, k)));
                beta(i, k) = next;
            }
        for (const auto& v : q)
            if (!v.allFinite()) throw NumericalError("placement_subproblem: non-finite iterate");
        if (it > 0 && step / gamma < options.epsilon) {
            res.converged = true;
            ++it;
            break;
        }
    }
    res.iterations = it;

    dual.lambda_alpha.setZero();
    for (int j = 0; j < U; ++j) dual.lambda_alpha(association.assign[j], j) = lambda(j);
    dual.lambda_beta = beta;
    res.dual = std::move(dual);

    const Eigen::VectorXd power = assigned_powers(scenario, c, q, association);
    for (int i = 0; i < D; ++i) res.poses.push_back({q[i], power(i)});
    return res;
}

ScaResult sca_placement(const Scenario& scenario, const Association& association, const std::vector<Point>& initial,
                        const Options& options) {
    options.validate();
    const int D = scenario.fleet_size;
    if (static_cast<int>(initial.size()) != D) throw ShapeError("sca_placement: initial pose count != fleet size");
    const Eigen::VectorXd c = demand_coefficients(scenario);

    ScaResult res;
    std::vector<Point> q = separate(initial, scenario.params.d_min);
    double f = total_of(assigned_powers(scenario, c, q, association));
    res.trace.push_back(f);
    res.dual = DualState::zeros(D, scenario.user_count(), options.gamma, options.delta);
    int r = 0;
    for (; r < options.sca_cap; ++r) {
        PlacementResult sub = placement_subproblem(scenario, association, q, res.dual, options);
        std::vector<Point> next = separate(positions_of(sub.poses), scenario.params.d_min);
        const double fn = total_of(assigned_powers(scenario, c, next, association));
        if (!(fn <= f)) {
            // the convexified step did not improve the true objective: q is a fixed point
            res.converged = true;
            ++r;
            break;
        }
        const bool settled = f - fn <= options.sca_tol * f;
        q = std::move(next);
        f = fn;
        res.trace.push_back(f);
        res.dual = std::move(sub.dual);
        if (settled) {
            res.converged = true;
            ++r;
            break;
        }
    }
    res.iterations = r;
    const Eigen::VectorXd power = assigned_powers(scenario, c, q, association);
    for (int i = 0; i < D; ++i) res.poses.push_back({q[i], power(i)});
    return res;
}

// ---- association ---------------------------------------------------------

AssociationResult association_solve(const Scenario& scenario, const std::vector<Point>& positions, DualState dual,
                                     const Options& options, const std::optional<Association>& incumbent) {
    options.validate();
    const int D = static_cast<int>(positions.size());
    const int U = scenario.user_count();
    if (D != scenario.fleet_size) throw ShapeError("association_solve: position count != fleet size");
    if (dual.mu.rows() != D || dual.mu.cols() != U) dual.mu = Eigen::MatrixXd::Zero(D, U);
    dual.step_delta = options.delta;

    const Eigen::MatrixXd e = power_matrix(scenario, demand_coefficients(scenario), positions);
    const double scale = e.maxCoeff();

    AssociationResult res;
    res.total_power = std::numeric_limits<double>::infinity();
    if (incumbent) {
        check_association(*incumbent, D, U);
        res.association = *incumbent;
        res.powers = Eigen::VectorXd::Zero(D);
        for (int j = 0; j < U; ++j) res.powers(incumbent->assign[j]) = std::max(res.powers(incumbent->assign[j]), e(incumbent->assign[j], j));
        res.total_power = res.powers.sum();
    }

    Eigen::MatrixXd& mu = dual.mu;
    std::vector<int> assign(static_cast<std::size_t>(U));
    std::vector<int> previous;
    Eigen::VectorXd power(D);
    int unchanged = 0;
    int t = 0;
    res.converged = options.assoc_stable == 0;
    for (; t < options.assoc_cap; ++t) {
        for (int j = 0; j < U; ++j) {
            int best = 0;
            double best_v = mu(0, j) * e(0, j);
            for (int i = 1; i < D; ++i) {
                const double v = mu(i, j) * e(i, j);
                if (v < best_v) {
                    best_v = v;
                    best = i;
                }
            }
            assign[j] = best;
        }
        power.setZero();
        for (int j = 0; j < U; ++j) power(assign[j]) = std::max(power(assign[j]), e(assign[j], j));
        const double total = power.sum();
        if (total < res.total_power) {
            res.total_power = total;
            res.association.assign = assign;
            res.powers = power;
        }
        if (assign == previous) {
            ++unchanged;
        } else {
            unchanged = 0;
            previous = assign;
        }
        if (options.assoc_stable > 0 && unchanged >= options.assoc_stable) {
            res.converged = true;
            ++t;
            break;
        }
        // Dual gradient of the Lagrangian: a UAV's power term enters only
        // once its multiplier row is saturated.
        for (int i = 0; i < D; ++i) {
            const double rowsum = mu.row(i).sum();
            const double active_power = rowsum >= 1.0 - 1e-12 ? power(i) : 0.0;
            for (int j = 0; j < U; ++j) {
                const double served = assign[j] == i ? e(i, j) : 0.0;
                mu(i, j) = std::max(mu(i, j) + options.delta * (served - active_power) / scale, 0.0);
            }
            const double after = mu.row(i).sum();
            if (after > 1.0) mu.row(i) /= after;
        }
    }
    res.iterations = t;
    res.dual = std::move(dual);
    return res;
}

AssociationResult exhaustive_association(const Scenario& scenario, const std::vector<Point>& positions) {
    const int D = static_cast<int>(positions.size());
    const int U = scenario.user_count();
    if (std::pow(static_cast<double>(D), U) > 2e7) throw ConfigError("exhaustive_association: too many associations");
    const Eigen::MatrixXd e = power_matrix(scenario, demand_coefficients(scenario), positions);
    AssociationResult res;
    res.total_power = std::numeric_limits<double>::infinity();
    std::vector<int> assign(static_cast<std::size_t>(U), 0);
    Eigen::VectorXd power(D);
    while (true) {
        power.setZero();
        for (int j = 0; j < U; ++j) power(assign[j]) = std::max(power(assign[j]), e(assign[j], j));
        if (power.sum() < res.total_power) {
            res.total_power = power.sum();
            res.association.assign = assign;
            res.powers = power;
        }
        int j = 0;
        while (j < U && ++assign[j] == D) assign[j++] = 0;
        if (j == U) break;
    }
    res.dual = DualState::zeros(D, U, 0.01, 0.01);
    res.converged = true;
    return res;
}

// ---- full algorithm ------------------------------------------------------

namespace {

struct Run {
    std::vector<Point> q;
    Association a;
    double f = 0;
    std::vector<double> trace;
    DualState dual;
    bool converged = false;
    int iterations = 0;
};

Run alternate(const Scenario& scenario, std::vector<Point> q, Association a, const Options& options) {
    const Eigen::VectorXd c = demand_coefficients(scenario);
    Run run;
    q = separate(std::move(q), scenario.params.d_min);
    run.f = total_of(assigned_powers(scenario, c, q, a));
    run.trace.push_back(run.f);
    run.dual = DualState::zeros(scenario.fleet_size, scenario.user_count(), options.gamma, options.delta);
    int outer = 0;
    for (; outer < options.outer_cap; ++outer) {
        ScaResult sca = sca_placement(scenario, a, q, options);
        q = positions_of(sca.poses);
        double f = sca.trace.back();
        AssociationResult as = association_solve(scenario, q, run.dual, options, a);
        if (as.total_power < f) {
            a = as.association;
            f = as.total_power;
        }
        run.dual.lambda_alpha = sca.dual.lambda_alpha;
        run.dual.lambda_beta = sca.dual.lambda_beta;
        run.dual.mu = as.dual.mu;
        const bool settled = run.f - f <= options.outer_tol * run.f;
        run.f = std::min(run.f, f);
        run.trace.push_back(run.f);
        if (settled) {
            run.converged = true;
            ++outer;
            break;
        }
    }
    run.iterations = outer;
    run.q = std::move(q);
    run.a = std::move(a);
    return run;
}

// First-improvement search over single-user reassignments, each followed by
// a placement solve for the new association.
void reassign_search(const Scenario& scenario, Run& run, const Options& options) {
    const int D = scenario.fleet_size;
    const int U = scenario.user_count();
    for (int pass = 0; pass < options.refine_passes; ++pass) {
        bool improved = false;
        for (int j = 0; j < U; ++j) {
            for (int i = 0; i < D; ++i) {
                if (i == run.a.assign[j]) continue;
                Association trial = run.a;
                trial.assign[j] = i;
                ScaResult sca = sca_placement(scenario, trial, run.q, options);
                if (sca.trace.back() < run.f * (1.0 - 1e-9)) {
                    run.a = std::move(trial);
                    run.q = positions_of(sca.poses);
                    run.f = sca.trace.back();
                    run.trace.push_back(run.f);
                    improved = true;
                }
            }
        }
        if (!improved) break;
    }
}

} // namespace

DeploymentSolution optimize(const Scenario& scenario, const Options& options) {
    scenario.validate();
    options.validate();

    std::vector<Run> runs;
    for (int first : seed_users(scenario.user_count(), options.starts, options.seed)) {
        auto seeds = farthest_point_seeds(scenario, first);
        auto a = nearest_association(seeds, scenario.users);
        runs.push_back(alternate(scenario, std::move(seeds), std::move(a), options));
    }
    if (options.multi_start) {
        const auto centre = center_layout(scenario);
        const auto near = nearest_association(centre, scenario.users);
        runs.push_back(alternate(scenario, centre, near, options));
        const auto dual = DualState::zeros(scenario.fleet_size, scenario.user_count(), options.gamma, options.delta);
        const AssociationResult as = association_solve(scenario, centre, dual, options, near);
        runs.push_back(alternate(scenario, centre, as.association, options));
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k)
        if (runs[k].f < runs[best].f) best = k;

    Run& r = runs[best];
    reassign_search(scenario, r, options);
    DeploymentSolution s = make_solution(scenario, r.q, r.a);
    s.trace = std::move(r.trace);
    s.dual = std::move(r.dual);
    s.converged = r.converged;
    s.iterations = r.iterations;
    return s;
}

DeploymentSolution exhaustive_oracle(const Scenario& scenario, int resolution) {
    scenario.validate();
    const int D = scenario.fleet_size;
    const int U = scenario.user_count();
    if (D > 2 || U > 6 || resolution < 1 || resolution > 15) {
        std::ostringstream os;
        os << "exhaustive_oracle: instance too large (D=" << D << ", U=" << U << ", resolution=" << resolution
           << "; limits D<=2, U<=6, resolution<=15)";
        throw ConfigError(os.str());
    }
    std::vector<Point> lattice;
    for (int a = 0; a < resolution; ++a)
        for (int b = 0; b < resolution; ++b) {
            const double fx = resolution == 1 ? 0.5 : static_cast<double>(a) / (resolution - 1);
            const double fy = resolution == 1 ? 0.5 : static_cast<double>(b) / (resolution - 1);
            lattice.emplace_back(fx * scenario.area.x(), fy * scenario.area.y());
        }
    const Eigen::MatrixXd e = power_matrix(scenario, demand_coefficients(scenario), lattice);
    const int n = static_cast<int>(lattice.size());

    double best = std::numeric_limits<double>::infinity();
    std::vector<Point> best_q;
    Association best_a;
    if (D == 1) {
        for (int a = 0; a < n; ++a) {
            const double v = e.row(a).maxCoeff();
            if (v < best) {
                best = v;
                best_q = {lattice[a]};
            }
        }
        best_a.assign.assign(static_cast<std::size_t>(U), 0);
    } else {
        const int masks = 1 << U;
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                if ((lattice[a] - lattice[b]).squaredNorm() < scenario.params.d_min) continue;
                for (int m = 0; m < masks; ++m) {
                    double pa = 0.0;
                    double pb = 0.0;
                    for (int j = 0; j < U; ++j) {
                        if (m >> j & 1)
                            pb = std::max(pb, e(b, j));
                        else
                            pa = std::max(pa, e(a, j));
                    }
                    if (pa + pb < best) {
                        best = pa + pb;
                        best_q = {lattice[a], lattice[b]};
                        best_a.assign.clear();
                        for (int j = 0; j < U; ++j) best_a.assign.push_back(m >> j & 1);
                    }
                }
            }
        }
        if (best_q.empty()) throw InfeasibleGeometry("exhaustive_oracle: no lattice pair satisfies the separation");
    }
    return make_solution(scenario, best_q, best_a);
}

// ---- baselines -----------------------------------------------------------

DeploymentSolution baseline_center(const Scenario& scenario) {
    scenario.validate();
    const auto q = center_layout(scenario);
    return make_solution(scenario, q, nearest_association(q, scenario.users));
}

DeploymentSolution baseline_assoc_only(const Scenario& scenario, const Options& options) {
    scenario.validate();
    const auto q = center_layout(scenario);
    const auto dual = DualState::zeros(scenario.fleet_size, scenario.user_count(), options.gamma, options.delta);
    const AssociationResult as =
        association_solve(scenario, q, dual, options, nearest_association(q, scenario.users));
    DeploymentSolution s = make_solution(scenario, q, as.association);
    s.dual = as.dual;
    s.converged = as.converged;
    s.iterations = as.iterations;
    return s;
}

DeploymentSolution baseline_fixed_association(const Scenario& scenario, const Options& options) {
    scenario.validate();
    const auto q0 = center_layout(scenario);
    const Association a = nearest_association(q0, scenario.users);
    ScaResult sca = sca_placement(scenario, a, q0, options);
    DeploymentSolution s = make_solution(scenario, positions_of(sca.poses), a);
    s.trace = std::move(sca.trace);
    s.dual = std::move(sca.dual);
    s.converged = sca.converged;
    s.iterations = sca.iterations;
    return s;
}

// ---- validation ----------------------------------------------------------

FeasibilityReport check_feasibility(const Scenario& scenario, const DeploymentSolution& solution, double rel_tol,
                                    double sep_tol) {
    const VlcParams& prm = scenario.params;
    const int D = static_cast<int>(solution.poses.size());
    check_association(solution.association, D, scenario.user_count());
    const double b_bar = channel::homogeneous_los_probability(prm);
    FeasibilityReport rep;
    for (int j = 0; j < scenario.user_count(); ++j) {
        const auto& u = scenario.users[j];
        const auto& pose = solution.poses[solution.association.assign[j]];
        const double ambient = illum::sample(scenario.grid, u.pos.x(), u.pos.y());
        const double gain = b_bar * channel::los_gain(pose.pos, u.pos, prm);
        const double demand = channel::illumination_branch(ambient, prm);
        if (demand > 0) {
            const double shortfall = (demand - prm.xi * pose.power * gain) / demand;
            rep.worst_illumination = std::max(rep.worst_illumination, shortfall);
        }
        const double cap = channel::capacity(pose.power, gain, ambient, prm);
        rep.worst_rate = std::max(rep.worst_rate, (u.rate - cap) / u.rate);
    }
    for (int i = 0; i < D; ++i)
        for (int k = i + 1; k < D; ++k)
            rep.worst_separation = std::max(rep.worst_separation,
                                            prm.d_min - (solution.poses[i].pos - solution.poses[k].pos).squaredNorm());
    rep.feasible = rep.worst_illumination <= rel_tol && rep.worst_rate <= rel_tol && rep.worst_separation <= sep_tol;
    return rep;
}

DeploymentSolution top_up(const Scenario& scenario, const DeploymentSolution& solution) {
    const auto q = positions_of(solution.poses);
    const Eigen::VectorXd need = assigned_powers(scenario, demand_coefficients(scenario), q, solution.association);
    DeploymentSolution s = solution;
    s.total_power = 0.0;
    for (std::size_t i = 0; i < s.poses.size(); ++i) {
        s.poses[i].power = std::max(s.poses[i].power, need(static_cast<Eigen::Index>(i)));
        s.total_power += s.poses[i].power;
    }
    return s;
}

} // namespace vlcuav::opt
