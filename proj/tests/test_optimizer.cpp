#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "vlcuav/optimizer.hpp"

using namespace vlcuav;
using namespace vlcuav::opt;
using vlcuav::testing::Gen;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double min_separation(const std::vector<UavPose>& poses) {
    double best = INFINITY;
    for (std::size_t i = 0; i < poses.size(); ++i)
        for (std::size_t k = i + 1; k < poses.size(); ++k)
            best = std::min(best, (poses[i].pos - poses[k].pos).squaredNorm());
    return best;
}

std::vector<Point> positions_of(const DeploymentSolution& s) {
    std::vector<Point> out;
    for (const auto& p : s.poses) out.push_back(p.pos);
    return out;
}

} // namespace

TEST_CASE("taylor separation is a global under-estimator, tight at the reference") {
    Gen g(1);
    for (int k = 0; k < 2000; ++k) {
        const auto qi = g.point(80, 80);
        const auto qk = g.point(80, 80);
        const auto ri = g.point(80, 80);
        const auto rk = g.point(80, 80);
        CHECK(taylor_separation(qi, qk, ri, rk) <= (qi - qk).squaredNorm() + 1e-9);
        CHECK(taylor_separation(ri, rk, ri, rk) == doctest::Approx((ri - rk).squaredNorm()).epsilon(1e-12));
    }
}

TEST_CASE("demand coefficients sample the grid at each user") {
    Gen g(2);
    auto s = testing::random_scenario(g, 2, 8, 1e-3);
    const auto c = demand_coefficients(s);
    REQUIRE(c.size() == 8);
    for (int j = 0; j < 8; ++j) {
        const double amb = illum::sample(s.grid, s.users[j].pos.x(), s.users[j].pos.y());
        CHECK(rel(c(j), channel::demand_coefficient(s.users[j], amb, s.params)) < 1e-15);
    }
}

TEST_CASE("power matrix and assigned powers") {
    Gen g(3);
    const auto s = testing::random_scenario(g, 3, 7, 1e-3);
    const auto c = demand_coefficients(s);
    const std::vector<Point> q{g.point(80, 80), g.point(80, 80), g.point(80, 80)};
    const auto pm = power_matrix(s, c, q);
    const double p = channel::path_exponent(s.params);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 7; ++j) {
            const double d = std::sqrt(channel::squared_distance(q[i], s.users[j].pos, s.params.altitude));
            CHECK(rel(pm(i, j), c(j) * std::pow(d, p)) < 1e-12);
        }
    Association a{{0, 0, 1, 1, 0, 1, 0}};
    const auto powers = assigned_powers(s, c, q, a);
    CHECK(powers(2) == 0.0);
    CHECK(powers(0) == std::max({pm(0, 0), pm(0, 1), pm(0, 4), pm(0, 6)}));
    CHECK(powers(1) == std::max({pm(1, 2), pm(1, 3), pm(1, 5)}));
}

TEST_CASE("powers never fall below the optimal-ambient lower bound") {
    Gen g(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = testing::random_scenario(g, 2, 6, 1e-3);
        const auto sol = baseline_center(s);
        for (int j = 0; j < 6; ++j) {
            const int i = sol.association.assign[j];
            const double d = std::sqrt(channel::squared_distance(sol.poses[i].pos, s.users[j].pos, s.params.altitude));
            CHECK(sol.poses[i].power >= channel::power_lower_bound(s.users[j].rate, d, s.params) * (1 - 1e-12));
        }
    }
    // equality when every user sees exactly its optimal ambient level
    auto s = testing::random_scenario(g, 1, 4);
    for (auto& u : s.users) u.rate = 1.0;
    s.grid = testing::flat_grid(channel::optimal_ambient(1.0, s.params));
    const auto sol = baseline_center(s);
    double bound = 0;
    for (const auto& u : s.users) {
        const double d = std::sqrt(channel::squared_distance(sol.poses[0].pos, u.pos, s.params.altitude));
        bound = std::max(bound, channel::power_lower_bound(1.0, d, s.params));
    }
    CHECK(rel(sol.poses[0].power, bound) < 1e-12);
}

TEST_CASE("association solve matches enumeration") {
    Gen g(5);
    Options o;
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = testing::random_scenario(g, 2, 5, 1e-3);
        const std::vector<Point> q{g.point(80, 80), g.point(80, 80)};
        const auto dual = DualState::zeros(2, 5, o.gamma, o.delta);
        const auto got = association_solve(s, q, dual, o);
        const auto best = exhaustive_association(s, q);
        CHECK(rel(got.total_power, best.total_power) <= 1e-6);
        // the reported power is that of the returned association
        const auto powers = assigned_powers(s, demand_coefficients(s), q, got.association);
        CHECK(rel(powers.sum(), got.total_power) < 1e-12);
    }
}

TEST_CASE("exhaustive association enumerates every assignment") {
    Gen g(6);
    const auto s = testing::random_scenario(g, 3, 4, 1e-3);
    const std::vector<Point> q{g.point(80, 80), g.point(80, 80), g.point(80, 80)};
    const auto c = demand_coefficients(s);
    double best = INFINITY;
    for (int code = 0; code < 81; ++code) {
        Association a;
        for (int j = 0, r = code; j < 4; ++j, r /= 3) a.assign.push_back(r % 3);
        best = std::min(best, assigned_powers(s, c, q, a).sum());
    }
    CHECK(rel(exhaustive_association(s, q).total_power, best) < 1e-12);
}

TEST_CASE("SCA objective trace is non-increasing") {
    Gen g(7);
    Options o;
    for (int trial = 0; trial < 10; ++trial) {
        const int fleet = g.integer(2, 3);
        const auto s = testing::random_scenario(g, fleet, 8, 1e-3);
        const auto init = center_layout(s);
        const auto assoc = nearest_association(init, s.users);
        const auto r = sca_placement(s, assoc, init, o);
        REQUIRE(!r.trace.empty());
        for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1] + 1e-12);
        CHECK(min_separation(r.poses) >= s.params.d_min - 1e-9);
    }
}

TEST_CASE("optimize returns feasible, separated deployments no worse than the baselines") {
    Gen g(8);
    Options o;
    for (int trial = 0; trial < 6; ++trial) {
        const int fleet = g.integer(2, 3);
        const auto s = testing::random_scenario(g, fleet, 10, 1e-3);
        const auto sol = optimize(s, o);
        REQUIRE(static_cast<int>(sol.poses.size()) == fleet);
        CHECK(check_feasibility(s, sol).feasible);
        CHECK(min_separation(sol.poses) >= s.params.d_min - 1e-9);
        for (const auto& p : sol.poses) {
            CHECK(p.pos.x() >= 0.0);
            CHECK(p.pos.x() <= 80.0);
            CHECK(p.pos.y() >= 0.0);
            CHECK(p.pos.y() <= 80.0);
        }
        CHECK(sol.total_power <= baseline_center(s).total_power * (1 + 1e-9));
        CHECK(sol.total_power <= baseline_assoc_only(s, o).total_power * (1 + 1e-9));
        CHECK(sol.total_power <= baseline_fixed_association(s, o).total_power * (1 + 1e-9));
        // outer trace settles downward
        for (std::size_t k = 1; k < sol.trace.size(); ++k) CHECK(sol.trace[k] <= sol.trace[k - 1] * (1 + 1e-9));
    }
}

TEST_CASE("optimize is close to the lattice oracle on tiny instances") {
    Gen g(9);
    for (int trial = 0; trial < 3; ++trial) {
        const auto s = testing::random_scenario(g, 2, 3, 1e-3);
        const auto best = exhaustive_oracle(s, 15);
        CHECK(optimize(s).total_power <= best.total_power * 1.015);
        CHECK(check_feasibility(s, best).feasible);
    }
}

TEST_CASE("optimize is deterministic") {
    Gen g(10);
    const auto s = testing::random_scenario(g, 3, 9, 1e-3);
    const auto a = optimize(s);
    const auto b = optimize(s);
    CHECK(a.total_power == b.total_power);
    CHECK(a.association.assign == b.association.assign);
    for (std::size_t i = 0; i < a.poses.size(); ++i) CHECK(a.poses[i].pos == b.poses[i].pos);
}

TEST_CASE("scaling the geometry scales power by s^2") {
    // positions, area and H by s, d_min by s^2: c d^(m+3) with l ~ H^-(m+1) gives s^2
    Gen g(11);
    for (double phi : {90.0, 60.0}) {
        auto s = testing::random_scenario(g, 2, 6, 1e-3);
        s.params.phi_half = phi;
        const double k = 1.7;
        auto big = s;
        big.area *= k;
        big.params.altitude *= k;
        big.params.d_min *= k * k;
        big.grid = testing::flat_grid(0.0, 80 * k);
        big.grid.values = s.grid.values;
        for (auto& u : big.users) u.pos *= k;
        const auto a = baseline_center(s);
        const auto b = baseline_center(big);
        CHECK(rel(b.total_power, k * k * a.total_power) < 1e-10);
        const std::vector<Point> q{g.point(80, 80), g.point(80, 80)};
        const std::vector<Point> qk{q[0] * k, q[1] * k};
        CHECK(rel(exhaustive_association(big, qk).total_power, k * k * exhaustive_association(s, q).total_power) < 1e-10);
    }
}

TEST_CASE("make_solution, top_up and feasibility") {
    Gen g(12);
    const auto s = testing::random_scenario(g, 2, 6, 1e-3);
    const auto q = center_layout(s);
    const auto a = nearest_association(q, s.users);
    const auto sol = make_solution(s, q, a);
    CHECK(check_feasibility(s, sol).feasible);
    double sum = 0;
    for (const auto& p : sol.poses) sum += p.power;
    CHECK(rel(sol.total_power, sum) < 1e-14);

    auto weak = sol;
    weak.poses[0].power *= 0.5;
    const auto report = check_feasibility(s, weak);
    CHECK(!report.feasible);
    CHECK(report.worst_illumination + report.worst_rate > 0.0);

    // a darker scene needs at least as much power at the same layout
    auto dark = s;
    dark.grid = testing::flat_grid(0.0);
    const auto raised = top_up(dark, sol);
    for (std::size_t i = 0; i < sol.poses.size(); ++i) CHECK(raised.poses[i].power >= sol.poses[i].power);
    CHECK(check_feasibility(dark, raised).feasible);

    auto crowded = sol;
    crowded.poses[1].pos = crowded.poses[0].pos;
    CHECK(!check_feasibility(s, crowded).feasible);
}

TEST_CASE("layout helpers") {
    Gen g(13);
    const auto s = testing::random_scenario(g, 3, 12, 1e-3);
    const auto c = center_layout(s);
    REQUIRE(c.size() == 3);
    Point mean = Point::Zero();
    for (const auto& p : c) mean += p;
    CHECK((mean / 3 - Point{40, 40}).norm() < 1e-9);

    const std::vector<Point> two{{10, 10}, {30, 10}};
    const std::vector<User> users{{Point{20, 10}, 1.0}, {Point{0, 0}, 1.0}, {Point{40, 10}, 1.0}};
    CHECK(nearest_association(two, users).assign == std::vector<int>{0, 0, 1});

    const auto picks = seed_users(12, 8, 1);
    CHECK(picks.size() == 8);
    CHECK(std::set<int>(picks.begin(), picks.end()).size() == 8);
    CHECK(seed_users(12, 8, 1) == picks);
    CHECK(seed_users(3, 8, 1).size() == 3);

    const auto seeds = farthest_point_seeds(s, 0);
    REQUIRE(seeds.size() == 3);
    CHECK(seeds[0] == s.users[0].pos);

    std::vector<Point> clumped{{40, 40}, {40, 40}, {41, 40}};
    const auto apart = separate(clumped, 100.0);
    for (std::size_t i = 0; i < apart.size(); ++i)
        for (std::size_t k = i + 1; k < apart.size(); ++k) CHECK((apart[i] - apart[k]).squaredNorm() >= 100.0 - 1e-9);
}

TEST_CASE("scenario validation") {
    Gen g(14);
    auto s = testing::random_scenario(g, 2, 4);
    CHECK_NOTHROW(s.validate());
    auto bad = s;
    bad.users[0].pos = Point{90, 10};
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = s;
    bad.users[1].rate = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.users.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.fleet_size = 50;
    bad.params.d_min = 900;  // spacing 30 m fits 3 x 3 UAVs in 80 m
    CHECK_THROWS_AS(bad.validate(), InfeasibleGeometry);
    Options o;
    o.gamma = -1;
    CHECK_THROWS_AS(o.validate(), ConfigError);
}
