// Seeded generators and fixtures shared by the unit tests.

#ifndef VLCUAV_TESTS_SUPPORT_HPP
#define VLCUAV_TESTS_SUPPORT_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "vlcuav/channel.hpp"
#include "vlcuav/illum.hpp"
#include "vlcuav/optimizer.hpp"

namespace vlcuav::testing {

/// Small seeded generator with the draws the property tests need.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    Vec2<double> point(double w, double h) { return {uniform(0, w), uniform(0, h)}; }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Uniform ambient grid covering an area x area square.
inline illum::IlluminationGrid flat_grid(double level, double area = 80.0, int side = 16) {
    return illum::IlluminationGrid(Eigen::MatrixXd::Constant(side, side, level), area / side);
}

/// Random grid with values in [0, hi].
inline illum::IlluminationGrid random_grid(Gen& g, double hi, double area = 80.0, int side = 16) {
    Eigen::MatrixXd v(side, side);
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = g.uniform(0.0, hi);
    return illum::IlluminationGrid(v, area / side);
}

/// D UAVs, U users uniform on the 80 m square, rates in [0.5, 1.5] Mbps.
inline opt::Scenario random_scenario(Gen& g, int fleet, int users, double ambient_hi = 0.0) {
    opt::Scenario s;
    s.fleet_size = fleet;
    s.grid = ambient_hi > 0 ? random_grid(g, ambient_hi) : flat_grid(0.0);
    for (int j = 0; j < users; ++j) {
        User u;
        u.pos = g.point(80, 80);
        u.rate = g.uniform(0.5, 1.5);
        s.users.push_back(u);
    }
    return s;
}

} // namespace vlcuav::testing

#endif // VLCUAV_TESTS_SUPPORT_HPP
