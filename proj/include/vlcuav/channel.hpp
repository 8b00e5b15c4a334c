// channel.hpp
//
// Closed-form line-of-sight VLC link model between a hovering UAV and a
// ground user: Lambertian emission, optical concentrator gain, elevation
// dependent LoS probability, Gaussian-noise capacity and the transmit power
// needed to meet a rate or an illumination demand.
//
// Everything here is a pure function templated on the scalar type, so the
// same expressions can be evaluated in double or long double.

#ifndef VLCUAV_CHANNEL_HPP
#define VLCUAV_CHANNEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "vlcuav/errors.hpp"

namespace vlcuav {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Physical and channel constants. Angles are in degrees; `d_min` is a
/// threshold on the squared UAV-UAV distance (m^2).
template <typename Scalar>
struct BasicVlcParams {
    Scalar phi_half = 90;     // transmitter semiangle at half power
    Scalar psi_c = 90;        // receiver FOV semiangle
    Scalar rho = 0.5;         // detector area, m^2
    Scalar xi = 0.8;          // illumination target, A/W
    Scalar n_e = 1.5;         // concentrator refractive index
    Scalar n_w = 1e-10;       // noise standard deviation
    Scalar env_x = 10;        // LoS model parameter X
    Scalar env_y = 0.6;       // LoS model parameter Y
    Scalar eta_r = 5e-4;      // illumination demand
    Scalar altitude = 20;     // H, m
    Scalar d_min = 100;       // m^2
    std::optional<Scalar> b_bar;  // homogeneous LoS probability; unset = value at 90 deg elevation

    void validate() const {
        auto fail = [](const char* what) { throw ConfigError(std::string("VlcParams: ") + what); };
        if (!(phi_half > 0 && phi_half <= 90)) fail("phi_half must lie in (0, 90]");
        if (!(psi_c > 0 && psi_c <= 90)) fail("psi_c must lie in (0, 90]");
        if (!(rho > 0)) fail("rho must be positive");
        if (!(xi > 0)) fail("xi must be positive");
        if (!(n_e >= 1)) fail("n_e must be >= 1");
        if (!(n_w > 0)) fail("n_w must be positive");
        if (!(eta_r >= 0)) fail("eta_r must be nonnegative");
        if (!(altitude > 0)) fail("altitude must be positive");
        if (!(d_min >= 0)) fail("d_min must be nonnegative");
        if (b_bar && !(*b_bar > 0 && *b_bar <= 1)) fail("b_bar must lie in (0, 1]");
    }
};

using VlcParams = BasicVlcParams<double>;

/// Ground user at (v, w) with rate demand in Mbps.
template <typename Scalar>
struct BasicUser {
    Vec2<Scalar> pos = Vec2<Scalar>::Zero();
    Scalar rate = 1;
};

/// UAV horizontal position and transmit power; the altitude is the common
/// `BasicVlcParams::altitude`.
template <typename Scalar>
struct BasicUavPose {
    Vec2<Scalar> pos = Vec2<Scalar>::Zero();
    Scalar power = 0;
};

using User = BasicUser<double>;
using UavPose = BasicUavPose<double>;

namespace channel {

template <typename Scalar>
inline Scalar deg_to_rad(Scalar deg) {
    return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
inline Scalar rad_to_deg(Scalar rad) {
    return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

/// Lambert order m = -ln 2 / ln cos(phi_half). At 90 degrees the cosine is
/// zero and the order takes its limit value 0.
template <typename Scalar>
Scalar lambert_order(Scalar phi_half) {
    if (!(phi_half > 0 && phi_half <= 90)) {
        std::ostringstream os;
        os << "lambert_order: semiangle " << phi_half << " deg outside (0, 90]";
        throw DomainError(os.str());
    }
    if (phi_half == Scalar(90)) return Scalar(0);
    return -std::log(Scalar(2)) / std::log(std::cos(deg_to_rad(phi_half)));
}

/// Optical concentrator gain g(psi).
template <typename Scalar>
Scalar concentrator_gain(Scalar psi, const BasicVlcParams<Scalar>& params) {
    if (psi < 0 || psi > params.psi_c) return Scalar(0);
    const Scalar s = std::sin(deg_to_rad(params.psi_c));
    return params.n_e * params.n_e / (s * s);
}

template <typename Scalar>
Scalar squared_distance(const Vec2<Scalar>& uav, const Vec2<Scalar>& user, Scalar altitude) {
    return (uav - user).squaredNorm() + altitude * altitude;
}

/// Incidence angle (= irradiance angle) in degrees.
template <typename Scalar>
Scalar incidence_angle(const Vec2<Scalar>& uav, const Vec2<Scalar>& user, Scalar altitude) {
    const Scalar d = std::sqrt(squared_distance(uav, user, altitude));
    return rad_to_deg(std::acos(std::clamp(altitude / d, Scalar(0), Scalar(1))));
}

/// Deterministic LoS gain. Zero outside the receiver FOV; the NLoS gain is
/// identically zero so it never appears.
template <typename Scalar>
Scalar los_gain(const Vec2<Scalar>& uav, const Vec2<Scalar>& user, const BasicVlcParams<Scalar>& params) {
    const Scalar d2 = squared_distance(uav, user, params.altitude);
    const Scalar d = std::sqrt(d2);
    const Scalar cos_angle = params.altitude / d;
    const Scalar g = concentrator_gain(incidence_angle(uav, user, params.altitude), params);
    if (g == Scalar(0)) return Scalar(0);
    const Scalar m = lambert_order(params.phi_half);
    return (m + 1) * params.rho / (2 * std::numbers::pi_v<Scalar> * d2) * g * std::pow(cos_angle, m) * cos_angle;
}

/// Probability of an unobstructed link; the elevation angle enters in degrees.
template <typename Scalar>
Scalar los_probability(const Vec2<Scalar>& uav, const Vec2<Scalar>& user, const BasicVlcParams<Scalar>& params) {
    const Scalar d = std::sqrt(squared_distance(uav, user, params.altitude));
    const Scalar tau = rad_to_deg(std::asin(std::clamp(params.altitude / d, Scalar(-1), Scalar(1))));
    return Scalar(1) / (Scalar(1) + params.env_x * std::exp(-params.env_y * (tau - params.env_x)));
}

/// Homogeneous LoS probability used by the optimizer: the configured value,
/// or the LoS probability at 90 degrees elevation.
template <typename Scalar>
Scalar homogeneous_los_probability(const BasicVlcParams<Scalar>& params) {
    if (params.b_bar) return *params.b_bar;
    return Scalar(1) / (Scalar(1) + params.env_x * std::exp(-params.env_y * (Scalar(90) - params.env_x)));
}

/// Expected gain B(h_LoS) * h_LoS of the probabilistic LoS/NLoS channel.
template <typename Scalar>
Scalar average_gain(const Vec2<Scalar>& uav, const Vec2<Scalar>& user, const BasicVlcParams<Scalar>& params) {
    return los_probability(uav, user, params) * los_gain(uav, user, params);
}

/// Gain with the homogeneous LoS probability folded in; the optimizer's model.
template <typename Scalar>
Scalar homogeneous_gain(const Vec2<Scalar>& uav, const Vec2<Scalar>& user, const BasicVlcParams<Scalar>& params) {
    return homogeneous_los_probability(params) * los_gain(uav, user, params);
}

/// sqrt((2 pi / e)(2^(2R) - 1)): the SNR amplitude needed for rate R.
template <typename Scalar>
Scalar rate_factor(Scalar rate) {
    using std::numbers::e_v;
    using std::numbers::pi_v;
    const Scalar grow = std::expm1(Scalar(2) * rate * std::numbers::ln2_v<Scalar>);
    return std::sqrt(Scalar(2) * pi_v<Scalar> / e_v<Scalar> * grow);
}

/// Capacity (Mbps) for transmit power `power` over a link of gain `gain`
/// with ambient illumination `ambient` acting as interference.
template <typename Scalar>
Scalar capacity(Scalar power, Scalar gain, Scalar ambient, const BasicVlcParams<Scalar>& params) {
    using std::numbers::e_v;
    using std::numbers::pi_v;
    const Scalar amplitude = params.xi * power * gain / (params.n_w + ambient);
    const Scalar snr = e_v<Scalar> / (Scalar(2) * pi_v<Scalar>) * amplitude * amplitude;
    return Scalar(0.5) * std::log1p(snr) / std::numbers::ln2_v<Scalar>;
}

/// Power at which `capacity` over the homogeneous gain equals the user's rate.
template <typename Scalar>
Scalar required_power(const BasicUser<Scalar>& user, const Vec2<Scalar>& uav, Scalar ambient,
                      const BasicVlcParams<Scalar>& params) {
    const Scalar h = los_gain(uav, user.pos, params);
    if (!(h > 0)) throw InfeasibleGeometry("required_power: user outside the receiver field of view");
    return (params.n_w + ambient) * rate_factor(user.rate) / (params.xi * homogeneous_los_probability(params) * h);
}

/// Power at which UAV light tops the ambient level up to eta_r.
template <typename Scalar>
Scalar illumination_power(const BasicUser<Scalar>& user, const Vec2<Scalar>& uav, Scalar ambient,
                          const BasicVlcParams<Scalar>& params) {
    const Scalar deficit = std::max(params.eta_r - ambient, Scalar(0));
    if (deficit == Scalar(0)) return Scalar(0);
    const Scalar h = los_gain(uav, user.pos, params);
    if (!(h > 0)) throw InfeasibleGeometry("illumination_power: user outside the receiver field of view");
    return deficit / (params.xi * homogeneous_los_probability(params) * h);
}

/// Path exponent m + 3 of the required power in the UAV-user distance.
template <typename Scalar>
Scalar path_exponent(const BasicVlcParams<Scalar>& params) {
    return lambert_order(params.phi_half) + Scalar(3);
}

/// l = 2 pi / (xi Bbar (m+1) rho g H^(m+1)), with g taken inside the FOV.
template <typename Scalar>
Scalar path_coefficient(const BasicVlcParams<Scalar>& params) {
    const Scalar m = lambert_order(params.phi_half);
    const Scalar g = concentrator_gain(Scalar(0), params);
    return Scalar(2) * std::numbers::pi_v<Scalar> /
           (params.xi * homogeneous_los_probability(params) * (m + 1) * params.rho * g *
            std::pow(params.altitude, m + 1));
}

/// Illumination branch M = max(eta_r - I, 0).
template <typename Scalar>
Scalar illumination_branch(Scalar ambient, const BasicVlcParams<Scalar>& params) {
    return std::max(params.eta_r - ambient, Scalar(0));
}

/// Rate branch N = (n_w + I) * rate_factor(R).
template <typename Scalar>
Scalar rate_branch(Scalar rate, Scalar ambient, const BasicVlcParams<Scalar>& params) {
    return (params.n_w + ambient) * rate_factor(rate);
}

/// c = l * max(M, N): the serving UAV needs power c * d^(m+3).
template <typename Scalar>
Scalar demand_coefficient(const BasicUser<Scalar>& user, Scalar ambient, const BasicVlcParams<Scalar>& params) {
    return path_coefficient(params) *
           std::max(illumination_branch(ambient, params), rate_branch(user.rate, ambient, params));
}

/// Ambient level that minimises max(M, N) for a user with rate `rate`.
template <typename Scalar>
Scalar optimal_ambient(Scalar rate, const BasicVlcParams<Scalar>& params) {
    const Scalar k = rate_factor(rate);
    if (params.eta_r >= params.n_w * k) return (params.eta_r + params.n_w) / (Scalar(1) + k) - params.n_w;
    return Scalar(0);
}

/// Smallest power any UAV at distance `distance` can use for this user,
/// attained when the ambient level equals `optimal_ambient`.
template <typename Scalar>
Scalar power_lower_bound(Scalar rate, Scalar distance, const BasicVlcParams<Scalar>& params) {
    const Scalar ambient = optimal_ambient(rate, params);
    return (params.n_w + ambient) * rate_factor(rate) * path_coefficient(params) *
           std::pow(distance, path_exponent(params));
}

} // namespace channel
} // namespace vlcuav

#endif // VLCUAV_CHANNEL_HPP
