#include "wireguide/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wireguide/errors.hpp"

namespace wireguide {
namespace {

constexpr double kUnitTolerance = 1e-12;
constexpr double kPerpendicularTolerance = 1e-9;

Mat3 cross_matrix(const Vec3& n) {
    Mat3 m;
    m << 0.0, -n.z(), n.y(),
         n.z(), 0.0, -n.x(),
         -n.y(), n.x(), 0.0;
    return m;
}

bool finite(const Vec3& v) { return v.allFinite(); }

void require_unit(const Vec3& v, const char* what) {
    if (!finite(v) || std::abs(v.norm() - 1.0) > kUnitTolerance) {
        throw ValidationError(std::string(what) + " must be a unit vector");
    }
}

}  // namespace

void WireSpec::validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("wire radius must be > 0");
    if (!std::isfinite(current)) throw ValidationError("wire current must be finite");
    if (!(length > 0.0)) throw ValidationError("wire length must be > 0");
    if (!finite(axis_point)) throw ValidationError("wire axis point must be finite");
    require_unit(axis, "wire axis");
}

void BiasFieldSpec::validate() const {
    if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) throw ValidationError("bias magnitude must be >= 0");
    require_unit(direction, "bias direction");
}

void AtomSpecies::validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ValidationError("atom mass must be > 0");
    if (!(mu_eff >= 0.0) || !std::isfinite(mu_eff)) throw ValidationError("mu_eff must be >= 0");
}

Vec3 FieldConfig::gravity_acceleration() const {
    return gravity_on ? Vec3(constants::standard_gravity * gravity_direction) : Vec3::Zero();
}

void FieldConfig::validate() const {
    wire.validate();
    bias.validate();
    require_unit(gravity_direction, "gravity direction");
    if (std::abs(bias.direction.dot(wire.axis)) > kPerpendicularTolerance) {
        throw ValidationError("bias field must be perpendicular to the wire");
    }
}

Vec3 perpendicular_offset(const Vec3& p, const WireSpec& wire) {
    const Vec3 d = p - wire.axis_point;
    return d - d.dot(wire.axis) * wire.axis;
}

double perpendicular_distance(const Vec3& p, const WireSpec& wire) {
    return perpendicular_offset(p, wire).norm();
}

FieldSample wire_field_sample(const Vec3& p, const WireSpec& wire) {
    FieldSample s;
    if (wire.current == 0.0) return s;

    const double k = constants::mu0_over_2pi * wire.current;
    const Vec3 rho = perpendicular_offset(p, wire);
    const double r2 = rho.squaredNorm();
    const double a2 = wire.radius * wire.radius;
    const Vec3 n_cross_rho = wire.axis.cross(rho);
    const Mat3 n_cross = cross_matrix(wire.axis);

    if (r2 >= a2) {
        // Outside: B = k (n x rho) / r^2.
        s.b = (k / r2) * n_cross_rho;
        s.jacobian = (k / r2) * n_cross - (2.0 * k / (r2 * r2)) * n_cross_rho * rho.transpose();
    } else {
        // Uniform current density inside the conductor.
        s.b = (k / a2) * n_cross_rho;
        s.jacobian = (k / a2) * n_cross;
    }
    return s;
}

Vec3 wire_field(const Vec3& p, const WireSpec& wire) {
    if (wire.current == 0.0) return Vec3::Zero();
    const double k = constants::mu0_over_2pi * wire.current;
    const Vec3 rho = perpendicular_offset(p, wire);
    const double r2 = rho.squaredNorm();
    const double a2 = wire.radius * wire.radius;
    return (k / std::max(r2, a2)) * wire.axis.cross(rho);
}

Vec3 total_field(const Vec3& p, const FieldConfig& cfg) {
    return wire_field(p, cfg.wire) + cfg.bias.field();
}

FieldSample total_field_sample(const Vec3& p, const FieldConfig& cfg) {
    FieldSample s = wire_field_sample(p, cfg.wire);
    s.b += cfg.bias.field();
    return s;
}

double potential(const Vec3& p, const AtomSpecies& atom, const FieldConfig& cfg) {
    double v = atom.zeeman_sign() * atom.mu_eff * total_field(p, cfg).norm();
    if (cfg.gravity_on) {
        const double height = -cfg.gravity_direction.dot(p - cfg.wire.axis_point);
        v += atom.mass * constants::standard_gravity * height;
    }
    return v;
}

Vec3 force_from_sample(const FieldSample& sample, const AtomSpecies& atom,
                       const FieldConfig& cfg) {
    Vec3 f = atom.mass * cfg.gravity_acceleration();
    const double bmag = sample.b.norm();
    if (bmag > 0.0 && atom.mu_eff > 0.0) {
        // grad |B| = J^T B / |B|
        const Vec3 grad_b = sample.jacobian.transpose() * (sample.b / bmag);
        f -= atom.zeeman_sign() * atom.mu_eff * grad_b;
    }
    return f;
}

Vec3 force(const Vec3& p, const AtomSpecies& atom, const FieldConfig& cfg) {
    return force_from_sample(total_field_sample(p, cfg), atom, cfg);
}

SideTrap side_trap_center(const WireSpec& wire, const BiasFieldSpec& bias) {
    if (!(bias.magnitude > 0.0) || wire.current == 0.0) {
        throw NoSideTrapError("no side trap exists");
    }
    SideTrap trap;
    trap.distance = constants::mu0_over_2pi * std::abs(wire.current) / bias.magnitude;
    if (trap.distance <= wire.radius) throw NoSideTrapError("trap inside wire");

    // The wire field points along sign(I) n x rho_hat; it cancels the bias where
    // that equals -b_hat, i.e. rho_hat = sign(I) n x b_hat.
    const double sign = wire.current > 0.0 ? 1.0 : -1.0;
    trap.direction = (sign * wire.axis.cross(bias.direction)).normalized();
    trap.center = wire.axis_point + trap.distance * trap.direction;
    return trap;
}

double side_trap_gradient(const WireSpec& wire, const BiasFieldSpec& bias) {
    const SideTrap trap = side_trap_center(wire, bias);
    return bias.magnitude / trap.distance;
}

double side_trap_depth(const AtomSpecies& atom, const BiasFieldSpec& bias) {
    if (atom.seeker == Seeker::HighField) {
        throw NoSideTrapError("no side trap for high-field seekers");
    }
    return atom.mu_eff * bias.magnitude;
}

}  // namespace wireguide
