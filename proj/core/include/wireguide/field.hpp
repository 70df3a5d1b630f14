#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "wireguide/constants.hpp"

namespace wireguide {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Seeker { HighField, LowField };

/// Infinite straight wire. `length` only sets the detection field of view.
struct WireSpec {
    double current = 1.0;                 // A, sign gives the direction along `axis`
    double radius = 25.0e-6;              // m
    Vec3 axis = Vec3::UnitX();
    Vec3 axis_point = Vec3::Zero();       // m
    double length = 0.10;                 // m

    void validate() const;
};

/// Homogeneous bias field. A zero magnitude selects the Kepler guide.
struct BiasFieldSpec {
    double magnitude = 0.0;               // T
    Vec3 direction = Vec3::UnitZ();

    Vec3 field() const { return magnitude * direction; }
    void validate() const;
};

struct AtomSpecies {
    double mass = constants::lithium7_mass;        // kg
    double mu_eff = constants::bohr_magneton;      // J / T
    Seeker seeker = Seeker::HighField;

    /// -1 for high-field seekers, +1 for low-field seekers.
    double zeeman_sign() const { return seeker == Seeker::HighField ? -1.0 : 1.0; }
    void validate() const;
};

/// Everything an atom moves in: wire, bias and gravity.
struct FieldConfig {
    WireSpec wire;
    BiasFieldSpec bias;
    Vec3 gravity_direction = -Vec3::UnitZ();
    bool gravity_on = true;

    bool side_guide() const { return bias.magnitude > 0.0; }
    /// Acceleration due to gravity, zero when gravity is switched off.
    Vec3 gravity_acceleration() const;
    /// Throws ValidationError on any broken invariant (also checks wire and bias).
    void validate() const;
};

/// Field value together with its Jacobian d B_i / d x_j.
struct FieldSample {
    Vec3 b = Vec3::Zero();
    Mat3 jacobian = Mat3::Zero();
};

/// Component of (p - axis_point) perpendicular to the wire axis.
Vec3 perpendicular_offset(const Vec3& p, const WireSpec& wire);
double perpendicular_distance(const Vec3& p, const WireSpec& wire);

Vec3 wire_field(const Vec3& p, const WireSpec& wire);
FieldSample wire_field_sample(const Vec3& p, const WireSpec& wire);

Vec3 total_field(const Vec3& p, const FieldConfig& cfg);
FieldSample total_field_sample(const Vec3& p, const FieldConfig& cfg);

/// Adiabatic potential s mu_eff |B| plus gravitational energy (when enabled).
/// The gravitational reference height is the wire axis point.
double potential(const Vec3& p, const AtomSpecies& atom, const FieldConfig& cfg);

/// Analytic -grad V. At an exact field zero the magnetic part is defined as zero.
Vec3 force(const Vec3& p, const AtomSpecies& atom, const FieldConfig& cfg);

/// Same as force() but reuses an already evaluated field sample.
Vec3 force_from_sample(const FieldSample& sample, const AtomSpecies& atom,
                       const FieldConfig& cfg);

struct SideTrap {
    double distance = 0.0;         // r_s, m
    Vec3 direction = Vec3::Zero(); // unit vector from the wire axis to the zero line
    Vec3 center = Vec3::Zero();    // point on the zero line closest to axis_point
};

/// Location of the zero-field line. Throws NoSideTrapError when the bias or the
/// current vanishes, or when the line would lie inside the wire.
SideTrap side_trap_center(const WireSpec& wire, const BiasFieldSpec& bias);

/// Linearised transverse gradient at the zero line, B_b / r_s, in T/m.
double side_trap_gradient(const WireSpec& wire, const BiasFieldSpec& bias);

/// mu_eff B_b. Throws NoSideTrapError for high-field seekers.
double side_trap_depth(const AtomSpecies& atom, const BiasFieldSpec& bias);

}  // namespace wireguide
