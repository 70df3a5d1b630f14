#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wireguide/ensemble.hpp"
#include "wireguide/field.hpp"

namespace wireguide {

/// Top looks along the wire axis; Side looks horizontally onto the wire.
enum class View { Top, Side };

std::string_view to_string(View view);
View view_from_string(std::string_view name);

/// Image-plane basis for a view: `u` is the horizontal image axis, `v` the
/// vertical one (against gravity). Coordinates are relative to the wire axis point.
struct ViewFrame {
    Vec3 u;
    Vec3 v;
};
ViewFrame view_frame(View view, const FieldConfig& cfg);

struct ImagingGeometry {
    View view = View::Top;
    double fov_u = 1.0e-2;       // m
    double fov_v = 1.0e-2;       // m
    double pixel_size = 50.0e-6; // m
    double center_u = 0.0;       // m, image-plane coordinates of the fov center
    double center_v = 0.0;

    static ImagingGeometry top_default();
    static ImagingGeometry side_default();
};

/// Ideal position histogram. counts is row-major, row j covers
/// v in [origin_v + j*pixel, origin_v + (j+1)*pixel).
struct CcdImage {
    View view = View::Top;
    std::size_t nu = 0;
    std::size_t nv = 0;
    double pixel_size = 0.0;
    double fov_u = 0.0;
    double fov_v = 0.0;
    double origin_u = 0.0;   // lower edge of pixel (0,0)
    double origin_v = 0.0;
    std::vector<std::uint32_t> counts;

    std::uint32_t at(std::size_t iu, std::size_t jv) const { return counts[jv * nu + iu]; }
    std::uint64_t total() const;
};

/// Bins the projected positions of all atoms that are not absorbed by the
/// wire (and, when given, selected by `mask`). Throws ValidationError for a
/// non-positive pixel size or fov.
CcdImage render_ccd(const EnsembleSnapshot& snapshot, const FieldConfig& cfg,
                    const ImagingGeometry& geometry, const std::vector<bool>* mask = nullptr);

/// Replaces every pixel by a Poisson draw with the same mean.
CcdImage poisson_resample(const CcdImage& image, std::uint64_t seed);

/// Binary 16-bit PGM (P5, big endian). The first row written is the top of the
/// image (largest v). `comment` goes into a header comment line.
void write_pgm(std::ostream& out, const CcdImage& image, const std::string& comment);

struct Profile {
    std::vector<double> coordinates;   // m, strictly increasing
    std::vector<double> values;        // counts

    double total() const;
    double bin_width() const;
    void validate() const;
};

enum class ImageAxis { U, V };

/// Marginal of the image along `axis` (sum over the other axis).
Profile project_profile(const CcdImage& image, ImageAxis axis);

/// Cut along `axis` through the count-weighted centroid of the image, summing
/// 2*half_width+1 pixel lines.
Profile central_cut(const CcdImage& image, ImageAxis axis, std::size_t half_width);

/// Pointwise with - without. Throws ValidationError on mismatched grids.
Profile difference_profile(const Profile& with_current, const Profile& without_current);

struct GaussianComponent {
    double amplitude = 0.0;
    double center = 0.0;
    double sigma = 1.0;
};

struct DoubleGaussianFit {
    GaussianComponent trapped;      // narrow component
    GaussianComponent background;   // wide component
    double offset = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;        // widths within 1 % of each other

    /// a sigma sqrt(2 pi) / bin width of the narrow component.
    double trapped_atoms(double bin_width) const;
    double evaluate(double x) const;
};

struct DoubleGaussianInit {
    GaussianComponent narrow;
    GaussianComponent wide;
    double offset = 0.0;
};

/// Start values: the wide component from the moments of the whole profile, the
/// narrow one from the largest residual peak within `search_half_width` of
/// `peak_hint` (the wire position).
DoubleGaussianInit initial_guess(const Profile& profile, double peak_hint, double search_half_width);

/// Levenberg-Marquardt fit of a1 g(mu1,s1) + a2 g(mu2,s2) + offset. Needs at
/// least 7 points. Never throws on non-convergence; see `converged`.
DoubleGaussianFit fit_double_gaussian(const Profile& profile, const DoubleGaussianInit& init);
DoubleGaussianFit fit_double_gaussian(const Profile& profile, double peak_hint = 0.0);

struct DetectionPoint {
    double time = 0.0;
    double fraction = 0.0;
    double standard_error = 0.0;
    double model = 0.0;          // closed-form free axial expansion
};

/// Closed form for a Gaussian axial cloud expanding freely and falling along the wire:
/// fraction0 * P(|x - fov_center| <= fov_length / 2),
/// x ~ N(center + a t^2 / 2, sx^2 + sv^2 t^2) with a the axial component of gravity.
struct AxialExpansionModel {
    double fraction0 = 0.0;
    double cloud_center = 0.0;
    double fov_center = 0.0;
    double sigma_x = 0.0;
    double sigma_v = 0.0;
    double fov_length = 0.02;
    double axial_acceleration = 0.0;   // m/s^2, gravity projected on the wire axis

    double operator()(double t) const;
};

/// For each snapshot, the fraction of all launched atoms that are `eligible`,
/// still held by the guide and whose axial coordinate lies inside the fov.
std::vector<DetectionPoint> detected_fraction(const std::vector<EnsembleSnapshot>& snapshots,
                                              const FieldConfig& cfg,
                                              const std::vector<bool>& eligible,
                                              const AxialExpansionModel& model);

enum class RingVerdict { Ring, Unimodal, Ambiguous };
std::string_view to_string(RingVerdict verdict);

struct RingStatistic {
    double measure = 0.0;
    RingVerdict verdict = RingVerdict::Ambiguous;
};

/// 1 - center / max on the 3-bin moving average; the center is the bin nearest
/// the profile centroid. > 0.3 is a ring, < 0.1 unimodal.
RingStatistic ring_statistic(const Profile& profile);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

struct CurrentPosition {
    double current = 0.0;    // A
    double distance = 0.0;   // m
};

/// Ordinary least squares of distance against current; needs >= 3 points.
LineFit fit_rs_vs_current(const std::vector<CurrentPosition>& points);

}  // namespace wireguide
