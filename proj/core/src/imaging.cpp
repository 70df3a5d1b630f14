#include "wireguide/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "wireguide/errors.hpp"

namespace wireguide {

std::string_view to_string(View view) { return view == View::Top ? "top" : "side"; }

View view_from_string(std::string_view name) {
    if (name == "top") return View::Top;
    if (name == "side") return View::Side;
    throw ValidationError("unknown view '" + std::string(name) + "'");
}

ViewFrame view_frame(View view, const FieldConfig& cfg) {
    const Vec3 n = cfg.wire.axis;
    Vec3 up = -cfg.gravity_direction;
    up -= up.dot(n) * n;
    if (up.norm() < 1e-9) {
        // Vertical wire: any direction perpendicular to it will do.
        up = n.unitOrthogonal();
    }
    up.normalize();
    if (view == View::Side) return {n, up};
    const Vec3 u = up.cross(n).normalized();
    return {u, n.cross(u)};
}

ImagingGeometry ImagingGeometry::top_default() { return {}; }

ImagingGeometry ImagingGeometry::side_default() {
    ImagingGeometry g;
    g.view = View::Side;
    g.fov_u = 2.0e-2;
    g.fov_v = 1.0e-2;
    return g;
}

std::uint64_t CcdImage::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

CcdImage render_ccd(const EnsembleSnapshot& snapshot, const FieldConfig& cfg,
                    const ImagingGeometry& g, const std::vector<bool>* mask) {
    if (!(g.pixel_size > 0.0)) throw ValidationError("pixel size must be > 0");
    if (!(g.fov_u > 0.0) || !(g.fov_v > 0.0)) throw ValidationError("field of view must be > 0");
    if (mask != nullptr && mask->size() != snapshot.size()) {
        throw ValidationError("selection mask does not match the ensemble size");
    }

    CcdImage img;
    img.view = g.view;
    img.pixel_size = g.pixel_size;
    img.nu = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(g.fov_u / g.pixel_size)));
    img.nv = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(g.fov_v / g.pixel_size)));
    img.fov_u = static_cast<double>(img.nu) * g.pixel_size;
    img.fov_v = static_cast<double>(img.nv) * g.pixel_size;
    img.origin_u = g.center_u - 0.5 * img.fov_u;
    img.origin_v = g.center_v - 0.5 * img.fov_v;
    img.counts.assign(img.nu * img.nv, 0);

    const ViewFrame frame = view_frame(g.view, cfg);
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        if (snapshot.tags[i].kind == OutcomeKind::HitWire) continue;
        if (mask != nullptr && !(*mask)[i]) continue;
        const Vec3 d = snapshot.states[i].position - cfg.wire.axis_point;
        const double fu = std::floor((frame.u.dot(d) - img.origin_u) / g.pixel_size);
        const double fv = std::floor((frame.v.dot(d) - img.origin_v) / g.pixel_size);
        if (fu < 0.0 || fv < 0.0 || fu >= static_cast<double>(img.nu) ||
            fv >= static_cast<double>(img.nv)) {
            continue;
        }
        ++img.counts[static_cast<std::size_t>(fv) * img.nu + static_cast<std::size_t>(fu)];
    }
    return img;
}

CcdImage poisson_resample(const CcdImage& image, std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 engine(seq);
    CcdImage out = image;
    for (auto& c : out.counts) {
        if (c == 0) continue;
        std::poisson_distribution<std::uint32_t> draw(static_cast<double>(c));
        c = draw(engine);
    }
    return out;
}

void write_pgm(std::ostream& out, const CcdImage& image, const std::string& comment) {
    out << "P5\n";
    std::string line;
    for (char ch : comment) {
        if (ch == '\n') {
            out << "# " << line << '\n';
            line.clear();
        } else {
            line += ch;
        }
    }
    if (!line.empty()) out << "# " << line << '\n';
    out << image.nu << ' ' << image.nv << "\n65535\n";
    for (std::size_t r = 0; r < image.nv; ++r) {
        const std::size_t jv = image.nv - 1 - r;
        for (std::size_t iu = 0; iu < image.nu; ++iu) {
            const auto c = static_cast<std::uint16_t>(std::min<std::uint32_t>(image.at(iu, jv), 65535));
            out.put(static_cast<char>(c >> 8));
            out.put(static_cast<char>(c & 0xff));
        }
    }
}

double Profile::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double Profile::bin_width() const {
    if (coordinates.size() < 2) throw ValidationError("profile needs two points for a bin width");
    return (coordinates.back() - coordinates.front()) / static_cast<double>(coordinates.size() - 1);
}

void Profile::validate() const {
    if (coordinates.size() != values.size()) throw ValidationError("profile length mismatch");
    for (std::size_t i = 1; i < coordinates.size(); ++i) {
        if (!(coordinates[i] > coordinates[i - 1])) {
            throw ValidationError("profile coordinates must be strictly increasing");
        }
    }
}

Profile project_profile(const CcdImage& image, ImageAxis axis) {
    Profile p;
    const bool along_u = axis == ImageAxis::U;
    const std::size_t n = along_u ? image.nu : image.nv;
    const double origin = along_u ? image.origin_u : image.origin_v;
    p.coordinates.resize(n);
    p.values.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        p.coordinates[k] = origin + (static_cast<double>(k) + 0.5) * image.pixel_size;
    }
    for (std::size_t jv = 0; jv < image.nv; ++jv) {
        for (std::size_t iu = 0; iu < image.nu; ++iu) {
            p.values[along_u ? iu : jv] += image.at(iu, jv);
        }
    }
    return p;
}

Profile central_cut(const CcdImage& image, ImageAxis axis, std::size_t half_width) {
    const bool along_u = axis == ImageAxis::U;
    // The cut runs along `axis`, so the centroid is needed across it.
    const Profile across = project_profile(image, along_u ? ImageAxis::V : ImageAxis::U);
    const double total = across.total();
    if (total <= 0.0) throw ValidationError("central cut of an empty image");
    double centroid = 0.0;
    for (std::size_t k = 0; k < across.values.size(); ++k) centroid += across.coordinates[k] * across.values[k];
    centroid /= total;
    const double origin = along_u ? image.origin_v : image.origin_u;
    const std::size_t n_across = along_u ? image.nv : image.nu;
    const auto center = static_cast<long long>(std::floor((centroid - origin) / image.pixel_size));
    const long long lo = std::max(0LL, center - static_cast<long long>(half_width));
    const long long hi = std::min(static_cast<long long>(n_across) - 1, center + static_cast<long long>(half_width));

    Profile p;
    const std::size_t n = along_u ? image.nu : image.nv;
    const double o = along_u ? image.origin_u : image.origin_v;
    p.coordinates.resize(n);
    p.values.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) p.coordinates[k] = o + (static_cast<double>(k) + 0.5) * image.pixel_size;
    for (long long line = lo; line <= hi; ++line) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto l = static_cast<std::size_t>(line);
            p.values[k] += along_u ? image.at(k, l) : image.at(l, k);
        }
    }
    return p;
}

Profile difference_profile(const Profile& with_current, const Profile& without_current) {
    with_current.validate();
    without_current.validate();
    if (with_current.coordinates.size() != without_current.coordinates.size()) {
        throw ValidationError("profile grids do not match");
    }
    Profile d = with_current;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double a = with_current.coordinates[i];
        const double b = without_current.coordinates[i];
        if (std::abs(a - b) > 1e-12 * std::max({1.0e-6, std::abs(a), std::abs(b)})) {
            throw ValidationError("profile grids do not match");
        }
        d.values[i] = with_current.values[i] - without_current.values[i];
    }
    return d;
}

double AxialExpansionModel::operator()(double t) const {
    const double sigma = std::sqrt(sigma_x * sigma_x + sigma_v * sigma_v * t * t);
    const double mean = cloud_center + 0.5 * axial_acceleration * t * t;
    const double hi = (fov_center + 0.5 * fov_length - mean) / (std::sqrt(2.0) * sigma);
    const double lo = (fov_center - 0.5 * fov_length - mean) / (std::sqrt(2.0) * sigma);
    return fraction0 * 0.5 * (std::erf(hi) - std::erf(lo));
}

std::vector<DetectionPoint> detected_fraction(const std::vector<EnsembleSnapshot>& snapshots,
                                              const FieldConfig& cfg,
                                              const std::vector<bool>& eligible,
                                              const AxialExpansionModel& model) {
    std::vector<DetectionPoint> series;
    series.reserve(snapshots.size());
    for (const auto& snap : snapshots) {
        if (snap.size() != eligible.size()) throw ValidationError("eligibility mask size mismatch");
        std::size_t inside = 0;
        for (std::size_t i = 0; i < snap.size(); ++i) {
            if (!eligible[i] || snap.tags[i].lost()) continue;
            const double axial = cfg.wire.axis.dot(snap.states[i].position - cfg.wire.axis_point);
            if (std::abs(axial - model.fov_center) <= 0.5 * model.fov_length) ++inside;
        }
        DetectionPoint p;
        p.time = snap.time;
        const double n = static_cast<double>(std::max<std::size_t>(snap.size(), 1));
        p.fraction = static_cast<double>(inside) / n;
        p.standard_error = std::sqrt(p.fraction * (1.0 - p.fraction) / n);
        p.model = model(snap.time);
        series.push_back(p);
    }
    return series;
}

std::string_view to_string(RingVerdict verdict) {
    switch (verdict) {
        case RingVerdict::Ring: return "ring";
        case RingVerdict::Unimodal: return "unimodal";
        case RingVerdict::Ambiguous: return "ambiguous";
    }
    return "ambiguous";
}

RingStatistic ring_statistic(const Profile& profile) {
    profile.validate();
    const std::size_t n = profile.values.size();
    if (n == 0) throw ValidationError("ring statistic of an empty profile");

    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = std::min(n - 1, i + 1);
        double s = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) s += profile.values[k];
        smooth[i] = s / static_cast<double>(hi - lo + 1);
    }

    double weight = 0.0;
    double moment = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::max(0.0, profile.values[i]);
        weight += w;
        moment += w * profile.coordinates[i];
    }
    const double peak = *std::max_element(smooth.begin(), smooth.end());
    if (weight <= 0.0 || peak <= 0.0) throw ValidationError("ring statistic of an empty profile");
    const double centroid = moment / weight;

    std::size_t center = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(profile.coordinates[i] - centroid) < std::abs(profile.coordinates[center] - centroid)) {
            center = i;
        }
    }

    RingStatistic r;
    r.measure = 1.0 - smooth[center] / peak;
    r.verdict = r.measure > 0.3   ? RingVerdict::Ring
                : r.measure < 0.1 ? RingVerdict::Unimodal
                                  : RingVerdict::Ambiguous;
    return r;
}

LineFit fit_rs_vs_current(const std::vector<CurrentPosition>& points) {
    if (points.size() < 3) throw ValidationError("line fit needs at least 3 points");
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.current;
        my += p.distance;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : points) {
        sxx += (p.current - mx) * (p.current - mx);
        sxy += (p.current - mx) * (p.distance - my);
        syy += (p.distance - my) * (p.distance - my);
    }
    if (sxx == 0.0) throw ValidationError("line fit needs at least two distinct currents");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& p : points) {
        const double r = p.distance - (fit.intercept + fit.slope * p.current);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
    return fit;
}

}  // namespace wireguide
