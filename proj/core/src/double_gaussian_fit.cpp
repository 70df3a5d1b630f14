#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "wireguide/errors.hpp"
#include "wireguide/imaging.hpp"

namespace wireguide {
namespace {

constexpr int kMaxIterations = 500;
constexpr double kStepTolerance = 1e-8;

using Params = Eigen::Matrix<double, 7, 1>;  // a1 m1 s1 a2 m2 s2 offset

double gauss(double x, double a, double m, double s) {
    const double z = (x - m) / s;
    return a * std::exp(-0.5 * z * z);
}

// Fit is done in normalised units: x' = (x - x0) / span, y' = y / scale.
struct Frame {
    double x0 = 0.0;
    double span = 1.0;
    double scale = 1.0;
};

double cost(const Params& p, const std::vector<double>& x, const std::vector<double>& y) {
    double c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = gauss(x[i], p[0], p[1], p[2]) + gauss(x[i], p[3], p[4], p[5]) + p[6] - y[i];
        c += r * r;
    }
    return c;
}

void normal_equations(const Params& p, const std::vector<double>& x, const std::vector<double>& y,
                      Eigen::Matrix<double, 7, 7>& jtj, Params& jtr) {
    jtj.setZero();
    jtr.setZero();
    Params row;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double model = p[6];
        for (int c = 0; c < 2; ++c) {
            const double a = p[3 * c];
            const double m = p[3 * c + 1];
            const double s = p[3 * c + 2];
            const double z = (x[i] - m) / s;
            const double g = std::exp(-0.5 * z * z);
            model += a * g;
            row[3 * c] = g;
            row[3 * c + 1] = a * g * z / s;
            row[3 * c + 2] = a * g * z * z / s;
        }
        row[6] = 1.0;
        jtj.noalias() += row * row.transpose();
        jtr.noalias() += row * (model - y[i]);
    }
}

}  // namespace

double DoubleGaussianFit::trapped_atoms(double bin_width) const {
    return trapped.amplitude * trapped.sigma * std::sqrt(2.0 * std::numbers::pi) / bin_width;
}

double DoubleGaussianFit::evaluate(double x) const {
    return gauss(x, trapped.amplitude, trapped.center, trapped.sigma) +
           gauss(x, background.amplitude, background.center, background.sigma) + offset;
}

DoubleGaussianInit initial_guess(const Profile& profile, double peak_hint, double search_half_width) {
    profile.validate();
    const auto& x = profile.coordinates;
    const auto& y = profile.values;
    const std::size_t n = y.size();
    if (n < 7) throw ValidationError("double Gaussian fit needs at least 7 points");
    const double bin = profile.bin_width();

    DoubleGaussianInit init;
    // Offset from the outermost three bins on either side.
    const std::size_t edge = std::min<std::size_t>(3, n / 2);
    double tails = 0.0;
    for (std::size_t i = 0; i < edge; ++i) tails += y[i] + y[n - 1 - i];
    init.offset = std::min(tails / static_cast<double>(2 * edge), *std::min_element(y.begin(), y.end()));

    double w = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::max(0.0, y[i] - init.offset);
        w += v;
        m1 += v * x[i];
    }
    if (w <= 0.0) {
        init.wide = {0.0, 0.5 * (x.front() + x.back()), 0.25 * (x.back() - x.front())};
        init.narrow = {0.0, peak_hint, 2.0 * bin};
        return init;
    }
    m1 /= w;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::max(0.0, y[i] - init.offset);
        m2 += v * (x[i] - m1) * (x[i] - m1);
    }
    const double sigma_wide = std::max(std::sqrt(m2 / w), bin);
    init.wide = {w * bin / (sigma_wide * std::sqrt(2.0 * std::numbers::pi)), m1, sigma_wide};

    // Narrow component: largest residual inside the search window around the hint.
    std::size_t best = n;
    double best_value = 0.0;
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) {
        residual[i] = y[i] - init.offset - gauss(x[i], init.wide.amplitude, init.wide.center, init.wide.sigma);
        if (std::abs(x[i] - peak_hint) <= search_half_width && (best == n || residual[i] > best_value)) {
            best = i;
            best_value = residual[i];
        }
    }
    if (best == n) {
        best = static_cast<std::size_t>(std::min_element(x.begin(), x.end(), [&](double a, double b) {
                                            return std::abs(a - peak_hint) < std::abs(b - peak_hint);
                                        }) - x.begin());
        best_value = residual[best];
    }
    // Half width at half maximum of the residual peak.
    std::size_t lo = best, hi = best;
    while (lo > 0 && residual[lo - 1] > 0.5 * best_value) --lo;
    while (hi + 1 < n && residual[hi + 1] > 0.5 * best_value) ++hi;
    const double hwhm = std::max(0.5 * static_cast<double>(hi - lo + 1) * bin, bin);
    const double sigma_narrow = std::min(hwhm / std::sqrt(2.0 * std::log(2.0)), 0.5 * sigma_wide);
    init.narrow = {std::max(best_value, 0.0), x[best], sigma_narrow};
    init.wide.amplitude = std::max(init.wide.amplitude - 0.5 * init.narrow.amplitude, 0.0);
    return init;
}

DoubleGaussianFit fit_double_gaussian(const Profile& profile, double peak_hint) {
    const double span = profile.coordinates.empty() ? 0.0 : profile.coordinates.back() - profile.coordinates.front();
    return fit_double_gaussian(profile, initial_guess(profile, peak_hint, 0.1 * span));
}

DoubleGaussianFit fit_double_gaussian(const Profile& profile, const DoubleGaussianInit& init) {
    profile.validate();
    const std::size_t n = profile.values.size();
    if (n < 7) throw ValidationError("double Gaussian fit needs at least 7 points");

    Frame f;
    f.x0 = 0.5 * (profile.coordinates.front() + profile.coordinates.back());
    f.span = profile.coordinates.back() - profile.coordinates.front();
    double ymax = 0.0;
    for (double v : profile.values) ymax = std::max(ymax, std::abs(v));
    f.scale = ymax > 0.0 ? ymax : 1.0;

    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = (profile.coordinates[i] - f.x0) / f.span;
        y[i] = profile.values[i] / f.scale;
    }

    Params p;
    p << init.narrow.amplitude / f.scale, (init.narrow.center - f.x0) / f.span, init.narrow.sigma / f.span,
        init.wide.amplitude / f.scale, (init.wide.center - f.x0) / f.span, init.wide.sigma / f.span,
        init.offset / f.scale;

    DoubleGaussianFit fit;
    double lambda = 1e-3;
    double c = cost(p, x, y);
    Eigen::Matrix<double, 7, 7> jtj;
    Params jtr;
    int it = 0;
    for (; it < kMaxIterations && !fit.converged; ++it) {
        normal_equations(p, x, y, jtj, jtr);
        const double floor = 1e-15 * std::max(1.0, jtj.diagonal().maxCoeff());
        while (true) {
            Eigen::Matrix<double, 7, 7> a = jtj;
            for (int k = 0; k < 7; ++k) a(k, k) += lambda * std::max(jtj(k, k), floor);
            const Params delta = a.ldlt().solve(-jtr);
            bool small = delta.allFinite();
            for (int k = 0; k < 7 && small; ++k) {
                small = std::abs(delta[k]) <= kStepTolerance * (std::abs(p[k]) + 1e-3);
            }
            const Params trial = p + delta;
            const double c_trial = delta.allFinite() ? cost(trial, x, y) : HUGE_VAL;
            if (c_trial <= c) {
                p = trial;
                c = c_trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                fit.converged = small || c == 0.0;
                break;
            }
            if (small) {
                // No descent left even for a negligible step: at the minimum.
                fit.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
        if (lambda > 1e16) break;
    }

    fit.iterations = it;
    GaussianComponent g1{p[0] * f.scale, f.x0 + p[1] * f.span, std::abs(p[2]) * f.span};
    GaussianComponent g2{p[3] * f.scale, f.x0 + p[4] * f.span, std::abs(p[5]) * f.span};
    if (g1.sigma > g2.sigma) std::swap(g1, g2);
    fit.trapped = g1;
    fit.background = g2;
    fit.offset = p[6] * f.scale;
    fit.residual_norm = std::sqrt(c) * f.scale;
    fit.degenerate = std::abs(g1.sigma - g2.sigma) <= 0.01 * std::max(g1.sigma, g2.sigma);
    return fit;
}

}  // namespace wireguide
