#include "atomlaser/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "atomlaser/constants.hpp"

namespace atomlaser {

namespace {

// Linear interpolation of the abscissa where the density crosses `level`
// between samples i and i+1.
double crossing(const Spectrum& s, std::size_t i, double level) {
    const double y0 = s.density[i], y1 = s.density[i + 1];
    const double t = (level - y0) / (y1 - y0);
    return s.axis[i] + t * (s.axis[i + 1] - s.axis[i]);
}

} // namespace

double Spectrum::integral() const {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < axis.size(); ++i)
        sum += 0.5 * (density[i] + density[i + 1]) * (axis[i + 1] - axis[i]);
    return sum;
}

void Spectrum::validate() const {
    if (axis.size() != density.size() || axis.size() < 4)
        throw AnalysisError("spectrum needs matching axis/density arrays with >= 4 samples");
    for (std::size_t i = 0; i + 1 < axis.size(); ++i)
        if (!(axis[i + 1] > axis[i])) throw AnalysisError("spectrum abscissa must increase");
    for (double d : density)
        if (!(d >= 0.0) || !std::isfinite(d)) throw AnalysisError("spectrum density must be finite and >= 0");
}

LineMeasurement measure_fwhm(const Spectrum& s) {
    s.validate();
    const std::size_t n = s.axis.size();
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (s.density[i] > s.density[imax]) imax = i;
    const double peak = s.density[imax];
    if (peak <= 0.0) throw AnalysisError("spectrum is identically zero");
    const double half = 0.5 * peak;

    // Count disjoint above-half intervals to reject multi-peak spectra.
    int intervals = 0;
    bool above = false;
    for (std::size_t i = 0; i < n; ++i) {
        const bool a = s.density[i] > half;
        if (a && !above) ++intervals;
        above = a;
    }
    if (intervals > 1) throw AnalysisError("multiple half-max intervals; use peak_decompose");

    if (s.density.front() > half || s.density.back() > half)
        throw AnalysisError("peak clipped by the grid; no half-max crossing");

    std::size_t i = imax;
    while (i > 0 && s.density[i - 1] > half) --i;
    const double xl = crossing(s, i - 1, half);
    std::size_t j = imax;
    while (j + 1 < n && s.density[j + 1] > half) ++j;
    const double xr = crossing(s, j, half);

    LineMeasurement m;
    m.fwhm = xr - xl;
    m.center = 0.5 * (xl + xr);
    m.residual = 0.0;
    m.method = "direct-fwhm";
    return m;
}

LineMeasurement fit_lorentzian(const Spectrum& s, const LorentzianFitOptions& opts) {
    s.validate();
    const std::size_t n = s.axis.size();

    // Initialize from the direct estimate when it works, from moments otherwise.
    double amp, x0, w;
    try {
        const LineMeasurement direct = measure_fwhm(s);
        x0 = direct.center;
        w = direct.fwhm;
    } catch (const AnalysisError&) {
        double m0 = 0.0, m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m0 += s.density[i];
            m1 += s.density[i] * s.axis[i];
        }
        x0 = m1 / m0;
        for (std::size_t i = 0; i < n; ++i)
            m2 += s.density[i] * (s.axis[i] - x0) * (s.axis[i] - x0);
        w = 2.355 * std::sqrt(m2 / m0);
    }
    amp = *std::max_element(s.density.begin(), s.density.end());
    const double span = s.axis.back() - s.axis.front();
    if (!(w > 0.0)) w = span / 8.0;

    // Levenberg-Marquardt on f = amp / (1 + ((x - x0)/(w/2))^2).
    double lambda = 1e-3;
    auto chi2 = [&](double a, double c, double width) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (s.axis[i] - c) / (0.5 * width);
            const double f = a / (1.0 + u * u);
            const double r = f - s.density[i];
            sum += r * r;
        }
        return sum;
    };
    double cost = chi2(amp, x0, w);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        // Normal equations for the 3-parameter Jacobian.
        double jtj[3][3] = {{0}}, jtr[3] = {0};
        for (std::size_t i = 0; i < n; ++i) {
            const double hw = 0.5 * w;
            const double u = (s.axis[i] - x0) / hw;
            const double d = 1.0 + u * u;
            const double f = amp / d;
            const double r = f - s.density[i];
            const double dfda = 1.0 / d;
            const double dfdx = amp * 2.0 * u / (d * d * hw);
            const double dfdw = amp * u * u / (d * d) * (2.0 / w);
            const double J[3] = {dfda, dfdx, dfdw};
            for (int p = 0; p < 3; ++p) {
                jtr[p] += J[p] * r;
                for (int q = 0; q < 3; ++q) jtj[p][q] += J[p] * J[q];
            }
        }
        // Solve (JtJ + lambda diag) step = -Jtr by Gaussian elimination.
        double a[3][4];
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) a[p][q] = jtj[p][q];
            a[p][p] *= (1.0 + lambda);
            a[p][3] = -jtr[p];
        }
        for (int p = 0; p < 3; ++p) {
            int piv = p;
            for (int q = p + 1; q < 3; ++q)
                if (std::fabs(a[q][p]) > std::fabs(a[piv][p])) piv = q;
            std::swap(a[p], a[piv]);
            if (a[p][p] == 0.0) throw AnalysisError("lorentzian fit: singular normal equations");
            for (int q = p + 1; q < 3; ++q) {
                const double f = a[q][p] / a[p][p];
                for (int r = p; r < 4; ++r) a[q][r] -= f * a[p][r];
            }
        }
        double step[3];
        for (int p = 2; p >= 0; --p) {
            double rhs = a[p][3];
            for (int q = p + 1; q < 3; ++q) rhs -= a[p][q] * step[q];
            step[p] = rhs / a[p][p];
        }
        const double amp2 = amp + step[0], x02 = x0 + step[1], w2 = w + step[2];
        if (!(w2 > 0.0) || !std::isfinite(amp2) || !std::isfinite(x02)) {
            lambda *= 10.0;
            continue;
        }
        const double cost2 = chi2(amp2, x02, w2);
        if (cost2 < cost) {
            const double rel = std::max({std::fabs(step[0]) / std::max(std::fabs(amp), 1e-300),
                                         std::fabs(step[1]) / std::max(std::fabs(x0) + w, 1e-300),
                                         std::fabs(step[2]) / std::max(std::fabs(w), 1e-300)});
            amp = amp2;
            x0 = x02;
            w = w2;
            cost = cost2;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (rel < opts.parameter_tolerance) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    if (it == opts.max_iterations)
        throw AnalysisError("lorentzian fit did not converge");
    if (w >= span)
        throw AnalysisError("lorentzian fit width hit the grid bounds");

    LineMeasurement m;
    m.fwhm = w;
    m.center = x0;
    double norm = 0.0;
    for (double d : s.density) norm += d * d;
    m.residual = norm > 0.0 ? std::sqrt(cost / norm) : 0.0;
    m.method = "lorentzian-fit";
    return m;
}

namespace {

// Levenberg-Marquardt over three parameters with a numeric Jacobian.
struct Lm3Result {
    double p[3];
    double cost;
    int iterations;
    bool converged;
};

template <typename Model>
Lm3Result lm_fit3(const Spectrum& s, const Model& model, const double init[3],
                  const double typical[3], const LorentzianFitOptions& opts) {
    const std::size_t n = s.axis.size();
    double p[3] = {init[0], init[1], init[2]};
    auto chi2 = [&](const double* q) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = model(s.axis[i], q) - s.density[i];
            sum += r * r;
        }
        return sum;
    };
    double cost = chi2(p);
    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iterations; ++it) {
        double jtj[3][3] = {{0}}, jtr[3] = {0};
        double scale[3];
        for (int a = 0; a < 3; ++a)
            scale[a] = 1e-7 * std::max(std::fabs(p[a]), std::fabs(typical[a]));
        for (std::size_t i = 0; i < n; ++i) {
            const double r = model(s.axis[i], p) - s.density[i];
            double J[3];
            for (int a = 0; a < 3; ++a) {
                double q1[3] = {p[0], p[1], p[2]};
                double q2[3] = {p[0], p[1], p[2]};
                q1[a] += scale[a];
                q2[a] -= scale[a];
                J[a] = (model(s.axis[i], q1) - model(s.axis[i], q2)) / (2.0 * scale[a]);
            }
            for (int a = 0; a < 3; ++a) {
                jtr[a] += J[a] * r;
                for (int b = 0; b < 3; ++b) jtj[a][b] += J[a] * J[b];
            }
        }
        double m[3][4];
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) m[a][b] = jtj[a][b];
            m[a][a] *= (1.0 + lambda);
            m[a][3] = -jtr[a];
        }
        bool singular = false;
        for (int a = 0; a < 3; ++a) {
            int piv = a;
            for (int b = a + 1; b < 3; ++b)
                if (std::fabs(m[b][a]) > std::fabs(m[piv][a])) piv = b;
            std::swap(m[a], m[piv]);
            if (m[a][a] == 0.0) {
                singular = true;
                break;
            }
            for (int b = a + 1; b < 3; ++b) {
                const double f = m[b][a] / m[a][a];
                for (int cidx = a; cidx < 4; ++cidx) m[b][cidx] -= f * m[a][cidx];
            }
        }
        if (singular) {
            lambda *= 10.0;
            continue;
        }
        double step[3];
        for (int a = 2; a >= 0; --a) {
            double rhs = m[a][3];
            for (int b = a + 1; b < 3; ++b) rhs -= m[a][b] * step[b];
            step[a] = rhs / m[a][a];
        }
        double q[3] = {p[0] + step[0], p[1] + step[1], p[2] + step[2]};
        if (!(q[2] > 0.0) || !std::isfinite(q[0]) || !std::isfinite(q[1])) {
            lambda *= 10.0;
            if (lambda > 1e14) break;
            continue;
        }
        const double cost2 = chi2(q);
        if (cost2 < cost) {
            double rel = 0.0;
            for (int a = 0; a < 3; ++a)
                rel = std::max(rel, std::fabs(step[a]) / std::max(std::fabs(p[a]), 1e-300));
            const double gain = (cost - cost2) / std::max(cost, 1e-300);
            p[0] = q[0];
            p[1] = q[1];
            p[2] = q[2];
            cost = cost2;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (rel < opts.parameter_tolerance || gain < 1e-12) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
    }
    return {{p[0], p[1], p[2]}, cost, it, converged || it < opts.max_iterations};
}

} // namespace

LineMeasurement fit_decay_spectrum(const Spectrum& s, double elapsed,
                                   const LorentzianFitOptions& opts) {
    s.validate();
    if (!(elapsed > 0.0)) throw AnalysisError("decay-spectrum fit needs elapsed > 0");

    // p = (amplitude, center, gamma)
    auto model = [elapsed](double x, const double* p) {
        const double u = x - p[1];
        const double g = p[2];
        const double num = 1.0 - 2.0 * std::cos(u * elapsed) * std::exp(-0.5 * g * elapsed) +
                           std::exp(-g * elapsed);
        return p[0] * num / (0.25 * g * g + u * u);
    };

    double x0, g0;
    try {
        const LineMeasurement direct = measure_fwhm(s);
        x0 = direct.center;
        g0 = direct.fwhm;
    } catch (const AnalysisError&) {
        x0 = spectral_centroid(s);
        g0 = support_interval(s, 0.5).width();
    }
    std::size_t imax = 0;
    for (std::size_t i = 1; i < s.axis.size(); ++i)
        if (s.density[i] > s.density[imax]) imax = i;
    const double peak = s.density[imax];
    const double n0v = 1.0 - 2.0 * std::exp(-0.5 * g0 * elapsed) + std::exp(-g0 * elapsed);
    const double a0 = peak * (0.25 * g0 * g0) / std::max(n0v, 1e-12);
    const double init[3] = {a0, x0, g0};
    const double span = s.axis.back() - s.axis.front();
    const double typical[3] = {a0, 0.01 * span, g0};

    const Lm3Result fit = lm_fit3(s, model, init, typical, opts);
    if (!fit.converged) throw AnalysisError("decay-spectrum fit did not converge");
    if (fit.p[2] >= s.axis.back() - s.axis.front())
        throw AnalysisError("decay-spectrum fit width hit the grid bounds");

    LineMeasurement m;
    m.fwhm = fit.p[2];
    m.center = fit.p[1];
    double norm = 0.0;
    for (double d : s.density) norm += d * d;
    m.residual = norm > 0.0 ? std::sqrt(fit.cost / norm) : 0.0;
    m.method = "decay-spectrum-fit";
    return m;
}

DrainFit fit_drain_time(const std::vector<double>& times, const std::vector<double>& numbers,
                        double monotonic_tolerance) {
    if (times.size() != numbers.size() || times.size() < 10)
        throw AnalysisError("drain fit needs >= 10 matching samples");
    double n0 = numbers.front();
    if (!(n0 > 0.0)) throw AnalysisError("drain fit needs positive atom numbers");
    for (std::size_t i = 0; i + 1 < numbers.size(); ++i) {
        if (!(numbers[i + 1] > 0.0)) throw AnalysisError("drain fit needs positive atom numbers");
        if (numbers[i + 1] > numbers[i] + monotonic_tolerance * n0)
            throw AnalysisError("non-monotone decay; exponential model mismatch");
    }
    const std::size_t n = times.size();
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = std::log(numbers[i]);
        st += times[i];
        sy += y;
        stt += times[i] * times[i];
        sty += times[i] * y;
    }
    const double denom = n * stt - st * st;
    if (denom == 0.0) throw AnalysisError("drain fit: degenerate time samples");
    const double slope = (n * sty - st * sy) / denom;
    const double intercept = (sy - slope * st) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(numbers[i]) - (intercept + slope * times[i]);
        rss += r * r;
    }
    DrainFit fit;
    fit.gamma = -slope;
    fit.residual = std::sqrt(rss / n);
    return fit;
}

double inv_drain_time_crossing(const std::vector<double>& times,
                               const std::vector<double>& numbers) {
    if (times.size() != numbers.size() || times.size() < 2)
        throw AnalysisError("crossing estimate needs matching samples");
    const double target = numbers.front() / std::exp(1.0);
    for (std::size_t i = 0; i + 1 < numbers.size(); ++i) {
        if (numbers[i] >= target && numbers[i + 1] < target) {
            const double t = times[i] + (numbers[i] - target) / (numbers[i] - numbers[i + 1]) *
                                            (times[i + 1] - times[i]);
            return 1.0 / t;
        }
    }
    throw AnalysisError("decay never crossed N0/e within the samples");
}

double lorentzian_equivalent_width(const Spectrum& s) {
    s.validate();
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i + 1 < s.axis.size(); ++i) {
        const double dx = s.axis[i + 1] - s.axis[i];
        s1 += 0.5 * (s.density[i] + s.density[i + 1]) * dx;
        s2 += 0.5 * (s.density[i] * s.density[i] + s.density[i + 1] * s.density[i + 1]) * dx;
    }
    if (!(s2 > 0.0)) throw AnalysisError("spectrum is identically zero");
    return s1 * s1 / (pi * s2);
}

std::vector<LineMeasurement> peak_decompose(const Spectrum& s, double prominence) {
    s.validate();
    const std::size_t n = s.axis.size();
    const double peak = *std::max_element(s.density.begin(), s.density.end());
    if (peak <= 0.0) throw AnalysisError("spectrum is identically zero");
    const double floor = prominence * peak;

    std::vector<std::size_t> maxima;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (s.density[i] >= floor && s.density[i] > s.density[i - 1] &&
            s.density[i] >= s.density[i + 1])
            maxima.push_back(i);
    }
    if (maxima.empty())
        throw AnalysisError("no peak above the prominence threshold on a nonzero spectrum");

    std::vector<LineMeasurement> out;
    for (std::size_t imax : maxima) {
        const double half = 0.5 * s.density[imax];
        // Walk down each side until the density falls below half or rises again.
        std::size_t i = imax;
        while (i > 0 && s.density[i - 1] > half && s.density[i - 1] <= s.density[i]) --i;
        std::size_t j = imax;
        while (j + 1 < n && s.density[j + 1] > half && s.density[j + 1] <= s.density[j]) ++j;
        if (i == 0 || j + 1 == n || s.density[i - 1] > half || s.density[j + 1] > half)
            continue; // shoulder peak without clean crossings
        const double xl = crossing(s, i - 1, half);
        const double xr = crossing(s, j, half);
        LineMeasurement m;
        m.fwhm = xr - xl;
        m.center = 0.5 * (xl + xr);
        m.residual = 0.0;
        m.method = "direct-fwhm";
        out.push_back(m);
    }
    if (out.empty())
        throw AnalysisError("no peak with resolvable half-max crossings");
    return out;
}

SupportInterval support_interval(const Spectrum& s, double fraction) {
    s.validate();
    if (!(fraction > 0.0 && fraction < 1.0))
        throw AnalysisError("support fraction must be in (0, 1)");
    const std::size_t n = s.axis.size();
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        cum[i] = cum[i - 1] + 0.5 * (s.density[i] + s.density[i - 1]) * (s.axis[i] - s.axis[i - 1]);
    const double total = cum.back();
    if (!(total > 0.0)) throw AnalysisError("spectrum is identically zero");

    auto quantile = [&](double q) {
        const double target = q * total;
        for (std::size_t i = 1; i < n; ++i) {
            if (cum[i] >= target) {
                const double seg = cum[i] - cum[i - 1];
                const double t = seg > 0.0 ? (target - cum[i - 1]) / seg : 0.0;
                return s.axis[i - 1] + t * (s.axis[i] - s.axis[i - 1]);
            }
        }
        return s.axis.back();
    };
    const double tail = 0.5 * (1.0 - fraction);
    return {quantile(tail), quantile(1.0 - tail)};
}

double spectral_centroid(const Spectrum& s) {
    s.validate();
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i + 1 < s.axis.size(); ++i) {
        const double dx = s.axis[i + 1] - s.axis[i];
        m0 += 0.5 * (s.density[i] + s.density[i + 1]) * dx;
        m1 += 0.5 * (s.density[i] * s.axis[i] + s.density[i + 1] * s.axis[i + 1]) * dx;
    }
    if (!(m0 > 0.0)) throw AnalysisError("spectrum is identically zero");
    return m1 / m0;
}

double spectral_peak_position(const Spectrum& s) {
    s.validate();
    std::size_t imax = 0;
    for (std::size_t i = 1; i < s.axis.size(); ++i)
        if (s.density[i] > s.density[imax]) imax = i;
    if (imax == 0 || imax + 1 == s.axis.size()) return s.axis[imax];
    // Three-point parabolic refinement on a uniform neighborhood.
    const double y0 = s.density[imax - 1], y1 = s.density[imax], y2 = s.density[imax + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    if (denom == 0.0) return s.axis[imax];
    const double shift = 0.5 * (y0 - y2) / denom;
    const double dx = 0.5 * (s.axis[imax + 1] - s.axis[imax - 1]);
    return s.axis[imax] + shift * dx;
}

Spectrum to_energy_spectrum(const Spectrum& s, double mass) {
    s.validate();
    if (s.kind != SpectrumAxis::wavenumber)
        throw AnalysisError("energy conversion expects a wavenumber spectrum");
    Spectrum e;
    e.time = s.time;
    e.kind = SpectrumAxis::energy;
    e.provenance = s.provenance;
    e.axis.reserve(s.axis.size());
    e.density.reserve(s.axis.size());
    for (std::size_t i = 0; i < s.axis.size(); ++i) {
        const double k = s.axis[i];
        if (!(k > 0.0))
            throw AnalysisError("energy conversion needs k > 0 on all samples");
        e.axis.push_back(hbar * hbar * k * k / (2.0 * mass));
        e.density.push_back(s.density[i] * mass / (hbar * hbar * k)); // dk/dE
    }
    return e;
}

CenterTrack track_line_center(const std::vector<Spectrum>& spectra, CenterEstimator estimator) {
    CenterTrack track;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (const Spectrum& s : spectra) {
        track.times.push_back(s.time);
        double c = std::numeric_limits<double>::quiet_NaN();
        std::string method = "gap";
        try {
            switch (estimator) {
                case CenterEstimator::direct_fwhm:
                    c = measure_fwhm(s).center;
                    method = "direct-fwhm";
                    break;
                case CenterEstimator::centroid:
                    c = spectral_centroid(s);
                    method = "centroid";
                    break;
                case CenterEstimator::support_mid:
                    c = support_interval(s).mid();
                    method = "support-mid";
                    break;
            }
        } catch (const AnalysisError&) {
            ++track.gaps;
        }
        track.centers.push_back(c);
        track.methods.push_back(method);
        if (!std::isnan(c) && !std::isnan(prev)) {
            ++track.valid_pairs;
            if (c < prev)
                ++track.decreasing_steps;
            else
                track.max_uptick = std::max(track.max_uptick, c - prev);
        }
        if (!std::isnan(c)) prev = c;
    }
    return track;
}

} // namespace atomlaser
