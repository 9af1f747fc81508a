// Turns field/mode trajectories into measured quantities: spectra, FWHM
// linewidths, Lorentzian fits, drain-time fits and line-center tracks.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atomlaser/errors.hpp"

namespace atomlaser {

enum class SpectrumAxis { wavenumber, angular_frequency, energy };

// Non-negative density samples over a monotone abscissa. The density is per
// unit abscissa, so integral() recovers the atom number of the source state.
struct Spectrum {
    std::vector<double> axis;
    std::vector<double> density;
    double time = 0.0;
    SpectrumAxis kind = SpectrumAxis::wavenumber;
    std::string provenance;

    double integral() const; // trapezoid rule
    void validate() const;
};

struct LineMeasurement {
    double fwhm = 0.0;
    double center = 0.0;
    double residual = 0.0;   // relative rms of the fit; 0 for direct methods
    std::string method;      // "direct-fwhm" | "lorentzian-fit"
};

// Half-max crossings located by linear interpolation; center is the midpoint
// of the crossings. Throws AnalysisError for clipped or multi-peak spectra.
LineMeasurement measure_fwhm(const Spectrum& s);

struct LorentzianFitOptions {
    int max_iterations = 200;
    double parameter_tolerance = 1e-10; // relative change per iteration
};

// Nonlinear least squares over (amplitude, center, width), initialized from
// the direct FWHM estimate (moments as fallback).
LineMeasurement fit_lorentzian(const Spectrum& s, const LorentzianFitOptions& opts = {});

// Least-squares fit of the finite-time emission line shape
//   A (1 - 2 cos((x-x0) t) e^{-g t/2} + e^{-g t}) / (g^2/4 + (x-x0)^2)
// with the elapsed time t known. Unlike a pure Lorentzian fit, the width g is
// unbiased at moderate g t; the two agree as t -> infinity.
LineMeasurement fit_decay_spectrum(const Spectrum& s, double elapsed,
                                   const LorentzianFitOptions& opts = {});

struct DrainFit {
    double gamma = 0.0;    // 1/tau_drain (1/s)
    double residual = 0.0; // rms of log-residuals
};

// Log-linear least squares on N(t) = N0 exp(-gamma t). Requires >= 10
// samples and monotone (within tolerance) decay.
DrainFit fit_drain_time(const std::vector<double>& times, const std::vector<double>& numbers,
                        double monotonic_tolerance = 1e-9);

// Time of the first crossing below N0/e, linearly interpolated. Robust
// drain-time estimate for non-exponential decays.
double inv_drain_time_crossing(const std::vector<double>& times,
                               const std::vector<double>& numbers);

// Integral width (integral S)^2 / (pi integral S^2): equals the FWHM exactly
// for a Lorentzian line and averages over ripple on structured lines.
double lorentzian_equivalent_width(const Spectrum& s);

// Local-maximum detection with a prominence threshold relative to the global
// maximum; per-peak FWHM by local interpolation.
std::vector<LineMeasurement> peak_decompose(const Spectrum& s, double prominence = 0.01);

struct SupportInterval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
};

// Central interval containing `fraction` of the spectral weight.
SupportInterval support_interval(const Spectrum& s, double fraction = 0.95);

// Weighted mean of the abscissa.
double spectral_centroid(const Spectrum& s);

// Abscissa of the maximum sample refined by a three-point parabola.
double spectral_peak_position(const Spectrum& s);

// Convert a wavenumber spectrum (k > 0 everywhere) to energy E = hbar^2 k^2 / 2m,
// multiplying the density by the Jacobian dk/dE.
Spectrum to_energy_spectrum(const Spectrum& s, double mass);

struct CenterTrack {
    std::vector<double> times;
    std::vector<double> centers;          // NaN where measurement failed
    std::vector<std::string> methods;
    int gaps = 0;                         // snapshots without a valid center
    int decreasing_steps = 0;             // consecutive valid pairs that decrease
    int valid_pairs = 0;
    double max_uptick = 0.0;              // largest increase between valid pairs
};

enum class CenterEstimator { direct_fwhm, centroid, support_mid };

CenterTrack track_line_center(const std::vector<Spectrum>& spectra,
                              CenterEstimator estimator = CenterEstimator::direct_fwhm);

} // namespace atomlaser
