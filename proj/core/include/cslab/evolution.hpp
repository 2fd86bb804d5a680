#pragma once

#include <optional>
#include <vector>

#include "cslab/algebra.hpp"

namespace cslab {

/// Evolved state at time t: diagonal blocks are carried over untouched, the
/// off-diagonal blocks pick up the oscillating energy-difference phases.
StateFunctional evolve(const StateFunctional& rho, double t);

/// <O>_{rho(t)}, evaluated directly with phase-weighted quadrature.
double mean_at(const StateFunctional& rho, const Observable& obs, double t);

/// The diagonal equilibrium functional: off-diagonal blocks dropped.
StateFunctional asymptotic_state(const StateFunctional& rho);

/// Discretization revival time 2*pi / min node spacing.  Beyond roughly half
/// of it the quadrature re-phases and the continuum decay statement fails.
double revival_horizon(const SpectrumGrid& grid);

enum class DecayModel { Gaussian, PowerLaw };

struct DecayFit {
    DecayModel model = DecayModel::Gaussian;
    double rate = 0.0;       // c in e^{-c t^2}, or p in t^{-p}
    double half_life = 0.0;
    double r_squared = 0.0;
};

struct DecoherenceCurve {
    std::vector<double> times;
    std::vector<double> means;
    std::vector<double> residuals;  // |<O>_t - <O>_*|
    double asymptotic_mean = 0.0;
    double revival_time = 0.0;
    std::optional<DecayFit> fitted_decay;
};

DecoherenceCurve decoherence_curve(const StateFunctional& rho, const Observable& obs,
                                   std::vector<double> times,
                                   bool allow_beyond_revival = false);

}  // namespace cslab
