#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cslab/algebra.hpp"

namespace cslab {

/// Multipliers of the maximum-entropy solution: inverse temperature beta,
/// the grid partition normalization Z, and optional label multipliers.
struct ThermalParams {
    double beta = 1.0;
    double z = 0.0;                // continuum partition, energy units
    std::vector<double> gammas;    // one per momentum, empty = canonical
    double truncation_err = 0.0;   // e^{-beta*omega_max}/beta tail bound
};

struct ThermalTargets {
    double energy = 1.0;
    std::optional<std::vector<double>> momentum_means;
};

/// Newton (with bisection safeguard) on the monotone moment map beta -> E.
ThermalParams solve_thermal_params(const SpectrumGrid& grid, const CscoSpec& csco,
                                   const ThermalTargets& targets);

/// -integral of rho log rho with 0 log 0 = 0.  Density must be nonnegative.
double shannon_entropy(const SpectrumGrid& grid, std::span<const double> density);

/// Diagonal canonical (or generalized grand-canonical) state on the
/// continuum: rho(w)_{rr} = e^{-beta w} e^{-gamma.r} / Z_total.
StateFunctional build_kms_state(const SpectrumGrid& grid, const CscoSpec& csco,
                                const ThermalParams& params);

/// w_beta[A] = (I|e^{-beta H - gamma.P} A) / (I|e^{-beta H - gamma.P}),
/// evaluated through the weighted diagonal-kernel integral.
double thermal_functional(const Observable& a, const CscoSpec& csco,
                          const ThermalParams& params);

/// Two-sided thermal correlators F(z) = w[B a_z(A)], G(t) = w[a_t(A) B] on a
/// time grid and an analyticity-strip lattice 0 < gamma < beta.
struct KmsCorrelators {
    double beta = 0.0;
    std::vector<double> t_grid;
    std::vector<complexd> f_values;    // F on the real line (gamma -> 0+)
    std::vector<complexd> g_values;    // G(t)
    std::vector<complexd> f_at_ibeta;  // F(t + i*beta) boundary row
    std::vector<double> gamma_grid;    // interior strip rows
    std::vector<std::vector<complexd>> strip;  // strip[row][t]
};

KmsCorrelators kms_correlators(const Observable& a, const Observable& b,
                               const ThermalParams& params, std::vector<double> t_grid,
                               std::vector<double> gamma_grid);

struct KmsReport {
    double boundary_residual = 0.0;   // max_t |G(t) - F(t+i beta)|
    double boundary_scale = 0.0;      // max_t |G(t)|
    double analyticity_residual = 0.0;
    struct CrSample {
        double t, gamma, residual;
    };
    std::vector<CrSample> cr_samples;
};

KmsReport verify_kms(const KmsCorrelators& corr, const ThermalParams& params);

}  // namespace cslab
