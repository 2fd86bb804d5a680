#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cslab/spectral.hpp"
#include "cslab/wigner.hpp"

namespace cslab {

enum class ConstantClass { Isolating, NonIsolating };

/// Accepts "sqrt2", "sqrt3", "golden" symbolically (so incommensurability is
/// not at the mercy of decimal literals) or a plain numeric literal.
double parse_frequency(const std::string& token);

/// Action-angle model of an integrable (or partially integrable) flow:
/// constant actions, constant frequencies, linear angle advance.
struct FlowSpec {
    std::vector<double> actions;
    std::vector<double> frequencies;
    std::vector<double> initial_angles;
    std::vector<ConstantClass> classification;

    int n_dof() const { return static_cast<int>(frequencies.size()); }
    int n_isolating() const;
    void check() const;

    /// Modes |n| <= max_order with |n . frequencies| below the resonance
    /// guard; nearly commensurable inputs make equidistribution claims moot.
    std::vector<std::string> resonance_warnings(int max_order = 6) const;
};

/// Box-counting occupancy of the 2d angle marginals along the flow.  A pair
/// of degrees of freedom whose trajectory covers less than half the boxes
/// signals a closed lower-dimensional level set, which contradicts a
/// non-isolating declaration for the pair.
std::vector<std::string> occupancy_warnings(const FlowSpec& spec, double T, long samples,
                                            int boxes_per_dim = 16);

std::vector<double> integrate_flow(const FlowSpec& spec, double t);

struct WeylModeAverage {
    std::vector<int> mode;
    double magnitude = 0.0;
    double bound = 0.0;  // 2/(T |n.w|) + 2 pi / samples
    bool resonant = false;
};

struct ErgodicReport {
    std::vector<WeylModeAverage> weyl_averages;
    double time_avg = 0.0;
    double space_avg = 0.0;
    double gap = 0.0;
    double gap_trend_slope = 0.0;
    std::vector<std::string> warnings;
};

ErgodicReport equidistribution_test(const FlowSpec& spec,
                                    const std::vector<std::vector<int>>& modes, double T,
                                    long samples);

/// Time average of f along the flow vs the uniform torus average, with the
/// decay trend of the gap over a geometric ladder of horizons.
ErgodicReport ergodic_average_check(const FlowSpec& spec,
                                    const std::function<double(std::span<const double>)>& f,
                                    double T, long samples, int space_resolution = 64);

/// Equilibrium density on a level set: constant, normalized against the
/// angle volume, and a function of the isolating values only.
class MicrocanonicalDensity {
  public:
    MicrocanonicalDensity(int n_isolating, double angle_volume,
                          std::function<double(std::span<const double>)> profile = {});
    double value(std::span<const double> isolating_values) const;
    double angle_volume() const { return angle_volume_; }
    int n_isolating() const { return n_isolating_; }

  private:
    int n_isolating_;
    double angle_volume_;
    std::function<double(std::span<const double>)> profile_;
};

MicrocanonicalDensity microcanonical_density(const FlowSpec& spec);

/// Marginal energy density of a small subsystem against a bath with density
/// of states ~ E^nu, with the inverse temperature read off the log-linear
/// decay near the origin (density-weighted fit over [0, E_total/10]).
struct CanonicalMarginal {
    std::vector<double> e1;
    std::vector<double> density;
    double fitted_beta = 0.0;
    double beta_prediction = 0.0;  // nu / E_total
};

CanonicalMarginal canonical_from_microcanonical(double nu, double e_total,
                                                const SpectrumGrid& subsystem_grid);

/// w_beta[A] = integral e^{-beta H - gamma.H_i} A dq dp / same without A.
/// Fails when the Boltzmann weight has not decayed at the grid boundary.
double classical_thermal_functional(const std::function<double(double, double)>& a,
                                    double beta, std::span<const double> gammas,
                                    const ClassicalModel& model, const PhaseGrid& grid);

}  // namespace cslab
