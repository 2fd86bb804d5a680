#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cslab/common.hpp"

namespace cslab {

enum class QuadScheme {
    UniformTrapezoid,
    GaussLegendre,
    GaussLaguerreMapped,
};

std::string to_string(QuadScheme s);
QuadScheme quad_scheme_from_string(const std::string& name);

/// Quadrature discretization of the continuum energy half-line, truncated at
/// omega_max.  Nodes live in (0, omega_max], weights are positive, and for
/// the finite-interval schemes the weights sum to omega_max.
struct SpectrumGrid {
    double omega_max = 0.0;
    std::vector<double> nodes;
    std::vector<double> weights;
    QuadScheme scheme = QuadScheme::GaussLegendre;

    std::size_t size() const { return nodes.size(); }

    /// Smallest spacing between adjacent nodes (sets the revival horizon of
    /// any discretized oscillatory integral on this grid).
    double min_spacing() const;
};

/// Labels of the commuting set: optional bound energy, degeneracy count M of
/// the discrete indices, number N of momentum observables and A+1 isolating
/// constants among {H, P_1..P_N}.
struct CscoSpec {
    std::optional<double> bound_energy;  // < 0 when present
    int degeneracy = 1;                  // M >= 1
    int n_momenta = 0;                   // N >= 0
    int n_isolating = 1;                 // A+1, with 0 <= A <= N

    bool has_bound() const { return bound_energy.has_value(); }
    void check() const;

    /// Mixed-radix label layout: degeneracy M factored over the N momenta.
    /// Digit i of a label r (0..M-1) is the eigenvalue r_i of P_i.
    std::vector<int> label_radices() const;
    std::vector<int> label_digits(int label) const;
};

SpectrumGrid build_grid(QuadScheme scheme, int node_count, double omega_max);

double integrate(const SpectrumGrid& grid, std::span<const double> f);
complexd integrate(const SpectrumGrid& grid, std::span<const complexd> f);

/// Tail bound e^{-beta*omega_max}/beta for the half-line truncation; reported
/// alongside every thermal result.
double truncation_bound(const SpectrumGrid& grid, double beta);

}  // namespace cslab
