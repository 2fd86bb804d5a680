#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cslab/common.hpp"
#include "cslab/spectral.hpp"

namespace cslab {

/// Uniform (q,p) grid, symmetric about the origin, with the effective
/// semiclassical parameter attached.
struct PhaseGrid {
    std::vector<double> q_nodes;
    std::vector<double> p_nodes;
    double dq = 0.0;
    double dp = 0.0;
    double hbar = 1.0;
    bool resolution_warning = false;  // dq*dp > hbar/4

    static PhaseGrid make(double q_halfwidth, int nq, double p_halfwidth, int np, double hbar);
    /// p spacing matched to the q lattice (dp = pi*hbar/(nq*dq)) so the
    /// transform phases are orthogonal over the p window.
    static PhaseGrid conjugate(double q_halfwidth, int nq, double hbar);

    int nq() const { return static_cast<int>(q_nodes.size()); }
    int np() const { return static_cast<int>(p_nodes.size()); }
};

/// Position-representation kernel split into a smooth sampled part and the
/// singular diagonal channels d0(x) delta(x-x') and d1(x) delta'(x-x').
/// States are trace-class and use only the smooth part; multiplication
/// operators and first-order momentum polynomials live in the channels.
struct PositionKernel {
    Eigen::MatrixXcd smooth;            // size 0 when absent
    Eigen::VectorXcd diag_delta;        // d0
    Eigen::VectorXcd diag_delta_prime;  // d1

    bool has_smooth() const { return smooth.size() > 0; }
    bool has_delta() const { return diag_delta.size() > 0; }
    bool has_delta_prime() const { return diag_delta_prime.size() > 0; }

    double hermiticity_residual() const;
    /// Trace with the dq measure (smooth diagonal plus the delta channel).
    complexd trace(double dq) const;
};

struct WignerDensity {
    Eigen::MatrixXd values;  // nq x np
    double norm = 0.0;
    double max_imag = 0.0;   // largest imaginary residual discarded
};

struct TransformOptions {
    double taper_fraction = 0.1;  // cosine taper on the outer window fraction
};

/// State-convention transform (1/(pi hbar)) integral of rho(q-l, q+l)
/// e^{2 i l p / hbar} dl, evaluated per center by uniform quadrature.
WignerDensity wigner_transform_state(const PositionKernel& kernel, const PhaseGrid& grid,
                                     const TransformOptions& opts = {});

/// Observable-convention transform: smooth part by quadrature over
/// even-separation anti-diagonals, channels analytically
/// (d0 -> d0(q); d1 -> -d1'(q)/2 + d1(q) i p / hbar).
Eigen::MatrixXcd wigner_transform_observable(const PositionKernel& kernel,
                                             const PhaseGrid& grid,
                                             const TransformOptions& opts = {});

/// Weyl quantization of the symbol a(q) + b(q) p into the singular channels.
PositionKernel quantize_linear_symbol(const std::function<double(double)>& a,
                                      const std::function<double(double)>& b,
                                      const PhaseGrid& grid);

/// Operator product of channel kernels with the dq integration measure.
/// delta' composed with delta' (second-order singularities) is unsupported.
PositionKernel compose_kernels(const PositionKernel& a, const PositionKernel& b,
                               const PhaseGrid& grid);

double classical_mean(const WignerDensity& rho_w, const Eigen::MatrixXd& obs_w,
                      const PhaseGrid& grid);
complexd classical_mean(const WignerDensity& rho_w, const Eigen::MatrixXcd& obs_w,
                        const PhaseGrid& grid);

/// Correspondence scaling study over a decreasing hbar series: product-rule
/// defect and Liouville-bracket residual per built-in model, with log-log
/// slope fits.  Errors below the noise floor report exact correspondence.
struct CorrespondenceEntry {
    std::string model;
    double hbar = 0.0;
    double error = 0.0;  // product defect or relative Liouville residual
};
struct CorrespondenceFit {
    std::string model;
    std::string kind;  // "product" or "liouville"
    double slope = 0.0;
    bool exact = false;  // all errors at the numerical noise floor
};
struct CorrespondenceReport {
    std::vector<CorrespondenceEntry> entries;
    std::vector<CorrespondenceFit> fits;
};

std::vector<std::string> correspondence_model_names();
CorrespondenceReport correspondence_suite(std::span<const std::string> models,
                                          std::span<const double> hbar_series);

/// Classical observables entering shell densities and thermal integrals.
struct ClassicalModel {
    std::function<double(double q, double p)> hamiltonian;
    std::vector<std::function<double(double q, double p)>> momenta;
    /// Level-set measure g(w) of the Hamiltonian alone, when known in closed
    /// form (2*pi for the harmonic oscillator); enables an independent
    /// normalization of mollified shells.
    std::function<double(double w)> shell_measure;
};

ClassicalModel harmonic_model();

/// Mollified equilibrium density sum_r integral rho_r(w) delta_eps(H - w)
/// prod_i delta_eps(P_i - r_i) dw, normalized shell by shell.
struct StarDensity {
    Eigen::MatrixXd values;  // on the phase grid
    double epsilon = 0.0;
    double mass = 0.0;       // grid quadrature of values
    std::function<double(double q, double p)> eval;
};

StarDensity build_classical_star_density(const SpectrumGrid& sgrid,
                                         const std::vector<Eigen::VectorXd>& profiles,
                                         const std::vector<std::vector<double>>& label_values,
                                         const ClassicalModel& model, const PhaseGrid& pgrid,
                                         double epsilon);

struct MomentRow {
    int order = 0;
    double value = 0.0;
    double target = 0.0;
    double error = 0.0;
};
struct MomentTable {
    std::vector<MomentRow> hamiltonian;
    std::vector<std::vector<MomentRow>> momenta;  // per momentum observable
};

MomentTable moment_check(const StarDensity& density, const ClassicalModel& model,
                         const PhaseGrid& grid, std::span<const int> orders, double omega,
                         std::span<const double> labels = {});

}  // namespace cslab
