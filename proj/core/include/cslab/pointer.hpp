#pragma once

#include <optional>
#include <vector>

#include "cslab/algebra.hpp"

namespace cslab {

/// Per-energy change of basis that diagonalizes the time-independent blocks
/// of a state: one unitary per continuum node (plus one for the bound
/// sector), with eigenvector columns tracked continuously across nodes.
struct PointerBasis {
    std::optional<Cmat> u_bound;
    std::optional<Eigen::VectorXd> eigen_bound;
    std::vector<Cmat> u_nodes;                 // K unitaries, M x M
    std::vector<Eigen::VectorXd> eigen_nodes;  // in the matched column order
    std::vector<double> continuity_overlap;    // min matched overlap per node
    std::vector<bool> degenerate;              // tie encountered at this node

    double unitarity_residual() const;
    /// Largest off-diagonal magnitude of U^dag B U over the given blocks.
    double offdiag_residual(const std::vector<Cmat>& blocks) const;
};

/// Hermitian eigendecomposition of every diagonal block.  Columns ordered by
/// descending eigenvalue at the first node, matched by maximal overlap at
/// subsequent nodes, phases fixed so the largest component is real positive.
PointerBasis diagonalize_sections(const StateFunctional& rho);

/// The commuting label observables P_i: diagonal in the pointer basis with
/// integer label digits as eigenvalues, constant across the spectrum.
std::vector<Observable> pointer_observables(const PointerBasis& basis,
                                            const SpectrumGrid& grid, const CscoSpec& csco);

/// max over the test set of |(rho*|[P,O])|.
double commutator_mean_residual(const StateFunctional& rho_star, const Observable& p,
                                const std::vector<Observable>& testset);

/// Partial trace over the non-isolating label factor: degeneracy must split
/// as M = m_r * m_m with composite label r*m_m + m.
StateFunctional trace_away_nonisolating(const StateFunctional& rho, int m_r, int m_m);

}  // namespace cslab
