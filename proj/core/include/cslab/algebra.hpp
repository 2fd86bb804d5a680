#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cslab/common.hpp"
#include "cslab/spectral.hpp"

namespace cslab {

using Cmat = Eigen::MatrixXcd;

/// One rank-one (in energy) term of a separable kernel: the kernel value at
/// node pair (i,j) is the matrix product u[i] * v[j] in the degeneracy
/// indices.  Scalar-profile kernels are the M=1 case.
struct SeparableTerm {
    std::vector<Cmat> u;  // one M x M factor per node
    std::vector<Cmat> v;
};

/// Continuum kernel block O(w,w')_{mm'}: either a dense sampling (one K x K
/// plane per (m,m') pair, plane index m*M+m') or a sum of separable terms.
/// An empty block is the zero kernel.
struct KernelBlock {
    std::vector<Cmat> planes;          // dense path, M*M planes of K x K
    std::vector<SeparableTerm> terms;  // separable path

    bool is_zero() const { return planes.empty() && terms.empty(); }
    bool is_dense() const { return !planes.empty(); }

    /// Kernel value at node pair (i,j) as an M x M matrix.
    Cmat at(std::size_t i, std::size_t j, int m_dim) const;
};

KernelBlock densify(const KernelBlock& block, std::size_t n_nodes, int m_dim);

/// Shared five-block layout of observables and their dual state functionals:
/// bound-bound, continuum diagonal, the two bound-continuum cross strips,
/// and the full continuum kernel.
struct FiveBlocks {
    SpectrumGrid grid;
    CscoSpec csco;

    Cmat bb;                    // M x M, used only when csco.has_bound()
    std::vector<Cmat> cc_diag;  // K entries of M x M
    std::vector<Cmat> cross_lo; // K entries, the (w, w0) strip
    std::vector<Cmat> cross_ol; // K entries, the (w0, w') strip
    KernelBlock full;

    int m_dim() const { return csco.degeneracy; }
    std::size_t n_nodes() const { return grid.size(); }
    bool has_cross() const;
};

struct Observable : FiveBlocks {};
struct StateFunctional : FiveBlocks {};

/// Zero-initialized block set on the given grid (full block empty = zero).
FiveBlocks zero_blocks(const SpectrumGrid& grid, const CscoSpec& csco);

inline Observable zero_observable(const SpectrumGrid& g, const CscoSpec& c) {
    Observable o;
    static_cast<FiveBlocks&>(o) = zero_blocks(g, c);
    return o;
}
inline StateFunctional zero_state(const SpectrumGrid& g, const CscoSpec& c) {
    StateFunctional s;
    static_cast<FiveBlocks&>(s) = zero_blocks(g, c);
    return s;
}

bool same_grid(const FiveBlocks& a, const FiveBlocks& b);

Observable make_identity(const SpectrumGrid& grid, const CscoSpec& csco);

/// Mean value (rho|O): the five-term sum of conjugated state coefficients
/// against observable coefficients, integrals evaluated on the grid.
complexd pair_complex(const StateFunctional& rho, const Observable& obs);
double pair(const StateFunctional& rho, const Observable& obs);

/// Operator product on the continuum blocks (bound-bound multiplies
/// separately; bound-continuum cross strips are not supported here).
Observable compose(const Observable& a, const Observable& b);

/// Generalized trace Tr A = (I|A): the bound trace plus the integrated trace
/// of the continuum diagonal block.  The regular kernel carries no singular
/// diagonal and does not contribute.
complexd op_trace(const Observable& a);

struct ValidationReport {
    double hermiticity_residual = 0.0;
    double min_diagonal_entry = 0.0;       // states: min over diagonal entries
    double normalization_deviation = 0.0;  // states: |trace - 1|
    double min_diag_block_eigenvalue = 0.0;
    bool psd_warning = false;

    bool ok(double tol = 1e-10) const {
        return hermiticity_residual < tol && min_diagonal_entry > -tol &&
               normalization_deviation < tol;
    }
};

ValidationReport validate(const Observable& obs);
ValidationReport validate(const StateFunctional& rho);

/// Total probability carried by the diagonal blocks.
double state_norm(const StateFunctional& rho);

/// alpha*A + beta*B blockwise.  Separable full blocks concatenate their
/// term lists; mixed representations densify.
Observable lin_comb(complexd alpha, const Observable& a, complexd beta, const Observable& b);

/// Largest absolute deviation from kernel self-adjointness over all blocks.
double hermiticity_residual(const FiveBlocks& x);

}  // namespace cslab
