#include "cslab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cslab {

std::string to_string(QuadScheme s) {
    switch (s) {
        case QuadScheme::UniformTrapezoid: return "uniform-trapezoid";
        case QuadScheme::GaussLegendre: return "gauss-legendre";
        case QuadScheme::GaussLaguerreMapped: return "gauss-laguerre-mapped";
    }
    return "unknown";
}

QuadScheme quad_scheme_from_string(const std::string& name) {
    if (name == "uniform-trapezoid") return QuadScheme::UniformTrapezoid;
    if (name == "gauss-legendre") return QuadScheme::GaussLegendre;
    if (name == "gauss-laguerre-mapped") return QuadScheme::GaussLaguerreMapped;
    throw InvalidArgument("unknown quadrature scheme: " + name);
}

double SpectrumGrid::min_spacing() const {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < nodes.size(); ++k) d = std::min(d, nodes[k] - nodes[k - 1]);
    return d;
}

void CscoSpec::check() const {
    if (bound_energy && *bound_energy >= 0.0)
        throw InvalidArgument("bound_energy must be strictly negative");
    if (degeneracy < 1) throw InvalidArgument("degeneracy must be >= 1");
    if (n_momenta < 0) throw InvalidArgument("n_momenta must be >= 0");
    if (n_isolating < 1 || n_isolating > n_momenta + 1)
        throw InvalidArgument("n_isolating must satisfy 1 <= A+1 <= N+1");
}

std::vector<int> CscoSpec::label_radices() const {
    // Distribute the prime factors of M over the momenta, round robin, so
    // that the product of radices is exactly M.  Reduces to {M} for N <= 1.
    const int n = std::max(n_momenta, 1);
    std::vector<int> radices(static_cast<std::size_t>(n), 1);
    int rem = degeneracy;
    std::size_t slot = 0;
    for (int p = 2; p <= rem; ++p) {
        while (rem % p == 0) {
            radices[slot % radices.size()] *= p;
            slot++;
            rem /= p;
        }
    }
    return radices;
}

std::vector<int> CscoSpec::label_digits(int label) const {
    const auto radices = label_radices();
    std::vector<int> digits(radices.size(), 0);
    for (std::size_t i = 0; i < radices.size(); ++i) {
        digits[i] = label % radices[i];
        label /= radices[i];
    }
    return digits;
}

namespace {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre_unit(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

// Gauss-Laguerre (weight e^{-x}) nodes/weights on [0,inf) by Newton on L_n.
void gauss_laguerre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == 0) {
            z = 3.0 / (1.0 + 2.4 * n);
        } else if (i == 1) {
            z += 15.0 / (1.0 + 2.5 * n);
        } else {
            const double ai = i - 1;
            z += ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - x[i - 2]);
        }
        double p1 = 1.0, p2 = 0.0;
        for (int it = 0; it < 200; ++it) {
            p1 = 1.0;
            p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0 - z) * p2 - j * p3) / (j + 1);
            }
            const double pp = n * (p1 - p2) / z;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-14 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        // w_i = x_i / ((n+1) L_{n+1}(x_i))^2, evaluated via the recurrence.
        double l1 = 1.0, l2 = 0.0;
        for (int j = 0; j < n + 1; ++j) {
            const double l3 = l2;
            l2 = l1;
            l1 = ((2.0 * j + 1.0 - z) * l2 - j * l3) / (j + 1);
        }
        const double lnp1 = (n + 1) * l1;
        w[i] = z / (lnp1 * lnp1);
    }
}

}  // namespace

SpectrumGrid build_grid(QuadScheme scheme, int node_count, double omega_max) {
    if (node_count < 2) throw InvalidArgument("build_grid: node_count must be >= 2");
    if (!(omega_max > 0.0)) throw InvalidArgument("build_grid: omega_max must be > 0");

    SpectrumGrid g;
    g.omega_max = omega_max;
    g.scheme = scheme;
    const int n = node_count;

    switch (scheme) {
        case QuadScheme::UniformTrapezoid: {
            const double h = omega_max / (n - 1);
            g.nodes.resize(n);
            g.weights.assign(n, h);
            for (int k = 0; k < n; ++k) g.nodes[k] = k * h;
            // The omega=0 endpoint is nudged into the open interval; for any
            // finite sample it is indistinguishable from 0.
            g.nodes[0] = std::numeric_limits<double>::min();
            g.weights.front() = 0.5 * h;
            g.weights.back() = 0.5 * h;
            break;
        }
        case QuadScheme::GaussLegendre: {
            std::vector<double> x, w;
            gauss_legendre_unit(n, x, w);
            g.nodes.resize(n);
            g.weights.resize(n);
            for (int k = 0; k < n; ++k) {
                g.nodes[k] = 0.5 * omega_max * (x[k] + 1.0);
                g.weights[k] = 0.5 * omega_max * w[k];
            }
            break;
        }
        case QuadScheme::GaussLaguerreMapped: {
            // Half-line rule with the e^{-x} weight folded out, rescaled so
            // the largest node sits at omega_max.  Not a finite-interval
            // scheme: the weight sum approximates the covered measure, not
            // omega_max.
            std::vector<double> x, w;
            gauss_laguerre(n, x, w);
            const double c = omega_max / x.back();
            g.nodes.resize(n);
            g.weights.resize(n);
            for (int k = 0; k < n; ++k) {
                g.nodes[k] = c * x[k];
                g.weights[k] = c * w[k] * std::exp(x[k]);
            }
            break;
        }
    }
    return g;
}

double integrate(const SpectrumGrid& grid, std::span<const double> f) {
    if (f.size() != grid.size())
        throw InvalidArgument("integrate: sample count does not match grid");
    double acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) acc += grid.weights[k] * f[k];
    return acc;
}

complexd integrate(const SpectrumGrid& grid, std::span<const complexd> f) {
    if (f.size() != grid.size())
        throw InvalidArgument("integrate: sample count does not match grid");
    complexd acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) acc += grid.weights[k] * f[k];
    return acc;
}

double truncation_bound(const SpectrumGrid& grid, double beta) {
    if (beta <= 0.0) return std::numeric_limits<double>::infinity();
    return std::exp(-beta * grid.omega_max) / beta;
}

}  // namespace cslab
