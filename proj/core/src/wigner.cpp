#include "cslab/wigner.hpp"

#include <algorithm>
#include <cmath>

#include "cslab/stats.hpp"

namespace cslab {

namespace {

constexpr complexd kI{0.0, 1.0};

double tukey(double frac_of_window, double taper_fraction) {
    if (taper_fraction <= 0.0) return 1.0;
    const double start = 1.0 - taper_fraction;
    if (frac_of_window <= start) return 1.0;
    const double s = (frac_of_window - start) / taper_fraction;
    return 0.5 * (1.0 + std::cos(kPi * std::min(1.0, s)));
}

// Phase table P(k, j) = e^{2 i k dq p_j / hbar}, k >= 0.
Eigen::MatrixXcd phase_table(const PhaseGrid& g, int kmax) {
    Eigen::MatrixXcd table(kmax + 1, g.np());
    for (int j = 0; j < g.np(); ++j) {
        const complexd step = std::exp(2.0 * kI * g.dq * g.p_nodes[j] / g.hbar);
        complexd cur = 1.0;
        for (int k = 0; k <= kmax; ++k) {
            table(k, j) = cur;
            cur *= step;
        }
    }
    return table;
}

Eigen::VectorXcd fd_derivative(const Eigen::VectorXcd& f, double h) {
    const int n = static_cast<int>(f.size());
    Eigen::VectorXcd d(n);
    if (n == 1) {
        d(0) = 0.0;
        return d;
    }
    for (int i = 1; i + 1 < n; ++i) d(i) = (f(i + 1) - f(i - 1)) / (2.0 * h);
    d(0) = (f(1) - f(0)) / h;
    d(n - 1) = (f(n - 1) - f(n - 2)) / h;
    return d;
}

}  // namespace

PhaseGrid PhaseGrid::make(double q_halfwidth, int nq, double p_halfwidth, int np, double hbar) {
    if (nq < 2 || np < 2 || !(q_halfwidth > 0) || !(p_halfwidth > 0) || !(hbar > 0))
        throw InvalidArgument("PhaseGrid: bad dimensions");
    PhaseGrid g;
    g.hbar = hbar;
    g.dq = 2.0 * q_halfwidth / (nq - 1);
    g.dp = 2.0 * p_halfwidth / (np - 1);
    g.q_nodes.resize(nq);
    g.p_nodes.resize(np);
    for (int i = 0; i < nq; ++i) g.q_nodes[i] = -q_halfwidth + i * g.dq;
    for (int j = 0; j < np; ++j) g.p_nodes[j] = -p_halfwidth + j * g.dp;
    g.resolution_warning = g.dq * g.dp > hbar / 4.0;
    return g;
}

PhaseGrid PhaseGrid::conjugate(double q_halfwidth, int nq, double hbar) {
    PhaseGrid probe = make(q_halfwidth, nq, 1.0, nq, hbar);
    const double dp = kPi * hbar / (nq * probe.dq);
    return make(q_halfwidth, nq, 0.5 * dp * (nq - 1), nq, hbar);
}

double PositionKernel::hermiticity_residual() const {
    double r = 0.0;
    if (has_smooth()) r = std::max(r, (smooth - smooth.adjoint().eval()).cwiseAbs().maxCoeff());
    for (int i = 0; i < diag_delta.size(); ++i)
        r = std::max(r, std::abs(diag_delta(i).imag()));
    return r;
}

complexd PositionKernel::trace(double dq) const {
    complexd acc = 0.0;
    if (has_smooth()) acc += smooth.diagonal().sum() * dq;
    if (has_delta()) acc += diag_delta.sum();
    return acc;
}

WignerDensity wigner_transform_state(const PositionKernel& kernel, const PhaseGrid& grid,
                                     const TransformOptions& opts) {
    if (!kernel.has_smooth() || kernel.smooth.rows() != grid.nq() ||
        kernel.smooth.cols() != grid.nq())
        throw InvalidArgument("wigner_transform_state: kernel does not match the q grid");
    if (kernel.has_delta() || kernel.has_delta_prime())
        throw InvalidArgument("wigner_transform_state: states must be trace-class kernels");

    const int nq = grid.nq(), np = grid.np();
    const Eigen::MatrixXcd table = phase_table(grid, nq - 1);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(nq, np);
    const double scale = grid.dq / (kPi * grid.hbar);

    for (int i = 0; i < nq; ++i) {
        const int L = std::min(i, nq - 1 - i);
        for (int k = -L; k <= L; ++k) {
            const complexd val = kernel.smooth(i - k, i + k);
            if (val == 0.0) continue;
            const double tap =
                L > 0 ? tukey(std::abs(double(k)) / double(L), opts.taper_fraction) : 1.0;
            const complexd coeff = scale * tap * val;
            if (k >= 0)
                acc.row(i) += coeff * table.row(k);
            else
                acc.row(i) += coeff * table.row(-k).conjugate();
        }
    }

    WignerDensity out;
    out.values = acc.real();
    out.max_imag = acc.imag().cwiseAbs().maxCoeff();
    out.norm = out.values.sum() * grid.dq * grid.dp;
    return out;
}

Eigen::MatrixXcd wigner_transform_observable(const PositionKernel& kernel,
                                             const PhaseGrid& grid,
                                             const TransformOptions& opts) {
    const int nq = grid.nq(), np = grid.np();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(nq, np);

    if (kernel.has_smooth()) {
        if (kernel.smooth.rows() != nq || kernel.smooth.cols() != nq)
            throw InvalidArgument("wigner_transform_observable: kernel does not match the q grid");
        const Eigen::MatrixXcd table = phase_table(grid, nq - 1);
        const double scale = 2.0 * grid.dq;  // lambda step is 2 dq
        for (int i = 0; i < nq; ++i) {
            const int L = std::min(i, nq - 1 - i);
            for (int k = -L; k <= L; ++k) {
                const complexd val = kernel.smooth(i - k, i + k);
                if (val == 0.0) continue;
                const double tap =
                    L > 0 ? tukey(std::abs(double(k)) / double(L), opts.taper_fraction) : 1.0;
                const complexd coeff = scale * tap * val;
                if (k >= 0)
                    out.row(i) += coeff * table.row(k);
                else
                    out.row(i) += coeff * table.row(-k).conjugate();
            }
        }
    }
    if (kernel.has_delta()) {
        if (kernel.diag_delta.size() != nq)
            throw InvalidArgument("wigner_transform_observable: delta channel size mismatch");
        out.colwise() += kernel.diag_delta;
    }
    if (kernel.has_delta_prime()) {
        if (kernel.diag_delta_prime.size() != nq)
            throw InvalidArgument("wigner_transform_observable: delta' channel size mismatch");
        const Eigen::VectorXcd dp = fd_derivative(kernel.diag_delta_prime, grid.dq);
        out.colwise() -= 0.5 * dp;
        for (int j = 0; j < np; ++j)
            out.col(j) += kernel.diag_delta_prime * (kI * grid.p_nodes[j] / grid.hbar);
    }
    return out;
}

PositionKernel quantize_linear_symbol(const std::function<double(double)>& a,
                                      const std::function<double(double)>& b,
                                      const PhaseGrid& grid) {
    const int nq = grid.nq();
    PositionKernel k;
    if (a) {
        k.diag_delta.resize(nq);
        for (int i = 0; i < nq; ++i) k.diag_delta(i) = a(grid.q_nodes[i]);
    }
    if (b) {
        // Weyl symbol b(q) p: kernel -i hbar [b(x) delta' + b'(x)/2 delta].
        k.diag_delta_prime.resize(nq);
        if (k.diag_delta.size() == 0) k.diag_delta = Eigen::VectorXcd::Zero(nq);
        const double h = grid.dq;
        for (int i = 0; i < nq; ++i) {
            const double x = grid.q_nodes[i];
            const double bp = (b(x + h) - b(x - h)) / (2.0 * h);
            k.diag_delta_prime(i) = -kI * grid.hbar * b(x);
            k.diag_delta(i) += -kI * grid.hbar * 0.5 * bp;
        }
    }
    return k;
}

PositionKernel compose_kernels(const PositionKernel& a, const PositionKernel& b,
                               const PhaseGrid& grid) {
    if (a.has_delta_prime() && b.has_delta_prime())
        throw InvalidArgument("compose_kernels: delta'*delta' needs second-order channels");
    const int nq = grid.nq();
    const double dq = grid.dq;
    PositionKernel c;

    auto ensure_smooth = [&]() {
        if (!c.has_smooth()) c.smooth = Eigen::MatrixXcd::Zero(nq, nq);
    };
    auto ensure_d0 = [&]() {
        if (!c.has_delta()) c.diag_delta = Eigen::VectorXcd::Zero(nq);
    };
    auto ensure_d1 = [&]() {
        if (!c.has_delta_prime()) c.diag_delta_prime = Eigen::VectorXcd::Zero(nq);
    };

    if (a.has_smooth() && b.has_smooth()) {
        ensure_smooth();
        c.smooth.noalias() += dq * (a.smooth * b.smooth);
    }
    if (a.has_delta() && b.has_smooth()) {
        ensure_smooth();
        c.smooth += a.diag_delta.asDiagonal() * b.smooth;
    }
    if (a.has_smooth() && b.has_delta()) {
        ensure_smooth();
        c.smooth += a.smooth * b.diag_delta.asDiagonal();
    }
    if (a.has_delta() && b.has_delta()) {
        ensure_d0();
        c.diag_delta += a.diag_delta.cwiseProduct(b.diag_delta);
    }
    if (a.has_delta() && b.has_delta_prime()) {
        ensure_d1();
        c.diag_delta_prime += a.diag_delta.cwiseProduct(b.diag_delta_prime);
    }
    if (a.has_delta_prime() && b.has_delta()) {
        // D(x) d/dx acting on d0(x) delta(x-x'): product rule splits into
        // a delta and a delta' piece.
        ensure_d0();
        ensure_d1();
        c.diag_delta += a.diag_delta_prime.cwiseProduct(fd_derivative(b.diag_delta, dq));
        c.diag_delta_prime += a.diag_delta_prime.cwiseProduct(b.diag_delta);
    }
    if (a.has_delta_prime() && b.has_smooth()) {
        ensure_smooth();
        Eigen::MatrixXcd d1k(nq, nq);
        for (int j = 0; j < nq; ++j) d1k.col(j) = fd_derivative(b.smooth.col(j), dq);
        c.smooth += a.diag_delta_prime.asDiagonal() * d1k;
    }
    if (a.has_smooth() && b.has_delta_prime()) {
        ensure_smooth();
        Eigen::MatrixXcd d2k(nq, nq);
        for (int i = 0; i < nq; ++i)
            d2k.row(i) = fd_derivative(a.smooth.row(i).transpose(), dq).transpose();
        c.smooth -= d2k * b.diag_delta_prime.asDiagonal();
        c.smooth -= a.smooth * fd_derivative(b.diag_delta_prime, dq).asDiagonal();
    }
    return c;
}

double classical_mean(const WignerDensity& rho_w, const Eigen::MatrixXd& obs_w,
                      const PhaseGrid& grid) {
    if (rho_w.values.rows() != obs_w.rows() || rho_w.values.cols() != obs_w.cols())
        throw InvalidArgument("classical_mean: grid mismatch");
    return rho_w.values.cwiseProduct(obs_w).sum() * grid.dq * grid.dp;
}

complexd classical_mean(const WignerDensity& rho_w, const Eigen::MatrixXcd& obs_w,
                        const PhaseGrid& grid) {
    if (rho_w.values.rows() != obs_w.rows() || rho_w.values.cols() != obs_w.cols())
        throw InvalidArgument("classical_mean: grid mismatch");
    return (rho_w.values.cast<complexd>().cwiseProduct(obs_w)).sum() * grid.dq * grid.dp;
}

// ---------------------------------------------------------------------------
// Correspondence suite
// ---------------------------------------------------------------------------

namespace {

constexpr double kNoiseFloor = 1e-7;

struct GaussianSymbol {
    double qc, pc, sigma;
    double operator()(double q, double p) const {
        const double dq = q - qc, dp = p - pc;
        return std::exp(-(dq * dq + dp * dp) / (2.0 * sigma * sigma));
    }
    // Closed-form Weyl quantization of the phase-space gaussian.
    complexd kernel(double x, double xp, double hbar) const {
        const double qbar = 0.5 * (x + xp), lam = x - xp;
        const double env = std::exp(-(qbar - qc) * (qbar - qc) / (2.0 * sigma * sigma) -
                                    sigma * sigma * lam * lam / (2.0 * hbar * hbar));
        return sigma / (std::sqrt(2.0 * kPi) * hbar) * env *
               std::exp(kI * pc * lam / hbar);
    }
};

PositionKernel sample_kernel(const std::function<complexd(double, double)>& k,
                             const PhaseGrid& g) {
    PositionKernel out;
    out.smooth.resize(g.nq(), g.nq());
    for (int i = 0; i < g.nq(); ++i)
        for (int j = 0; j < g.nq(); ++j) out.smooth(i, j) = k(g.q_nodes[i], g.q_nodes[j]);
    return out;
}

// Max-abs over the central half of the grid (boundary rows are dominated by
// window truncation, not by the semiclassical defect being measured).
double central_max(const Eigen::MatrixXcd& m) {
    const int r0 = m.rows() / 4, r1 = m.rows() - m.rows() / 4;
    const int c0 = m.cols() / 4, c1 = m.cols() - m.cols() / 4;
    return m.block(r0, c0, r1 - r0, c1 - c0).cwiseAbs().maxCoeff();
}
double central_max(const Eigen::MatrixXd& m) {
    const int r0 = m.rows() / 4, r1 = m.rows() - m.rows() / 4;
    const int c0 = m.cols() / 4, c1 = m.cols() - m.cols() / 4;
    return m.block(r0, c0, r1 - r0, c1 - c0).cwiseAbs().maxCoeff();
}

double product_defect(const std::string& model, double hbar) {
    if (model == "commuting-position") {
        const PhaseGrid g = PhaseGrid::conjugate(4.0, 129, hbar);
        auto q = [](double x) { return x; };
        const PositionKernel k1 = quantize_linear_symbol(q, nullptr, g);
        const PositionKernel prod = compose_kernels(k1, k1, g);
        const Eigen::MatrixXcd w12 = wigner_transform_observable(prod, g);
        const Eigen::MatrixXcd w1 = wigner_transform_observable(k1, g);
        return central_max((w12 - w1.cwiseProduct(w1)).eval());
    }
    if (model == "position-momentum") {
        const PhaseGrid g = PhaseGrid::conjugate(4.0, 129, hbar);
        auto q = [](double x) { return x; };
        auto one = [](double) { return 1.0; };
        const PositionKernel kq = quantize_linear_symbol(q, nullptr, g);
        const PositionKernel kp = quantize_linear_symbol(nullptr, one, g);
        const PositionKernel prod = compose_kernels(kq, kp, g);
        const Eigen::MatrixXcd w12 = wigner_transform_observable(prod, g);
        const Eigen::MatrixXcd w1 = wigner_transform_observable(kq, g);
        const Eigen::MatrixXcd w2 = wigner_transform_observable(kp, g);
        return central_max((w12 - w1.cwiseProduct(w2)).eval());
    }
    if (model == "gaussian-pair") {
        const GaussianSymbol f1{0.4, 0.0, 1.0};
        const GaussianSymbol f2{0.0, 0.5, 1.0};
        const double dq_target = std::min(0.05, hbar / 3.0);
        const int nq = 2 * static_cast<int>(std::ceil(4.0 / dq_target)) + 1;
        PhaseGrid g = PhaseGrid::make(4.0, nq, 3.0, 121, hbar);
        TransformOptions opts;  // gaussian kernels vanish at the window edge
        const PositionKernel k1 =
            sample_kernel([&](double x, double xp) { return f1.kernel(x, xp, hbar); }, g);
        const PositionKernel k2 =
            sample_kernel([&](double x, double xp) { return f2.kernel(x, xp, hbar); }, g);
        const PositionKernel prod = compose_kernels(k1, k2, g);
        const Eigen::MatrixXcd w12 = wigner_transform_observable(prod, g, opts);
        const Eigen::MatrixXcd w1 = wigner_transform_observable(k1, g, opts);
        const Eigen::MatrixXcd w2 = wigner_transform_observable(k2, g, opts);
        return central_max((w12 - w1.cwiseProduct(w2)).eval());
    }
    throw InvalidArgument("correspondence_suite: unknown product model " + model);
}

struct CoherentState {
    double q0, p0;
    complexd amplitude(double x, double hbar) const {
        const double norm = std::pow(kPi * hbar, -0.25);
        return norm * std::exp(complexd(-(x - q0) * (x - q0) / (2.0 * hbar), p0 * x / hbar));
    }
    complexd d2_amplitude(double x, double hbar) const {
        const complexd s(-(x - q0) / hbar, p0 / hbar);
        return amplitude(x, hbar) * (s * s - 1.0 / hbar);
    }
    double wigner(double q, double p, double hbar) const {
        const double dq = q - q0, dp = p - p0;
        return std::exp(-(dq * dq + dp * dp) / hbar) / (kPi * hbar);
    }
};

double liouville_residual(const std::string& model, double hbar) {
    const CoherentState st{0.8, 0.4};
    std::function<double(double)> vpot, dvpot;  // potential and gradient
    if (model == "harmonic-liouville") {
        vpot = [](double x) { return 0.5 * x * x; };
        dvpot = [](double x) { return x; };
    } else if (model == "quartic-liouville") {
        vpot = [](double x) { return 0.25 * x * x * x * x; };
        dvpot = [](double x) { return x * x * x; };
    } else {
        throw InvalidArgument("correspondence_suite: unknown liouville model " + model);
    }

    const double p_need = std::abs(st.p0) + 5.0 * std::sqrt(hbar) + 0.5;
    const double q_half = std::abs(st.q0) + 5.0 * std::sqrt(hbar) + 0.7;
    double dq_target = std::min(std::sqrt(hbar) / 6.0, kPi * hbar / (2.2 * p_need));
    const int nq = 2 * static_cast<int>(std::ceil(q_half / dq_target)) + 1;
    const PhaseGrid g = PhaseGrid::make(q_half, nq, p_need, 161, hbar);

    // Quantum side: ([H, rho]/(i hbar)) as a position kernel, transformed.
    PositionKernel comm;
    comm.smooth.resize(g.nq(), g.nq());
    for (int i = 0; i < g.nq(); ++i) {
        const double x = g.q_nodes[i];
        const complexd fx = st.amplitude(x, hbar), d2fx = st.d2_amplitude(x, hbar);
        for (int j = 0; j < g.nq(); ++j) {
            const double xp = g.q_nodes[j];
            const complexd fxp = std::conj(st.amplitude(xp, hbar));
            const complexd d2fxp = std::conj(st.d2_amplitude(xp, hbar));
            const complexd kinetic = -0.5 * hbar * hbar * (d2fx * fxp - fx * d2fxp);
            const complexd potential = (vpot(x) - vpot(xp)) * fx * fxp;
            comm.smooth(i, j) = (kinetic + potential) / (kI * hbar);
        }
    }
    const WignerDensity lhs = wigner_transform_state(comm, g);

    // Classical side: {H, rho} with the closed-form gaussian derivatives.
    Eigen::MatrixXd pb(g.nq(), g.np());
    for (int i = 0; i < g.nq(); ++i)
        for (int j = 0; j < g.np(); ++j) {
            const double q = g.q_nodes[i], p = g.p_nodes[j];
            const double rho = st.wigner(q, p, hbar);
            const double drho_dq = -2.0 * (q - st.q0) / hbar * rho;
            const double drho_dp = -2.0 * (p - st.p0) / hbar * rho;
            pb(i, j) = dvpot(q) * drho_dp - p * drho_dq;
        }
    const double scale = pb.cwiseAbs().maxCoeff();
    return central_max((lhs.values - pb).eval()) / scale;
}

}  // namespace

std::vector<std::string> correspondence_model_names() {
    return {"commuting-position", "position-momentum", "gaussian-pair", "harmonic-liouville",
            "quartic-liouville"};
}

CorrespondenceReport correspondence_suite(std::span<const std::string> models,
                                          std::span<const double> hbar_series) {
    if (hbar_series.size() < 4)
        throw InvalidArgument("correspondence_suite: need at least 4 hbar values");
    for (std::size_t i = 1; i < hbar_series.size(); ++i)
        if (hbar_series[i] >= hbar_series[i - 1])
            throw InvalidArgument("correspondence_suite: hbar series must decrease");

    CorrespondenceReport rep;
    for (const auto& model : models) {
        const bool is_liouville = model.find("liouville") != std::string::npos;
        std::vector<double> lh, le;
        for (double hbar : hbar_series) {
            const double err =
                is_liouville ? liouville_residual(model, hbar) : product_defect(model, hbar);
            rep.entries.push_back({model, hbar, err});
            lh.push_back(std::log(hbar));
            le.push_back(std::log(std::max(err, 1e-300)));
        }
        CorrespondenceFit fit;
        fit.model = model;
        fit.kind = is_liouville ? "liouville" : "product";
        double emax = 0.0;
        for (std::size_t i = 0; i < hbar_series.size(); ++i)
            emax = std::max(emax, std::exp(le[i]));
        if (emax < kNoiseFloor) {
            fit.exact = true;
        } else {
            fit.slope = fit_line(lh, le).slope;
        }
        rep.fits.push_back(fit);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Mollified classical equilibrium densities
// ---------------------------------------------------------------------------

ClassicalModel harmonic_model() {
    ClassicalModel m;
    m.hamiltonian = [](double q, double p) { return 0.5 * (q * q + p * p); };
    m.shell_measure = [](double) { return 2.0 * kPi; };
    return m;
}

namespace {

double mollifier(double x, double eps) {
    const double u = x / eps;
    return std::exp(-0.5 * u * u) / (eps * std::sqrt(2.0 * kPi));
}

}  // namespace

StarDensity build_classical_star_density(const SpectrumGrid& sgrid,
                                         const std::vector<Eigen::VectorXd>& profiles,
                                         const std::vector<std::vector<double>>& label_values,
                                         const ClassicalModel& model, const PhaseGrid& pgrid,
                                         double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidArgument("build_classical_star_density: epsilon must be > 0");
    if (profiles.empty()) throw InvalidArgument("build_classical_star_density: no profiles");
    const std::size_t n_labels = profiles.size();
    if (label_values.size() != n_labels && !model.momenta.empty())
        throw InvalidArgument("build_classical_star_density: label values missing");
    const std::size_t nk = sgrid.size();
    for (const auto& pr : profiles) {
        if (static_cast<std::size_t>(pr.size()) != nk)
            throw InvalidArgument("build_classical_star_density: profile does not match grid");
        if (pr.minCoeff() < 0.0)
            throw InvalidArgument("build_classical_star_density: profiles must be nonnegative");
    }

    // Per-shell normalization: with a known level-set measure we integrate
    // g(h) delta_eps(h - w) in one dimension, independent of the phase grid;
    // otherwise the grid quadrature of the shell itself is used.
    std::vector<std::vector<double>> z(n_labels, std::vector<double>(nk, 1.0));
    const bool measure_route = static_cast<bool>(model.shell_measure) && model.momenta.empty();
    if (measure_route) {
        for (std::size_t k = 0; k < nk; ++k) {
            const double w = sgrid.nodes[k];
            const double a = std::max(0.0, w - 8.0 * epsilon), b = w + 8.0 * epsilon;
            const int steps = 400;
            const double h = (b - a) / steps;
            double acc = 0.0;
            for (int s = 0; s <= steps; ++s) {
                const double x = a + s * h;
                const double f = model.shell_measure(x) * mollifier(x - w, epsilon);
                acc += (s == 0 || s == steps) ? 0.5 * f : f;
            }
            const double zk = acc * h;
            for (std::size_t r = 0; r < n_labels; ++r) z[r][k] = zk;
        }
    }

    // captured by value: the evaluation callable outlives this frame
    auto point_value = [sgrid, profiles, label_values, model, epsilon, n_labels](
                           double q, double p, const std::vector<std::vector<double>>& zz) {
        const double h = model.hamiltonian(q, p);
        const double lo = h - 8.0 * epsilon, hi = h + 8.0 * epsilon;
        const std::size_t k0 =
            std::lower_bound(sgrid.nodes.begin(), sgrid.nodes.end(), lo) - sgrid.nodes.begin();
        const std::size_t k1 =
            std::upper_bound(sgrid.nodes.begin(), sgrid.nodes.end(), hi) - sgrid.nodes.begin();
        if (k0 >= k1) return 0.0;
        double acc = 0.0;
        for (std::size_t r = 0; r < n_labels; ++r) {
            double label_factor = 1.0;
            for (std::size_t l = 0; l < model.momenta.size(); ++l)
                label_factor *= mollifier(model.momenta[l](q, p) - label_values[r][l], epsilon);
            if (label_factor == 0.0) continue;
            for (std::size_t k = k0; k < k1; ++k) {
                const double pk = profiles[r](k);
                if (pk == 0.0) continue;
                acc += sgrid.weights[k] * pk * mollifier(h - sgrid.nodes[k], epsilon) *
                       label_factor / zz[r][k];
            }
        }
        return acc;
    };

    if (!measure_route) {
        // Grid quadrature of each shell's own mass.
        std::vector<std::vector<double>> acc(n_labels, std::vector<double>(nk, 0.0));
        for (int i = 0; i < pgrid.nq(); ++i)
            for (int j = 0; j < pgrid.np(); ++j) {
                const double q = pgrid.q_nodes[i], p = pgrid.p_nodes[j];
                const double h = model.hamiltonian(q, p);
                const std::size_t k0 = std::lower_bound(sgrid.nodes.begin(), sgrid.nodes.end(),
                                                        h - 8.0 * epsilon) -
                                       sgrid.nodes.begin();
                const std::size_t k1 = std::upper_bound(sgrid.nodes.begin(), sgrid.nodes.end(),
                                                        h + 8.0 * epsilon) -
                                       sgrid.nodes.begin();
                for (std::size_t r = 0; r < n_labels; ++r) {
                    double label_factor = 1.0;
                    for (std::size_t l = 0; l < model.momenta.size(); ++l)
                        label_factor *=
                            mollifier(model.momenta[l](q, p) - label_values[r][l], epsilon);
                    for (std::size_t k = k0; k < k1; ++k)
                        acc[r][k] += mollifier(h - sgrid.nodes[k], epsilon) * label_factor;
                }
            }
        for (std::size_t r = 0; r < n_labels; ++r)
            for (std::size_t k = 0; k < nk; ++k)
                z[r][k] = std::max(acc[r][k] * pgrid.dq * pgrid.dp, 1e-300);
    }

    StarDensity out;
    out.epsilon = epsilon;
    out.values.resize(pgrid.nq(), pgrid.np());
    for (int i = 0; i < pgrid.nq(); ++i)
        for (int j = 0; j < pgrid.np(); ++j)
            out.values(i, j) = point_value(pgrid.q_nodes[i], pgrid.p_nodes[j], z);
    out.mass = out.values.sum() * pgrid.dq * pgrid.dp;
    out.eval = [point_value, z](double q, double p) { return point_value(q, p, z); };
    return out;
}

MomentTable moment_check(const StarDensity& density, const ClassicalModel& model,
                         const PhaseGrid& grid, std::span<const int> orders, double omega,
                         std::span<const double> labels) {
    MomentTable table;
    const double cell = grid.dq * grid.dp;
    table.momenta.resize(model.momenta.size());
    for (int n : orders) {
        MomentRow row;
        row.order = n;
        row.target = std::pow(omega, n);
        double acc = 0.0;
        for (int i = 0; i < grid.nq(); ++i)
            for (int j = 0; j < grid.np(); ++j)
                acc += density.values(i, j) *
                       std::pow(model.hamiltonian(grid.q_nodes[i], grid.p_nodes[j]), n);
        row.value = acc * cell;
        row.error = std::abs(row.value - row.target);
        table.hamiltonian.push_back(row);

        for (std::size_t l = 0; l < model.momenta.size(); ++l) {
            MomentRow mrow;
            mrow.order = n;
            mrow.target = l < labels.size() ? std::pow(labels[l], n) : 0.0;
            double macc = 0.0;
            for (int i = 0; i < grid.nq(); ++i)
                for (int j = 0; j < grid.np(); ++j)
                    macc += density.values(i, j) *
                            std::pow(model.momenta[l](grid.q_nodes[i], grid.p_nodes[j]), n);
            mrow.value = macc * cell;
            mrow.error = std::abs(mrow.value - mrow.target);
            table.momenta[l].push_back(mrow);
        }
    }
    return table;
}

}  // namespace cslab
