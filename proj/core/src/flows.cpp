#include "cslab/flows.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "cslab/stats.hpp"

namespace cslab {

double parse_frequency(const std::string& token) {
    if (token == "sqrt2") return std::sqrt(2.0);
    if (token == "sqrt3") return std::sqrt(3.0);
    if (token == "golden") return 0.5 * (1.0 + std::sqrt(5.0));
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &pos);
    } catch (const std::exception&) {
        throw InvalidArgument("parse_frequency: cannot parse '" + token + "'");
    }
    if (pos != token.size())
        throw InvalidArgument("parse_frequency: trailing characters in '" + token + "'");
    return v;
}

int FlowSpec::n_isolating() const {
    int a = 0;
    for (auto c : classification)
        if (c == ConstantClass::Isolating) ++a;
    return a;
}

void FlowSpec::check() const {
    const std::size_t n = frequencies.size();
    if (n == 0) throw InvalidArgument("FlowSpec: no degrees of freedom");
    if (actions.size() != n || initial_angles.size() != n)
        throw InvalidArgument("FlowSpec: actions/angles size mismatch");
    if (!classification.empty() && classification.size() != n)
        throw InvalidArgument("FlowSpec: classification size mismatch");
}

std::vector<std::string> FlowSpec::resonance_warnings(int max_order) const {
    std::vector<std::string> warnings;
    const int d = n_dof();
    if (d < 2) return warnings;
    // enumerate integer vectors |n_i| <= max_order, skipping zero and sign copies
    std::vector<int> n(d, -max_order);
    const auto advance = [&]() {
        for (int i = 0; i < d; ++i) {
            if (n[i] < max_order) {
                ++n[i];
                return true;
            }
            n[i] = -max_order;
        }
        return false;
    };
    do {
        bool zero = true, leading_positive = false;
        for (int i = d - 1; i >= 0; --i)
            if (n[i] != 0) {
                zero = false;
                leading_positive = n[i] > 0;
                break;
            }
        if (zero || !leading_positive) continue;
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += n[i] * frequencies[i];
        if (std::abs(dot) < 1e-6) {
            std::string s = "near-resonant mode (";
            for (int i = 0; i < d; ++i) s += (i ? "," : "") + std::to_string(n[i]);
            s += "): |n.w| = " + std::to_string(std::abs(dot));
            warnings.push_back(s);
        }
    } while (advance());
    return warnings;
}

std::vector<std::string> occupancy_warnings(const FlowSpec& spec, double T, long samples,
                                            int boxes_per_dim) {
    spec.check();
    std::vector<std::string> warnings;
    const int d = spec.n_dof();
    const double dt = T / static_cast<double>(samples);
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            std::vector<char> visited(boxes_per_dim * boxes_per_dim, 0);
            for (long s = 0; s < samples; ++s) {
                const double t = (s + 0.5) * dt;
                auto box_of = [&](int dof) {
                    const double a = spec.initial_angles[dof] + spec.frequencies[dof] * t;
                    const double frac = a / (2.0 * kPi) - std::floor(a / (2.0 * kPi));
                    return std::min(boxes_per_dim - 1, static_cast<int>(frac * boxes_per_dim));
                };
                visited[box_of(i) * boxes_per_dim + box_of(j)] = 1;
            }
            long count = 0;
            for (char v : visited) count += v;
            const double frac = count / static_cast<double>(boxes_per_dim * boxes_per_dim);
            // a closed level set is legitimate for isolating constants but
            // contradicts a non-isolating declaration
            const bool involves_nonisolating =
                !spec.classification.empty() &&
                (spec.classification[i] == ConstantClass::NonIsolating ||
                 spec.classification[j] == ConstantClass::NonIsolating);
            if (frac < 0.5 && involves_nonisolating)
                warnings.push_back("angle pair (" + std::to_string(i) + "," +
                                   std::to_string(j) + ") occupies only " +
                                   std::to_string(frac) +
                                   " of the torus boxes; declared non-isolating constant "
                                   "generates a closed level set");
        }
    }
    return warnings;
}

std::vector<double> integrate_flow(const FlowSpec& spec, double t) {
    spec.check();
    std::vector<double> angles(spec.n_dof());
    for (int j = 0; j < spec.n_dof(); ++j) {
        const double a = spec.initial_angles[j] + spec.frequencies[j] * t;
        angles[j] = a - 2.0 * kPi * std::floor(a / (2.0 * kPi));
    }
    return angles;
}

ErgodicReport equidistribution_test(const FlowSpec& spec,
                                    const std::vector<std::vector<int>>& modes, double T,
                                    long samples) {
    spec.check();
    if (!(T > 0.0) || samples < 1) throw InvalidArgument("equidistribution_test: bad T/samples");
    ErgodicReport rep;
    rep.warnings = spec.resonance_warnings();
    const int d = spec.n_dof();
    const double dt = T / static_cast<double>(samples);

    for (const auto& mode : modes) {
        if (static_cast<int>(mode.size()) != d)
            throw InvalidArgument("equidistribution_test: mode dimension mismatch");
        double nu = 0.0, a0 = 0.0;
        for (int i = 0; i < d; ++i) {
            nu += mode[i] * spec.frequencies[i];
            a0 += mode[i] * spec.initial_angles[i];
        }
        // midpoint Riemann sum of e^{i(nu t + a0)} over [0, T]
        complexd acc = 0.0;
        const complexd step = std::exp(complexd(0.0, nu * dt));
        complexd cur = std::exp(complexd(0.0, a0 + 0.5 * nu * dt));
        for (long s = 0; s < samples; ++s) {
            acc += cur;
            cur *= step;
        }
        WeylModeAverage w;
        w.mode = mode;
        w.magnitude = std::abs(acc) / static_cast<double>(samples);
        w.resonant = std::abs(nu) < 1e-12;
        w.bound = w.resonant
                      ? 1.0
                      : 2.0 / (T * std::abs(nu)) + 2.0 * kPi / static_cast<double>(samples);
        rep.weyl_averages.push_back(std::move(w));
    }
    return rep;
}

namespace {

double time_average(const FlowSpec& spec,
                    const std::function<double(std::span<const double>)>& f, double T,
                    long samples) {
    const int d = spec.n_dof();
    std::vector<double> angles(d);
    const double dt = T / static_cast<double>(samples);
    double acc = 0.0;
    for (long s = 0; s < samples; ++s) {
        const double t = (s + 0.5) * dt;
        for (int j = 0; j < d; ++j) {
            const double a = spec.initial_angles[j] + spec.frequencies[j] * t;
            angles[j] = a - 2.0 * kPi * std::floor(a / (2.0 * kPi));
        }
        acc += f(angles);
    }
    return acc / static_cast<double>(samples);
}

double space_average(int d, const std::function<double(std::span<const double>)>& f,
                     int resolution) {
    // tensor-product rectangle rule; spectrally accurate for periodic f
    std::vector<int> idx(d, 0);
    std::vector<double> angles(d);
    double acc = 0.0;
    long count = 0;
    while (true) {
        for (int j = 0; j < d; ++j) angles[j] = (idx[j] + 0.5) * 2.0 * kPi / resolution;
        acc += f(angles);
        ++count;
        int j = 0;
        for (; j < d; ++j) {
            if (++idx[j] < resolution) break;
            idx[j] = 0;
        }
        if (j == d) break;
    }
    return acc / static_cast<double>(count);
}

}  // namespace

ErgodicReport ergodic_average_check(const FlowSpec& spec,
                                    const std::function<double(std::span<const double>)>& f,
                                    double T, long samples, int space_resolution) {
    spec.check();
    if (!(T > 0.0) || samples < 8) throw InvalidArgument("ergodic_average_check: bad T/samples");
    ErgodicReport rep;
    rep.warnings = spec.resonance_warnings();
    rep.space_avg = space_average(spec.n_dof(), f, space_resolution);
    rep.time_avg = time_average(spec, f, T, samples);
    rep.gap = std::abs(rep.time_avg - rep.space_avg);

    // Trend of the gap over a geometric ladder of horizons; each point is
    // averaged over three nearby horizons to step around the zeros of the
    // oscillatory prefactor.
    std::vector<double> lx, ly;
    for (int lvl = 3; lvl >= 0; --lvl) {
        const double tl = T / std::pow(8.0, lvl);
        double g = 0.0;
        for (double fct : {1.0, 1.09, 1.21}) {
            const long ns = std::max<long>(64, static_cast<long>(samples / std::pow(8.0, lvl)));
            g += std::abs(time_average(spec, f, tl * fct, ns) - rep.space_avg);
        }
        g /= 3.0;
        if (g > 0.0) {
            lx.push_back(std::log(tl));
            ly.push_back(std::log(g));
        }
    }
    rep.gap_trend_slope = fit_line(lx, ly).slope;
    return rep;
}

MicrocanonicalDensity::MicrocanonicalDensity(
    int n_isolating, double angle_volume,
    std::function<double(std::span<const double>)> profile)
    : n_isolating_(n_isolating), angle_volume_(angle_volume), profile_(std::move(profile)) {}

double MicrocanonicalDensity::value(std::span<const double> isolating_values) const {
    if (static_cast<int>(isolating_values.size()) != n_isolating_)
        throw InvalidArgument("MicrocanonicalDensity: expected isolating values only");
    const double base = 1.0 / angle_volume_;
    return profile_ ? base * profile_(isolating_values) : base;
}

MicrocanonicalDensity microcanonical_density(const FlowSpec& spec) {
    spec.check();
    const double vol = std::pow(2.0 * kPi, spec.n_dof());
    const int n_iso = spec.classification.empty() ? spec.n_dof() : spec.n_isolating();
    return MicrocanonicalDensity(n_iso, vol);
}

CanonicalMarginal canonical_from_microcanonical(double nu, double e_total,
                                                const SpectrumGrid& subsystem_grid) {
    if (!(nu >= 1.0)) throw InvalidArgument("canonical_from_microcanonical: nu must be >= 1");
    if (!(e_total > 0.0)) throw InvalidArgument("canonical_from_microcanonical: bad E_total");
    CanonicalMarginal out;
    out.beta_prediction = nu / e_total;

    double z = 0.0;
    for (std::size_t k = 0; k < subsystem_grid.size(); ++k) {
        const double e1 = subsystem_grid.nodes[k];
        if (e1 >= e_total) continue;
        z += subsystem_grid.weights[k] * std::pow(e_total - e1, nu);
    }
    std::vector<double> lx, ly, lw;
    for (std::size_t k = 0; k < subsystem_grid.size(); ++k) {
        const double e1 = subsystem_grid.nodes[k];
        const double p = e1 < e_total ? std::pow(e_total - e1, nu) / z : 0.0;
        out.e1.push_back(e1);
        out.density.push_back(p);
        if (p > 0.0 && e1 <= e_total / 10.0) {
            lx.push_back(e1);
            ly.push_back(std::log(p));
            lw.push_back(subsystem_grid.weights[k] * p);  // density-weighted fit
        }
    }
    if (lx.size() < 3)
        throw InvalidArgument("canonical_from_microcanonical: too few grid points below E/10");
    out.fitted_beta = -fit_line(lx, ly, lw).slope;
    return out;
}

double classical_thermal_functional(const std::function<double(double, double)>& a,
                                    double beta, std::span<const double> gammas,
                                    const ClassicalModel& model, const PhaseGrid& grid) {
    if (!(beta > 0.0)) throw InvalidArgument("classical_thermal_functional: beta must be > 0");
    if (gammas.size() > model.momenta.size())
        throw InvalidArgument("classical_thermal_functional: more multipliers than momenta");

    double num = 0.0, den = 0.0, boundary = 0.0;
    for (int i = 0; i < grid.nq(); ++i) {
        for (int j = 0; j < grid.np(); ++j) {
            const double q = grid.q_nodes[i], p = grid.p_nodes[j];
            double expo = -beta * model.hamiltonian(q, p);
            for (std::size_t l = 0; l < gammas.size(); ++l)
                expo -= gammas[l] * model.momenta[l](q, p);
            const double wgt = std::exp(expo);
            den += wgt;
            num += wgt * a(q, p);
            if (i == 0 || j == 0 || i == grid.nq() - 1 || j == grid.np() - 1) boundary += wgt;
        }
    }
    if (den <= 0.0) throw DomainTooSmall("classical_thermal_functional: empty weight");
    if (boundary / den > 1e-6)
        throw DomainTooSmall("classical_thermal_functional: weight has not decayed at the grid "
                             "boundary (mass fraction " + std::to_string(boundary / den) + ")");
    return num / den;
}

}  // namespace cslab
