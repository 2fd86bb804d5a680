#include "cslab/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "cslab/evolution.hpp"
#include "cslab/flows.hpp"
#include "cslab/localization.hpp"
#include "cslab/pointer.hpp"
#include "cslab/serialize.hpp"
#include "cslab/thermal.hpp"
#include "cslab/wigner.hpp"

namespace cslab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

// key -> pipelines that accept it ("*" = all)
const std::map<std::string, std::set<std::string>>& key_registry() {
    static const std::map<std::string, std::set<std::string>> registry = {
        {"name", {"*"}},
        {"pipeline", {"*"}},
        {"seed", {"*"}},
        {"output", {"*"}},
        {"grid.scheme", {"decohere", "maxent", "kms", "canonical", "full-chain"}},
        {"grid.nodes", {"decohere", "maxent", "kms", "canonical", "full-chain"}},
        {"grid.omega_max", {"decohere", "maxent", "kms", "canonical", "full-chain"}},
        {"csco.bound_energy", {"decohere", "full-chain"}},
        {"csco.degeneracy", {"decohere", "maxent", "full-chain"}},
        {"csco.n_momenta", {"decohere", "maxent", "full-chain"}},
        {"csco.n_isolating", {"decohere", "full-chain"}},
        {"evolution.times", {"decohere", "full-chain"}},
        {"evolution.revival_override", {"decohere", "full-chain"}},
        {"decohere.center", {"decohere", "full-chain"}},
        {"decohere.sigma", {"decohere", "full-chain"}},
        {"decohere.offdiag_scale", {"decohere", "full-chain"}},
        {"thermal.E", {"maxent", "full-chain"}},
        {"thermal.beta", {"kms", "full-chain"}},
        {"thermal.gammas", {"maxent", "full-chain"}},
        {"maxent.competitors", {"maxent", "full-chain"}},
        {"kms.t_max", {"kms", "full-chain"}},
        {"kms.t_steps", {"kms", "full-chain"}},
        {"kms.strip_rows", {"kms", "full-chain"}},
        {"kms.center_a", {"kms", "full-chain"}},
        {"kms.center_b", {"kms", "full-chain"}},
        {"kms.sigma_a", {"kms", "full-chain"}},
        {"kms.sigma_b", {"kms", "full-chain"}},
        {"wigner.q_extent", {"wigner", "full-chain"}},
        {"wigner.nq", {"wigner", "full-chain"}},
        {"wigner.np", {"wigner", "full-chain"}},
        {"wigner.hbar_eff", {"wigner", "full-chain"}},
        {"wigner.epsilon", {"wigner", "full-chain"}},
        {"wigner.shell_omega", {"wigner", "full-chain"}},
        {"wigner.models", {"wigner", "full-chain"}},
        {"flow.frequencies", {"ergodic", "full-chain"}},
        {"flow.actions", {"ergodic", "full-chain"}},
        {"flow.angles", {"ergodic", "full-chain"}},
        {"flow.classification", {"ergodic", "full-chain"}},
        {"ergodic.T", {"ergodic", "full-chain"}},
        {"ergodic.samples", {"ergodic", "full-chain"}},
        {"ergodic.modes", {"ergodic", "full-chain"}},
        {"canonical.nu", {"canonical", "full-chain"}},
        {"canonical.e_total", {"canonical", "full-chain"}},
        {"canonical.beta", {"canonical", "full-chain"}},
        {"canonical.nodes", {"canonical", "full-chain"}},
        {"localization.ensemble_size", {"localize", "full-chain"}},
        {"localization.observed_indices", {"localize", "full-chain"}},
        {"localization.seed", {"localize", "full-chain"}},
        {"localization.sigmas", {"localize", "full-chain"}},
        {"localization.times", {"localize", "full-chain"}},
        {"localization.flow", {"localize", "full-chain"}},
    };
    return registry;
}

}  // namespace

std::vector<std::string> known_pipelines() {
    return {"decohere", "maxent", "kms", "wigner", "ergodic", "canonical", "localize",
            "full-chain"};
}

double Scenario::get_double(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("key " + key + ": cannot parse number '" + it->second + "'");
    }
}

int Scenario::get_int(const std::string& key, int fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("key " + key + ": cannot parse integer '" + it->second + "'");
    }
}

bool Scenario::get_bool(const std::string& key, bool fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InvalidArgument("key " + key + ": expected true/false, got '" + it->second + "'");
}

std::string Scenario::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

std::vector<double> Scenario::get_list(const std::string& key,
                                       const std::vector<double>& fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::vector<double> out;
    for (const auto& tok : split(it->second, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw InvalidArgument("key " + key + ": cannot parse list entry '" + tok + "'");
        }
    }
    return out;
}

std::vector<std::string> Scenario::get_tokens(const std::string& key,
                                              const std::vector<std::string>& fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::vector<std::string> out;
    for (const auto& tok : split(it->second, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::vector<std::vector<int>> Scenario::get_modes(const std::string& key) const {
    const auto it = values.find(key);
    std::vector<std::vector<int>> out;
    if (it == values.end()) return out;
    for (const auto& tuple : split(it->second, ';')) {
        if (tuple.empty()) continue;
        std::vector<int> mode;
        std::stringstream ss(tuple);
        int v = 0;
        while (ss >> v) mode.push_back(v);
        if (mode.empty()) throw InvalidArgument("key " + key + ": empty mode tuple");
        out.push_back(std::move(mode));
    }
    return out;
}

Scenario parse_scenario_text(const std::string& text, const std::string& source) {
    Scenario sc;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(lineno, "expected 'key = value' in " + source);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ParseError(lineno, "empty key in " + source);
        if (sc.values.count(key)) throw ParseError(lineno, "duplicate key '" + key + "'");
        sc.values[key] = value;
    }
    if (!sc.values.count("name")) throw ParseError(0, "missing required key 'name'");
    if (!sc.values.count("pipeline")) throw ParseError(0, "missing required key 'pipeline'");
    sc.name = sc.values["name"];
    sc.pipeline = sc.values["pipeline"];
    if (sc.values.count("seed")) {
        try {
            sc.seed = std::stoull(sc.values["seed"]);
        } catch (const std::exception&) {
            throw ParseError(0, "cannot parse seed '" + sc.values["seed"] + "'");
        }
    }
    sc.output = sc.get_string("output", "");
    validate_scenario(sc);
    return sc;
}

Scenario parse_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), path.string());
}

void validate_scenario(const Scenario& sc) {
    const auto pipes = known_pipelines();
    if (std::find(pipes.begin(), pipes.end(), sc.pipeline) == pipes.end())
        throw ParseError(0, "unknown pipeline '" + sc.pipeline + "'");
    const auto& registry = key_registry();
    for (const auto& [key, value] : sc.values) {
        const auto it = registry.find(key);
        if (it == registry.end()) throw ParseError(0, "unknown key '" + key + "'");
        if (!it->second.count("*") && !it->second.count(sc.pipeline))
            throw ParseError(0, "key '" + key + "' does not apply to pipeline '" +
                                    sc.pipeline + "'");
        (void)value;
    }
    // structural type checks up front, before any computation
    try {
        (void)sc.get_double("grid.omega_max", 30.0);
        (void)sc.get_int("grid.nodes", 128);
        if (sc.has("grid.scheme"))
            (void)quad_scheme_from_string(sc.get_string("grid.scheme", ""));
        (void)sc.get_list("evolution.times", {});
        (void)sc.get_list("localization.sigmas", {});
        (void)sc.get_modes("ergodic.modes");
        (void)sc.get_bool("evolution.revival_override", false);
    } catch (const InvalidArgument& e) {
        throw ParseError(0, e.what());
    }
}

// ---------------------------------------------------------------------------
// Pipeline runners
// ---------------------------------------------------------------------------

namespace {

struct RunContext {
    const Scenario& sc;
    std::filesystem::path dir;
    std::string comment;
    std::vector<InvariantRecord>* inv;
    std::vector<std::string>* artifacts;
    std::vector<std::string>* warnings;

    void record(const std::string& name, double value, double threshold, bool pass) const {
        inv->push_back({name, value, threshold, pass});
    }
    void record_max(const std::string& name, double value, double threshold) const {
        record(name, value, threshold, value <= threshold);
    }
    // stored relative to the scenario directory so summaries are
    // reproducible across output roots
    void artifact(const std::filesystem::path& p) const {
        artifacts->push_back(p.filename().string());
    }
};

SpectrumGrid grid_from(const Scenario& sc) {
    const auto scheme = quad_scheme_from_string(sc.get_string("grid.scheme", "gauss-legendre"));
    return build_grid(scheme, sc.get_int("grid.nodes", 128),
                      sc.get_double("grid.omega_max", 30.0));
}

CscoSpec csco_from(const Scenario& sc) {
    CscoSpec c;
    c.degeneracy = sc.get_int("csco.degeneracy", 1);
    c.n_momenta = sc.get_int("csco.n_momenta", 1);
    c.n_isolating = sc.get_int("csco.n_isolating", 1);
    if (sc.has("csco.bound_energy")) c.bound_energy = sc.get_double("csco.bound_energy", -1.0);
    c.check();
    return c;
}

Observable ones_kernel(const SpectrumGrid& g, const CscoSpec& c) {
    Observable o = zero_observable(g, c);
    SeparableTerm t;
    t.u.assign(g.size(), Cmat::Identity(c.degeneracy, c.degeneracy));
    t.v.assign(g.size(), Cmat::Identity(c.degeneracy, c.degeneracy));
    o.full.terms.push_back(std::move(t));
    return o;
}

Observable gaussian_kernel(const SpectrumGrid& g, const CscoSpec& c, double center,
                           double sigma) {
    Observable o = zero_observable(g, c);
    SeparableTerm t;
    t.u.resize(g.size());
    t.v.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = std::exp(-0.5 * std::pow((g.nodes[k] - center) / sigma, 2));
        t.u[k] = gk * Cmat::Identity(c.degeneracy, c.degeneracy);
        t.v[k] = gk * Cmat::Identity(c.degeneracy, c.degeneracy);
    }
    o.full.terms.push_back(std::move(t));
    return o;
}

void run_decohere(const RunContext& ctx) {
    const auto g = grid_from(ctx.sc);
    const CscoSpec c = csco_from(ctx.sc);
    const double center = ctx.sc.get_double("decohere.center", 5.0);
    const double sigma = ctx.sc.get_double("decohere.sigma", 1.0);
    const double scale = ctx.sc.get_double("decohere.offdiag_scale", 0.05);

    StateFunctional rho = zero_state(g, c);
    double z = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) z += g.weights[k] * std::exp(-g.nodes[k]);
    for (std::size_t k = 0; k < g.size(); ++k)
        rho.cc_diag[k] = std::exp(-g.nodes[k]) / (z * c.degeneracy) *
                         Cmat::Identity(c.degeneracy, c.degeneracy);
    SeparableTerm t;
    t.u.resize(g.size());
    t.v.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = std::exp(-0.5 * std::pow((g.nodes[k] - center) / sigma, 2));
        t.u[k] = scale * gk * Cmat::Identity(c.degeneracy, c.degeneracy);
        t.v[k] = gk * Cmat::Identity(c.degeneracy, c.degeneracy);
    }
    rho.full.terms.push_back(std::move(t));

    const Observable obs = ones_kernel(g, c);
    std::vector<double> times = ctx.sc.get_list("evolution.times", {});
    if (times.empty())
        for (int i = 0; i <= 24; ++i) times.push_back(0.25 * i);
    const bool override_revival = ctx.sc.get_bool("evolution.revival_override", false);
    const DecoherenceCurve curve = decoherence_curve(rho, obs, times, override_revival);

    CsvWriter csv(ctx.dir / "decoherence.csv", ctx.comment, {"t", "mean", "residual"});
    for (std::size_t i = 0; i < curve.times.size(); ++i)
        csv.row({curve.times[i], curve.means[i], curve.residuals[i]});
    ctx.artifact(ctx.dir / "decoherence.csv");

    const Observable id = make_identity(g, c);
    double norm_drift = 0.0;
    for (double tt : {times.front(), times.back()})
        norm_drift = std::max(norm_drift, std::abs(pair(evolve(rho, tt), id) - 1.0));
    ctx.record("evolution.norm_drift", norm_drift, 0.0, norm_drift == 0.0);
    ctx.record_max("evolution.final_residual_ratio",
                   curve.residuals.back() / curve.residuals.front(), 1e-3);
    if (curve.fitted_decay) {
        const double rate = curve.fitted_decay->rate;
        const double target = sigma * sigma;
        ctx.record("evolution.envelope_rate", rate, 2.0 * target,
                   rate > 0.5 * target && rate < 2.0 * target);
    }
    ctx.record("evolution.revival_time", curve.revival_time, 0.0, true);

    // pointer basis of the asymptotic state, with the per-node report
    const StateFunctional star = asymptotic_state(rho);
    const PointerBasis basis = diagonalize_sections(star);
    ctx.record_max("pointer.unitarity_residual", basis.unitarity_residual(), 1e-10);
    ctx.record_max("pointer.offdiag_residual", basis.offdiag_residual(star.cc_diag), 1e-10);
    nlohmann::json jp;
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t k = 0; k < g.size(); ++k) {
        std::vector<double> evs(basis.eigen_nodes[k].data(),
                                basis.eigen_nodes[k].data() + basis.eigen_nodes[k].size());
        const Cmat uu = basis.u_nodes[k].adjoint() * basis.u_nodes[k] -
                        Cmat::Identity(c.degeneracy, c.degeneracy);
        nodes.push_back({{"omega", g.nodes[k]},
                         {"eigenvalues", evs},
                         {"unitarity_residual", uu.cwiseAbs().maxCoeff()},
                         {"continuity_overlap", basis.continuity_overlap[k]},
                         {"degenerate", static_cast<bool>(basis.degenerate[k])}});
    }
    jp["nodes"] = std::move(nodes);
    write_text_file(ctx.dir / "pointer_report.json", jp.dump(2) + "\n");
    ctx.artifact(ctx.dir / "pointer_report.json");
}

void run_maxent(const RunContext& ctx) {
    const auto g = grid_from(ctx.sc);
    CscoSpec c;  // continuum-only (grand-)canonical problem
    c.degeneracy = ctx.sc.get_int("csco.degeneracy", 1);
    c.n_momenta = ctx.sc.get_int("csco.n_momenta", 1);
    const double e_target = ctx.sc.get_double("thermal.E", 1.0);
    auto params = solve_thermal_params(g, c, {e_target, {}});
    const auto gammas = ctx.sc.get_list("thermal.gammas", {});
    if (!gammas.empty()) {
        if (gammas.size() != c.label_radices().size())
            throw InvalidArgument("thermal.gammas: one multiplier per momentum required");
        params.gammas = gammas;
    }

    const StateFunctional rho = build_kms_state(g, c, params);
    write_diagonal_csv(ctx.dir / "canonical_density.csv", ctx.comment, rho);
    ctx.artifact(ctx.dir / "canonical_density.csv");

    Observable ham = zero_observable(g, c);
    for (std::size_t k = 0; k < g.size(); ++k)
        ham.cc_diag[k] = g.nodes[k] * Cmat::Identity(c.degeneracy, c.degeneracy);
    const double moment_resid = std::abs(pair(rho, ham) - e_target) / e_target;
    ctx.record_max("maxent.moment_residual", moment_resid, 1e-10);
    ctx.record("maxent.beta", params.beta, 0.0, true);
    ctx.record("maxent.truncation_bound", params.truncation_err, 0.0, true);

    std::vector<double> canonical(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        canonical[k] = std::exp(-params.beta * g.nodes[k]) / params.z;
    const double h_star = shannon_entropy(g, canonical);
    ctx.record("maxent.entropy", h_star, 0.0, true);

    std::mt19937_64 rng(ctx.sc.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int n_comp = ctx.sc.get_int("maxent.competitors", 200);
    int wins = 0;
    for (int trial = 0; trial < n_comp; ++trial) {
        std::vector<double> delta(g.size());
        for (auto& x : delta) x = noise(rng);
        double s0 = 0, s1 = 0, n0 = 0, n1 = 0, x01 = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double m = g.weights[k] * canonical[k];
            s0 += m * delta[k];
            s1 += m * delta[k] * g.nodes[k];
            n0 += m;
            n1 += m * g.nodes[k] * g.nodes[k];
            x01 += m * g.nodes[k];
        }
        const double det = n0 * n1 - x01 * x01;
        const double a = (s0 * n1 - s1 * x01) / det;
        const double b = (n0 * s1 - x01 * s0) / det;
        double dmax = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            delta[k] -= a + b * g.nodes[k];
            dmax = std::max(dmax, std::abs(delta[k]));
        }
        std::vector<double> comp(g.size());
        for (std::size_t k = 0; k < g.size(); ++k)
            comp[k] = canonical[k] * (1.0 + 0.5 * delta[k] / dmax);
        if (shannon_entropy(g, comp) < h_star) ++wins;
    }
    ctx.record("maxent.entropy_wins", wins, n_comp, wins == n_comp);

    auto log_z = [&](double beta) {
        double zz = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k)
            zz += g.weights[k] * std::exp(-beta * g.nodes[k]);
        return std::log(zz);
    };
    const double h = 1e-5;
    const double grad = (log_z(params.beta + h) - log_z(params.beta - h)) / (2 * h);
    ctx.record_max("maxent.gradient_residual", std::abs(grad + e_target) / e_target, 1e-6);
}

void run_kms(const RunContext& ctx) {
    const auto g = grid_from(ctx.sc);
    const CscoSpec c;
    const double beta = ctx.sc.get_double("thermal.beta", 1.0);
    if (!(beta > 0.0)) throw InfeasibleTarget("kms: beta must be positive");
    ThermalParams params;
    params.beta = beta;
    params.truncation_err = truncation_bound(g, beta);

    const Observable a = gaussian_kernel(g, c, ctx.sc.get_double("kms.center_a", 5.0),
                                         ctx.sc.get_double("kms.sigma_a", 1.0));
    const Observable b = gaussian_kernel(g, c, ctx.sc.get_double("kms.center_b", 6.0),
                                         ctx.sc.get_double("kms.sigma_b", 1.2));

    const double t_max = ctx.sc.get_double("kms.t_max", 2.0);
    const int t_steps = ctx.sc.get_int("kms.t_steps", 16);
    const int rows = ctx.sc.get_int("kms.strip_rows", 7);
    std::vector<double> times, gammas;
    for (int i = 0; i <= t_steps; ++i) times.push_back(-t_max + 2.0 * t_max * i / t_steps);
    for (int r = 1; r <= rows; ++r) gammas.push_back(beta * r / (rows + 1));

    const auto corr = kms_correlators(a, b, params, times, gammas);
    const auto rep = verify_kms(corr, params);

    CsvWriter csv(ctx.dir / "kms_correlators.csv", ctx.comment,
                  {"t", "Re F", "Im F", "Re G", "Im G"});
    for (std::size_t i = 0; i < corr.t_grid.size(); ++i)
        csv.row({corr.t_grid[i], corr.f_values[i].real(), corr.f_values[i].imag(),
                 corr.g_values[i].real(), corr.g_values[i].imag()});
    ctx.artifact(ctx.dir / "kms_correlators.csv");

    CsvWriter strip_csv(ctx.dir / "kms_strip.csv", ctx.comment, {"t", "gamma", "cr_residual"});
    for (const auto& smp : rep.cr_samples) strip_csv.row({smp.t, smp.gamma, smp.residual});
    ctx.artifact(ctx.dir / "kms_strip.csv");

    ctx.record_max("kms.boundary_residual_rel",
                   rep.boundary_residual / std::max(rep.boundary_scale, 1e-300), 1e-10);
    ctx.record("kms.analyticity_residual", rep.analyticity_residual, 0.0, true);
    ctx.record("kms.truncation_bound", params.truncation_err, 0.0, true);

    const double w_id = thermal_functional(make_identity(g, c), c, params);
    ctx.record("kms.w_identity", w_id, 1.0, w_id == 1.0);

    std::mt19937_64 rng(ctx.sc.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Observable ra = gaussian_kernel(g, c, 4.0 + nd(rng), 1.0 + 0.2 * std::abs(nd(rng)));
    const Observable rb = gaussian_kernel(g, c, 6.0 + nd(rng), 1.0 + 0.2 * std::abs(nd(rng)));
    const complexd tr_ab = op_trace(compose(ra, rb));
    const complexd tr_ba = op_trace(compose(rb, ra));
    ctx.record_max("kms.cyclic_trace_residual", std::abs(tr_ab - tr_ba), 1e-10);
}

void run_wigner(const RunContext& ctx) {
    const double hbar = ctx.sc.get_double("wigner.hbar_eff", 1.0);
    if (!(hbar > 0.0)) throw InfeasibleTarget("wigner: hbar_eff must be positive");
    const double extent = ctx.sc.get_double("wigner.q_extent", 8.0);
    const int nq = ctx.sc.get_int("wigner.nq", 257);
    const int np = ctx.sc.get_int("wigner.np", 0);
    const PhaseGrid g = np > 0 ? PhaseGrid::make(extent, nq, extent, np, hbar)
                               : PhaseGrid::conjugate(extent, nq, hbar);
    if (g.resolution_warning)
        ctx.warnings->push_back("phase grid does not resolve hbar_eff (dq dp > hbar/4)");

    PositionKernel rho0, rho1;
    rho0.smooth.resize(g.nq(), g.nq());
    rho1.smooth.resize(g.nq(), g.nq());
    auto phi0 = [&](double x) {
        return std::pow(kPi * hbar, -0.25) * std::exp(-x * x / (2 * hbar));
    };
    auto phi1 = [&](double x) {
        return std::pow(kPi * hbar, -0.25) * std::sqrt(2.0 / hbar) * x *
               std::exp(-x * x / (2 * hbar));
    };
    for (int i = 0; i < g.nq(); ++i)
        for (int j = 0; j < g.nq(); ++j) {
            rho0.smooth(i, j) = phi0(g.q_nodes[i]) * phi0(g.q_nodes[j]);
            rho1.smooth(i, j) = phi1(g.q_nodes[i]) * phi1(g.q_nodes[j]);
        }
    const WignerDensity w0 = wigner_transform_state(rho0, g);
    const WignerDensity w1 = wigner_transform_state(rho1, g);

    double ground_err = 0.0;
    for (int i = 0; i < g.nq(); ++i)
        for (int j = 0; j < g.np(); ++j) {
            const double q = g.q_nodes[i], p = g.p_nodes[j];
            ground_err = std::max(
                ground_err,
                std::abs(w0.values(i, j) - std::exp(-(q * q + p * p) / hbar) / (kPi * hbar)));
        }
    ctx.record_max("wigner.ground_pointwise_err", ground_err, 1e-6);
    ctx.record_max("wigner.ground_norm_dev", std::abs(w0.norm - 1.0), 1e-6);
    ctx.record_max("wigner.excited_origin_err",
                   std::abs(w1.values(g.nq() / 2, g.np() / 2) + 1.0 / (kPi * hbar)), 1e-4);

    const ClassicalModel model = harmonic_model();
    const double omega = ctx.sc.get_double("wigner.shell_omega", 2.0);
    const double eps = ctx.sc.get_double("wigner.epsilon", 0.05);
    if (!(eps > 0.0)) throw InfeasibleTarget("wigner: epsilon must be positive");
    SpectrumGrid sg;
    sg.omega_max = 2.0 * omega;
    sg.nodes = {omega};
    sg.weights = {1.0};
    const double shell_extent = std::sqrt(2.0 * omega) + 1.0;
    const int shell_n = 2 * static_cast<int>(std::ceil(shell_extent / (eps / 8.0))) + 1;
    const PhaseGrid pg = PhaseGrid::make(shell_extent, shell_n, shell_extent, shell_n, hbar);
    const StarDensity star =
        build_classical_star_density(sg, {Eigen::VectorXd::Ones(1)}, {{}}, model, pg, eps);
    const std::vector<int> orders{0, 1, 2};
    const MomentTable mt = moment_check(star, model, pg, orders, omega);

    ctx.record("wigner.shell_min", star.values.minCoeff(), 0.0,
               star.values.minCoeff() >= 0.0);
    ctx.record_max("wigner.shell_mass_dev", std::abs(star.mass - 1.0), 1e-3);
    ctx.record_max("wigner.shell_moment1_err", mt.hamiltonian[1].error, 2.0 * eps);
    ctx.record_max("wigner.shell_moment2_err", mt.hamiltonian[2].error, 2.0 * eps);

    CsvWriter csv(ctx.dir / "star_density.csv", ctx.comment, {"q", "p", "value"});
    const int stride = std::max(1, pg.nq() / 128);  // plot-ready decimation
    for (int i = 0; i < pg.nq(); i += stride)
        for (int j = 0; j < pg.np(); j += stride)
            csv.row({pg.q_nodes[i], pg.p_nodes[j], star.values(i, j)});
    ctx.artifact(ctx.dir / "star_density.csv");

    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major =
        w0.values;
    write_binary_doubles(ctx.dir / "ground_wigner.f64", row_major.data(),
                         static_cast<std::size_t>(row_major.size()));
    nlohmann::json header;
    header["shape"] = {g.nq(), g.np()};
    header["dq"] = g.dq;
    header["dp"] = g.dp;
    header["hbar_eff"] = hbar;
    header["layout"] = "row-major";
    header["taper_fraction"] = TransformOptions{}.taper_fraction;
    write_text_file(ctx.dir / "ground_wigner.json", header.dump(2) + "\n");
    ctx.artifact(ctx.dir / "ground_wigner.f64");
    ctx.artifact(ctx.dir / "ground_wigner.json");

    const auto names = ctx.sc.get_tokens("wigner.models", {"position-momentum"});
    const std::vector<double> series{0.2, 0.1, 0.05, 0.025};
    const auto rep = correspondence_suite(names, series);
    for (const auto& fit : rep.fits) {
        if (fit.exact) {
            ctx.record("wigner.slope." + fit.model, 0.0, 0.0, true);
        } else if (fit.kind == "product") {
            ctx.record("wigner.slope." + fit.model, fit.slope, 1.1,
                       fit.slope > 0.9 && fit.slope < 1.1);
        } else {
            ctx.record("wigner.slope." + fit.model, fit.slope, 0.9, fit.slope >= 0.9);
        }
    }
}

void run_ergodic(const RunContext& ctx) {
    FlowSpec spec;
    const auto freq_tokens = ctx.sc.get_tokens("flow.frequencies", {"1", "sqrt2"});
    for (const auto& tok : freq_tokens) spec.frequencies.push_back(parse_frequency(tok));
    spec.actions =
        ctx.sc.get_list("flow.actions", std::vector<double>(spec.frequencies.size(), 1.0));
    spec.initial_angles =
        ctx.sc.get_list("flow.angles", std::vector<double>(spec.frequencies.size(), 0.0));
    for (const auto& tok : ctx.sc.get_tokens("flow.classification", {})) {
        if (tok == "isolating")
            spec.classification.push_back(ConstantClass::Isolating);
        else if (tok == "non-isolating")
            spec.classification.push_back(ConstantClass::NonIsolating);
        else
            throw InvalidArgument("flow.classification: unknown tag '" + tok + "'");
    }
    spec.check();

    const double T = ctx.sc.get_double("ergodic.T", 1e4);
    const long samples = static_cast<long>(ctx.sc.get_double("ergodic.samples", 4e5));
    auto modes = ctx.sc.get_modes("ergodic.modes");
    if (modes.empty()) modes = {{0, 0}, {1, -1}, {2, 1}};

    const ErgodicReport weyl = equidistribution_test(spec, modes, T, samples);
    CsvWriter csv(ctx.dir / "weyl_averages.csv", ctx.comment, {"mode", "weyl_avg", "bound"});
    double worst_excess = 0.0;
    bool resonant_ok = true;
    for (const auto& m : weyl.weyl_averages) {
        std::string label;
        for (std::size_t i = 0; i < m.mode.size(); ++i)
            label += (i ? " " : "") + std::to_string(m.mode[i]);
        csv.raw_row({label, format_double(m.magnitude), format_double(m.bound)});
        if (m.resonant)
            resonant_ok = resonant_ok && std::abs(m.magnitude - 1.0) < 1e-9;
        else
            worst_excess = std::max(worst_excess, m.magnitude - m.bound);
    }
    ctx.artifact(ctx.dir / "weyl_averages.csv");
    ctx.record("ergodic.weyl_bound_excess", worst_excess, 0.0, worst_excess <= 0.0);
    ctx.record("ergodic.resonant_modes_locked", resonant_ok ? 1.0 : 0.0, 1.0, resonant_ok);

    ErgodicReport avg;
    if (spec.n_dof() == 2) {
        auto f = [](std::span<const double> ang) {
            return std::cos(ang[0]) * std::cos(ang[1]);
        };
        avg = ergodic_average_check(spec, f, T, samples);
        ctx.record_max("ergodic.time_space_gap", avg.gap, 1e-2);
        ctx.record("ergodic.gap_trend_slope", avg.gap_trend_slope, -0.9,
                   avg.gap_trend_slope <= -0.9);
    }
    for (const auto& w : weyl.warnings) ctx.warnings->push_back(w);
    if (!spec.classification.empty())
        for (const auto& w : occupancy_warnings(spec, std::min(T, 2000.0), 65536))
            ctx.warnings->push_back(w);

    nlohmann::json jrep;
    jrep["time_avg"] = avg.time_avg;
    jrep["space_avg"] = avg.space_avg;
    jrep["gap"] = avg.gap;
    jrep["gap_trend_slope"] = avg.gap_trend_slope;
    nlohmann::json jmodes = nlohmann::json::array();
    for (const auto& m : weyl.weyl_averages)
        jmodes.push_back({{"mode", m.mode},
                          {"magnitude", m.magnitude},
                          {"bound", m.bound},
                          {"resonant", m.resonant}});
    jrep["weyl_averages"] = std::move(jmodes);
    jrep["warnings"] = weyl.warnings;
    write_text_file(ctx.dir / "ergodic_report.json", jrep.dump(2) + "\n");
    ctx.artifact(ctx.dir / "ergodic_report.json");
}

void run_canonical(const RunContext& ctx) {
    const double nu = ctx.sc.get_double("canonical.nu", 50.0);
    const double e_total = ctx.sc.get_double("canonical.e_total", 1.0);
    // subsystem energy axis spans (0, E_total), independent of the spectral grid
    const SpectrumGrid sub = build_grid(QuadScheme::GaussLegendre,
                                        ctx.sc.get_int("canonical.nodes", 400), e_total);
    const auto marginal = canonical_from_microcanonical(nu, e_total, sub);

    CsvWriter csv(ctx.dir / "canonical_marginal.csv", ctx.comment, {"e1", "density"});
    for (std::size_t k = 0; k < marginal.e1.size(); ++k)
        csv.row({marginal.e1[k], marginal.density[k]});
    ctx.artifact(ctx.dir / "canonical_marginal.csv");

    const double rel =
        std::abs(marginal.fitted_beta - marginal.beta_prediction) / marginal.beta_prediction;
    ctx.record_max("canonical.beta_rel_err", rel, 0.05);
    ctx.record("canonical.fitted_beta", marginal.fitted_beta, 0.0, true);

    const double beta = ctx.sc.get_double("canonical.beta", 2.0);
    if (!(beta > 0.0)) throw InfeasibleTarget("canonical: beta must be positive");
    const ClassicalModel model = harmonic_model();
    const double span = 8.0 / std::sqrt(beta);
    const PhaseGrid pg = PhaseGrid::make(span, 401, span, 401, 1.0);
    const double mean_h = classical_thermal_functional(
        [&](double q, double p) { return model.hamiltonian(q, p); }, beta, {}, model, pg);
    ctx.record_max("canonical.equipartition_err", std::abs(mean_h - 1.0 / beta), 1e-6);
}

void run_localize(const RunContext& ctx) {
    const int count = ctx.sc.get_int("localization.ensemble_size", 4096);
    const auto sigmas = ctx.sc.get_list("localization.sigmas", {1.0, 0.03});
    const std::uint64_t seed =
        ctx.sc.has("localization.seed")
            ? static_cast<std::uint64_t>(ctx.sc.get_double("localization.seed", 1))
            : ctx.sc.seed;
    const auto cloud = gaussian_ensemble(count, sigmas, seed);

    const std::string flow_name = ctx.sc.get_string("localization.flow", "shear");
    const LinearFlow flow = flow_name == "identity"
                                ? identity_flow(static_cast<int>(sigmas.size()))
                                : shear_flow(static_cast<int>(sigmas.size()));
    std::vector<int> observed;
    for (double v : ctx.sc.get_list("localization.observed_indices", {0}))
        observed.push_back(static_cast<int>(v));
    std::vector<double> times = ctx.sc.get_list("localization.times", {});
    if (times.empty())
        for (int i = 0; i <= 10; ++i) times.push_back(i);

    const VolumeTrack track = track_volumes(cloud, flow, observed, times);
    CsvWriter csv(ctx.dir / "volumes.csv", ctx.comment,
                  {"t", "v_total", "v_observed", "v_unobserved", "product_ratio"});
    for (std::size_t i = 0; i < track.times.size(); ++i)
        csv.row({track.times[i], track.v_total[i], track.v_observed[i],
                 track.v_unobserved[i], track.product_ratio[i]});
    ctx.artifact(ctx.dir / "volumes.csv");

    double drift = 0.0;
    for (double v : track.v_total)
        drift = std::max(drift, std::abs(v - track.v_total.front()) / track.v_total.front());
    ctx.record_max("localization.total_drift", drift, 1e-6);
    double band = 1.0;
    for (double r : track.product_ratio) band = std::max(band, std::max(r, 1.0 / r));
    ctx.record("localization.product_ratio_band", band, 2.0, band <= 2.0);

    if (!track.hull_total.empty()) {
        double hull_drift = 0.0;
        for (double h : track.hull_total)
            hull_drift = std::max(hull_drift,
                                  std::abs(h - track.hull_total.front()) / track.hull_total.front());
        ctx.record_max("localization.hull_total_drift", hull_drift, 1e-9);
    }

    const auto verdict = localization_verdict(track);
    ctx.record("localization.localizes", verdict.localizes ? 1.0 : 0.0, 0.0, true);
    nlohmann::json jv;
    jv["localizes"] = verdict.localizes;
    jv["hull_total"] = track.hull_total;
    jv["observed_slope"] = verdict.observed_slope;
    jv["observed_slope_stderr"] = verdict.observed_slope_stderr;
    jv["unobserved_slope"] = verdict.unobserved_slope;
    jv["total_drift"] = verdict.total_drift;
    write_text_file(ctx.dir / "localization_verdict.json", jv.dump(2) + "\n");
    ctx.artifact(ctx.dir / "localization_verdict.json");
}

void dispatch(const std::string& pipeline, const RunContext& ctx) {
    if (pipeline == "decohere")
        run_decohere(ctx);
    else if (pipeline == "maxent")
        run_maxent(ctx);
    else if (pipeline == "kms")
        run_kms(ctx);
    else if (pipeline == "wigner")
        run_wigner(ctx);
    else if (pipeline == "ergodic")
        run_ergodic(ctx);
    else if (pipeline == "canonical")
        run_canonical(ctx);
    else if (pipeline == "localize")
        run_localize(ctx);
    else if (pipeline == "full-chain") {
        // the narrative order: decoherence, thermalization, phase space,
        // ergodicity, canonical emergence, localization
        for (const char* stage :
             {"decohere", "maxent", "kms", "wigner", "ergodic", "canonical", "localize"})
            dispatch(stage, ctx);
    } else {
        throw InvalidArgument("unknown pipeline " + pipeline);
    }
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_root) {
    RunResult result;
    const std::filesystem::path dir =
        out_root / (scenario.output.empty() ? scenario.name : scenario.output);
    std::filesystem::create_directories(dir);

    const RunContext ctx{scenario,
                         dir,
                         "scenario=" + scenario.name + " seed=" + std::to_string(scenario.seed),
                         &result.invariants,
                         &result.artifacts,
                         &result.warnings};
    try {
        dispatch(scenario.pipeline, ctx);
    } catch (const InfeasibleTarget& e) {
        result.exit_code = 3;
        result.warnings.push_back(e.what());
    } catch (const DomainTooSmall& e) {
        result.exit_code = 3;
        result.warnings.push_back(e.what());
    } catch (const SolverFailure& e) {
        result.exit_code = 3;
        result.warnings.push_back(e.what());
    } catch (const InvalidArgument& e) {
        result.exit_code = 2;
        result.warnings.push_back(e.what());
    }

    bool all_pass = true;
    for (const auto& inv : result.invariants) all_pass = all_pass && inv.pass;
    if (result.exit_code == 0 && !all_pass) result.exit_code = 4;

    nlohmann::json summary;
    summary["scenario"] = scenario.name;
    summary["pipeline"] = scenario.pipeline;
    summary["seed"] = scenario.seed;
    summary["exit_code"] = result.exit_code;
    nlohmann::json inv_arr = nlohmann::json::array();
    for (const auto& inv : result.invariants)
        inv_arr.push_back({{"name", inv.name},
                           {"value", inv.value},
                           {"threshold", inv.threshold},
                           {"pass", inv.pass}});
    summary["invariants"] = std::move(inv_arr);
    summary["artifacts"] = result.artifacts;
    summary["warnings"] = result.warnings;
    const auto summary_path = dir / "summary.json";
    write_text_file(summary_path, summary.dump(2) + "\n");
    result.summary_path = summary_path.string();
    return result;
}

SuiteResult run_suite(const std::filesystem::path& config_dir,
                      const std::filesystem::path& out_root, int jobs) {
    std::vector<std::filesystem::path> configs;
    for (const auto& entry : std::filesystem::directory_iterator(config_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".cfg")
            configs.push_back(entry.path());
    std::sort(configs.begin(), configs.end());
    if (configs.empty())
        throw InvalidArgument("run_suite: no .cfg files in " + config_dir.string());

    SuiteResult suite;
    suite.entries.resize(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) return;
            SuiteEntry& entry = suite.entries[i];
            entry.config = configs[i].string();
            try {
                const Scenario sc = parse_scenario_file(configs[i]);
                entry.name = sc.name;
                entry.exit_code = run_scenario(sc, out_root).exit_code;
            } catch (const ParseError&) {
                entry.exit_code = 2;
            } catch (const std::exception&) {
                entry.exit_code = 1;
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& entry : suite.entries)
        suite.exit_code = std::max(suite.exit_code, entry.exit_code);
    return suite;
}

}  // namespace cslab
