#include "cslab/serialize.hpp"

#include <cstdio>

#include "json.hpp"

namespace cslab {

using nlohmann::json;

namespace {

json complex_to_json(const complexd& z) { return json::array({z.real(), z.imag()}); }

complexd complex_from_json(const json& j) {
    return complexd(j.at(0).get<double>(), j.at(1).get<double>());
}

json matrix_to_json(const Cmat& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Cmat matrix_from_json(const json& j) {
    const int rows = static_cast<int>(j.size());
    const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
    Cmat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = complex_from_json(j.at(r).at(c));
    return m;
}

json matrix_list_to_json(const std::vector<Cmat>& v) {
    json arr = json::array();
    for (const auto& m : v) arr.push_back(matrix_to_json(m));
    return arr;
}

std::vector<Cmat> matrix_list_from_json(const json& j) {
    std::vector<Cmat> v;
    for (const auto& m : j) v.push_back(matrix_from_json(m));
    return v;
}

json blocks_to_json(const FiveBlocks& x, const std::string& kind) {
    json j;
    j["kind"] = kind;
    j["grid"] = {{"scheme", to_string(x.grid.scheme)},
                 {"omega_max", x.grid.omega_max},
                 {"nodes", x.grid.nodes},
                 {"weights", x.grid.weights}};
    j["csco"] = {{"bound_energy",
                  x.csco.bound_energy ? json(*x.csco.bound_energy) : json(nullptr)},
                 {"degeneracy", x.csco.degeneracy},
                 {"n_momenta", x.csco.n_momenta},
                 {"n_isolating", x.csco.n_isolating}};
    json blocks;
    blocks["bound"] = matrix_to_json(x.bb);
    blocks["continuum_diag"] = matrix_list_to_json(x.cc_diag);
    blocks["cross_lower"] = matrix_list_to_json(x.cross_lo);
    blocks["cross_upper"] = matrix_list_to_json(x.cross_ol);
    json full;
    if (x.full.is_zero()) {
        full["layout"] = "zero";
    } else if (x.full.is_dense()) {
        full["layout"] = "dense";
        full["planes"] = matrix_list_to_json(x.full.planes);
    } else {
        full["layout"] = "separable";
        json terms = json::array();
        for (const auto& t : x.full.terms)
            terms.push_back({{"u", matrix_list_to_json(t.u)}, {"v", matrix_list_to_json(t.v)}});
        full["terms"] = std::move(terms);
    }
    blocks["continuum_full"] = std::move(full);
    j["blocks"] = std::move(blocks);
    return j;
}

FiveBlocks blocks_from_json(const json& j, const std::string& expected_kind) {
    if (j.at("kind").get<std::string>() != expected_kind)
        throw InvalidArgument("serialize: expected kind " + expected_kind);
    FiveBlocks x;
    const auto& jg = j.at("grid");
    x.grid.scheme = quad_scheme_from_string(jg.at("scheme").get<std::string>());
    x.grid.omega_max = jg.at("omega_max").get<double>();
    x.grid.nodes = jg.at("nodes").get<std::vector<double>>();
    x.grid.weights = jg.at("weights").get<std::vector<double>>();
    const auto& jc = j.at("csco");
    if (!jc.at("bound_energy").is_null())
        x.csco.bound_energy = jc.at("bound_energy").get<double>();
    x.csco.degeneracy = jc.at("degeneracy").get<int>();
    x.csco.n_momenta = jc.at("n_momenta").get<int>();
    x.csco.n_isolating = jc.at("n_isolating").get<int>();
    const auto& jb = j.at("blocks");
    x.bb = matrix_from_json(jb.at("bound"));
    x.cc_diag = matrix_list_from_json(jb.at("continuum_diag"));
    x.cross_lo = matrix_list_from_json(jb.at("cross_lower"));
    x.cross_ol = matrix_list_from_json(jb.at("cross_upper"));
    const auto& jf = jb.at("continuum_full");
    const std::string layout = jf.at("layout").get<std::string>();
    if (layout == "dense") {
        x.full.planes = matrix_list_from_json(jf.at("planes"));
    } else if (layout == "separable") {
        for (const auto& jt : jf.at("terms")) {
            SeparableTerm t;
            t.u = matrix_list_from_json(jt.at("u"));
            t.v = matrix_list_from_json(jt.at("v"));
            x.full.terms.push_back(std::move(t));
        }
    } else if (layout != "zero") {
        throw InvalidArgument("serialize: unknown kernel layout " + layout);
    }
    return x;
}

}  // namespace

std::string observable_to_json(const Observable& obs) {
    return blocks_to_json(obs, "observable").dump(2);
}

std::string state_to_json(const StateFunctional& rho) {
    return blocks_to_json(rho, "state").dump(2);
}

Observable observable_from_json(const std::string& text) {
    Observable o;
    static_cast<FiveBlocks&>(o) = blocks_from_json(json::parse(text), "observable");
    return o;
}

StateFunctional state_from_json(const std::string& text) {
    StateFunctional s;
    static_cast<FiveBlocks&>(s) = blocks_from_json(json::parse(text), "state");
    return s;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& comment,
                     const std::vector<std::string>& columns) {
    std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary);  // binary: byte-stable line endings
    if (!out_) throw InvalidArgument("CsvWriter: cannot open " + path.string());
    if (!comment.empty()) out_ << "# " << comment << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
    out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        out_ << format_double(values[i]) << (i + 1 < values.size() ? "," : "");
    out_ << "\n";
}

void CsvWriter::raw_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << cells[i] << (i + 1 < cells.size() ? "," : "");
    out_ << "\n";
}

void write_diagonal_csv(const std::filesystem::path& path, const std::string& comment,
                        const FiveBlocks& x) {
    CsvWriter csv(path, comment, {"omega", "m", "value"});
    for (std::size_t k = 0; k < x.n_nodes(); ++k)
        for (int m = 0; m < x.m_dim(); ++m)
            csv.row({x.grid.nodes[k], static_cast<double>(m), x.cc_diag[k](m, m).real()});
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("write_text_file: cannot open " + path.string());
    out << content;
}

void write_binary_doubles(const std::filesystem::path& path, const double* data,
                          std::size_t count) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("write_binary_doubles: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(data), count * sizeof(double));
}

}  // namespace cslab
