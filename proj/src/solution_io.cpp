#include "regimelq/solution_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "regimelq/error.hpp"

namespace regimelq {
namespace {

const char* backend_name(Backend b) { return b == Backend::ode ? "ode" : "tree"; }

// C(k, j) / 2^k through lgamma; exact enough for weights and safe for deep trees.
double binomial_weight(std::size_t k, std::size_t j) {
  const double kk = static_cast<double>(k), jj = static_cast<double>(j);
  return std::exp(std::lgamma(kk + 1.0) - std::lgamma(jj + 1.0) - std::lgamma(kk - jj + 1.0) - kk * std::log(2.0));
}

SymMatrix level_mean(const RegimeField& f, const Lattice& lat, std::size_t level, std::size_t regime, std::size_t n) {
  const std::size_t nodes = lat.nodes(level);
  if (nodes == 1) return f.at(level, 0, regime);
  Matrix acc(n, n);
  for (std::size_t j = 0; j < nodes; ++j) acc += binomial_weight(level, j) * f.at(level, j, regime).matrix();
  return SymMatrix::symmetrized(acc);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SolutionTable tabulate(const EsreSolution& solution) {
  const auto& lat = solution.lattice;
  SolutionTable table;
  table.regimes = solution.P.regimes();
  table.dim = solution.P.at(0, 0, 0).dim();
  for (std::size_t k = 0; k < lat.levels(); ++k) {
    table.times.push_back(lat.time(k));
    for (std::size_t i = 0; i < table.regimes; ++i) {
      table.P.push_back(level_mean(solution.P, lat, k, i, table.dim));
      table.Lambda.push_back(level_mean(solution.Lambda, lat, k, i, table.dim));
    }
  }
  return table;
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  return csv_path.parent_path() / (csv_path.stem().string() + ".meta.json");
}

nlohmann::json solution_metadata(const EsreSolution& solution) {
  const auto& o = solution.options;
  const auto& d = solution.diagnostics;
  nlohmann::json meta;
  meta["backend"] = backend_name(solution.backend());
  meta["horizon"] = solution.lattice.horizon();
  meta["steps"] = solution.lattice.steps();
  meta["regimes"] = solution.P.regimes();
  meta["dim"] = solution.P.at(0, 0, 0).dim();
  meta["tree_levels_averaged"] = solution.backend() == Backend::tree;
  meta["options"] = {{"grid_steps", o.grid_steps},         {"tree_depth", o.tree_depth},
                     {"picard_tol", o.picard_tol},         {"picard_max_iter", o.picard_max_iter},
                     {"psd_tol", o.psd_tol},               {"cond_threshold", o.cond_threshold},
                     {"zero_d_form", o.zero_d_form}};
  meta["iterations"] = solution.iterations;
  meta["converged"] = solution.converged;
  meta["residual_history"] = solution.residual_history;
  meta["apriori"] = {{"K", d.K},
                     {"rho", d.rho},
                     {"log_bound", d.log_bound},
                     {"log_measured_sup", d.log_measured_sup},
                     {"holds", d.holds()},
                     {"rho_alt", d.rho_alt},
                     {"log_bound_alt", d.log_bound_alt},
                     {"log_measured_sup_alt", d.log_measured_sup_alt},
                     {"holds_alt", d.holds_alt()},
                     {"lambda_l2", d.lambda_l2}};
  nlohmann::json initial = nlohmann::json::array();
  for (std::size_t i = 0; i < solution.P.regimes(); ++i) {
    const auto& p = solution.initial(i);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < p.dim(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < p.dim(); ++c) row.push_back(p(r, c));
      rows.push_back(row);
    }
    initial.push_back(rows);
  }
  meta["P0"] = initial;
  return meta;
}

void write_solution(const EsreSolution& solution, const std::filesystem::path& csv_path) {
  const auto table = tabulate(solution);
  auto out = open_out(csv_path);
  out << "t,regime,row,col,P,Lambda\n";
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    const std::string t = format_double(table.times[k]);
    for (std::size_t i = 0; i < table.regimes; ++i) {
      const auto& p = table.p(k, i);
      const auto& l = table.lambda(k, i);
      for (std::size_t r = 0; r < table.dim; ++r)
        for (std::size_t c = 0; c < table.dim; ++c)
          out << t << ',' << i + 1 << ',' << r + 1 << ',' << c + 1 << ',' << format_double(p(r, c)) << ','
              << format_double(l(r, c)) << '\n';
    }
  }
  finish(out, csv_path);
  write_json(solution_metadata(solution), metadata_path(csv_path));
}

SolutionTable read_solution_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,regime,row,col,P,Lambda")
    throw Error(ErrorKind::ParseError, csv_path.string() + ": unexpected header");

  struct Entry {
    double t;
    std::size_t regime, row, col;
    double p, l;
  };
  std::vector<Entry> entries;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Entry e{};
    char c1, c2, c3, c4, c5;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    if (!(ls >> e.t >> c1 >> e.regime >> c2 >> e.row >> c3 >> e.col >> c4 >> e.p >> c5 >> e.l) || c1 != ',' ||
        c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',' || e.regime == 0 || e.row == 0 || e.col == 0)
      throw Error(ErrorKind::ParseError, csv_path.string() + ": malformed line " + std::to_string(lineno));
    entries.push_back(e);
  }
  SolutionTable table;
  for (const auto& e : entries) {
    table.regimes = std::max(table.regimes, e.regime);
    table.dim = std::max(table.dim, e.row);
  }
  const std::size_t per_level = table.regimes * table.dim * table.dim;
  if (per_level == 0 || entries.size() % per_level != 0)
    throw Error(ErrorKind::ParseError, csv_path.string() + ": incomplete table");
  const std::size_t levels = entries.size() / per_level;
  table.P.assign(levels * table.regimes, SymMatrix(table.dim));
  table.Lambda.assign(levels * table.regimes, SymMatrix(table.dim));
  std::vector<Matrix> p_raw(levels * table.regimes, Matrix(table.dim, table.dim));
  std::vector<Matrix> l_raw = p_raw;
  for (std::size_t idx = 0; idx < entries.size(); ++idx) {
    const auto& e = entries[idx];
    const std::size_t k = idx / per_level;
    if (idx % per_level == 0) table.times.push_back(e.t);
    if (e.t != table.times[k] || e.col > table.dim)
      throw Error(ErrorKind::ParseError, csv_path.string() + ": rows are not in level order");
    p_raw[k * table.regimes + e.regime - 1](e.row - 1, e.col - 1) = e.p;
    l_raw[k * table.regimes + e.regime - 1](e.row - 1, e.col - 1) = e.l;
  }
  for (std::size_t q = 0; q < p_raw.size(); ++q) {
    table.P[q] = SymMatrix::symmetrized(p_raw[q]);
    table.Lambda[q] = SymMatrix::symmetrized(l_raw[q]);
  }
  return table;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace regimelq
