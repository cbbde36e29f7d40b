#pragma once

// Persisted solutions: a long-format CSV (t,regime,row,col,P,Lambda) with one
// row per upper-and-lower matrix entry, plus a JSON metadata sibling
// (<stem>.meta.json). Regimes and matrix indices are 1-based, numbers are
// printed with %.17g so a read-back reproduces the doubles exactly. Tree
// solutions are collapsed to the binomial-weighted mean over each level.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimelq/esre.hpp"

namespace regimelq {

struct SolutionTable {
  std::size_t regimes = 0;
  std::size_t dim = 0;
  std::vector<double> times;
  std::vector<SymMatrix> P;       // index level * regimes + regime
  std::vector<SymMatrix> Lambda;

  [[nodiscard]] const SymMatrix& p(std::size_t level, std::size_t regime) const { return P[level * regimes + regime]; }
  [[nodiscard]] const SymMatrix& lambda(std::size_t level, std::size_t regime) const {
    return Lambda[level * regimes + regime];
  }
};

/// Level-wise view of a solution (tree levels averaged with binomial weights).
SolutionTable tabulate(const EsreSolution& solution);

std::filesystem::path metadata_path(const std::filesystem::path& csv_path);
nlohmann::json solution_metadata(const EsreSolution& solution);

/// Writes the CSV and the metadata sibling. IoError on failure.
void write_solution(const EsreSolution& solution, const std::filesystem::path& csv_path);
SolutionTable read_solution_csv(const std::filesystem::path& csv_path);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

/// %.17g.
std::string format_double(double v);

}  // namespace regimelq
