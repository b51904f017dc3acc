#include "hvaudit/agreement.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "hvaudit/error.hpp"

namespace hvaudit {

ReliabilityMatrix ReliabilityMatrix::with_shape(std::vector<std::string> units,
                                                std::vector<std::string> annotators) {
  ReliabilityMatrix r;
  r.cells.assign(units.size(), std::vector<std::optional<LabelId>>(annotators.size()));
  r.units = std::move(units);
  r.annotators = std::move(annotators);
  return r;
}

std::vector<LabelId> ReliabilityMatrix::codings(std::size_t unit) const {
  std::vector<LabelId> out;
  for (const auto& cell : cells[unit])
    if (cell) out.push_back(*cell);
  return out;
}

void check_matrix(const ReliabilityMatrix& r, std::optional<std::size_t> num_categories) {
  if (r.cells.size() != r.units.size())
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("matrix has {} rows for {} units", r.cells.size(), r.units.size()));
  for (std::size_t u = 0; u < r.cells.size(); ++u) {
    if (r.cells[u].size() != r.annotators.size())
      throw Error(ErrorCode::kOutOfRange, fmt::format("unit '{}' has {} cells for {} annotators",
                                                      r.units[u], r.cells[u].size(), r.annotators.size()));
    if (!num_categories) continue;
    for (const auto& cell : r.cells[u])
      if (cell && (*cell < 0 || static_cast<std::size_t>(*cell) >= *num_categories))
        throw Error(ErrorCode::kUnknownLabel, fmt::format("unit '{}' holds invalid code {}", r.units[u], *cell));
  }
}

double krippendorff_alpha_nominal(const ReliabilityMatrix& r) {
  check_matrix(r);
  // Coincidence matrix o[c][k]: each ordered pair of codes within a unit
  // contributes 1 / (m_u - 1).
  std::map<LabelId, std::map<LabelId, double>> o;
  bool pairable = false;
  for (std::size_t u = 0; u < r.cells.size(); ++u) {
    const auto codes = r.codings(u);
    if (codes.size() < 2) continue;
    pairable = true;
    const double w = 1.0 / static_cast<double>(codes.size() - 1);
    for (std::size_t i = 0; i < codes.size(); ++i)
      for (std::size_t j = 0; j < codes.size(); ++j)
        if (i != j) o[codes[i]][codes[j]] += w;
  }
  if (!pairable) throw Error(ErrorCode::kInsufficientData, "no unit has two or more codings");

  std::map<LabelId, double> marginal;
  double n = 0.0, observed = 0.0;
  for (const auto& [c, row] : o)
    for (const auto& [k, v] : row) {
      marginal[c] += v;
      n += v;
      if (c != k) observed += v;
    }
  if (marginal.size() < 2)
    throw Error(ErrorCode::kDegenerateData, "alpha is undefined: only one category occurs");

  // sum_{c != k} n_c n_k = n^2 - sum_c n_c^2
  double sum_sq = 0.0;
  for (const auto& [c, nc] : marginal) sum_sq += nc * nc;
  const double expected = n * n - sum_sq;
  return 1.0 - (n - 1.0) * observed / expected;
}

double percent_agreement(const ReliabilityMatrix& r) {
  check_matrix(r);
  double total = 0.0;
  std::size_t eligible = 0;
  for (std::size_t u = 0; u < r.cells.size(); ++u) {
    const auto codes = r.codings(u);
    if (codes.size() < 2) continue;
    std::size_t agree = 0, pairs = 0;
    for (std::size_t i = 0; i < codes.size(); ++i)
      for (std::size_t j = i + 1; j < codes.size(); ++j) {
        ++pairs;
        if (codes[i] == codes[j]) ++agree;
      }
    total += static_cast<double>(agree) / static_cast<double>(pairs);
    ++eligible;
  }
  if (eligible == 0) throw Error(ErrorCode::kInsufficientData, "no unit has two or more codings");
  return total / static_cast<double>(eligible);
}

std::vector<std::string> disagreement_queue(const ReliabilityMatrix& r) {
  check_matrix(r);
  std::vector<std::string> out;
  for (std::size_t u = 0; u < r.cells.size(); ++u) {
    const auto codes = r.codings(u);
    if (codes.size() < 2) continue;
    if (std::adjacent_find(codes.begin(), codes.end(), std::not_equal_to<>()) != codes.end())
      out.push_back(r.units[u]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hvaudit
