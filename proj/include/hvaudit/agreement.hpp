#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

// Units x annotators grid of nominal codes; std::nullopt marks a missing
// coding.
struct ReliabilityMatrix {
  std::vector<std::string> units;
  std::vector<std::string> annotators;
  std::vector<std::vector<std::optional<LabelId>>> cells;  // [unit][annotator]

  static ReliabilityMatrix with_shape(std::vector<std::string> units, std::vector<std::string> annotators);

  // Non-missing codes of one unit, in annotator order.
  std::vector<LabelId> codings(std::size_t unit) const;
};

// Throws Error(kOutOfRange) if the grid is ragged or, when num_categories is
// given, a code falls outside [0, num_categories).
void check_matrix(const ReliabilityMatrix& r, std::optional<std::size_t> num_categories = std::nullopt);

// Krippendorff's alpha for nominal data, alpha = 1 - D_o / D_e, from the
// coincidence matrix. Units with fewer than two codings are not pairable.
// Throws kInsufficientData when no unit is pairable and kDegenerateData when
// the pairable values use a single category.
double krippendorff_alpha_nominal(const ReliabilityMatrix& r);

// Mean over pairable units of the fraction of agreeing unordered pairs.
double percent_agreement(const ReliabilityMatrix& r);

// Pairable units whose codes are not unanimous, sorted by unit id.
std::vector<std::string> disagreement_queue(const ReliabilityMatrix& r);

}  // namespace hvaudit
