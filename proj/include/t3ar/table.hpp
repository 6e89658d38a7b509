#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace t3ar {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Column-named result table, written as CSV with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::string_view col) const;
  std::string text(std::size_t row, std::string_view col) const;

  /// Header line, then one line per row. Doubles use the shortest
  /// round-trip representation. `preamble` lines are emitted first, each
  /// prefixed with "# ".
  std::string to_csv(std::span<const std::string> preamble = {}) const;

  /// Mean of `value_col` over rows grouped by the rendered `key_col`,
  /// in first-appearance order.
  std::vector<std::pair<std::string, double>> mean_by(std::string_view key_col,
                                                      std::string_view value_col) const;
};

std::string format_cell(const Cell& cell);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace t3ar
