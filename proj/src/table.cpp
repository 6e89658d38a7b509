#include "t3ar/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "t3ar/error.hpp"

namespace t3ar {
namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error("no column " + std::string(name));
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, std::string_view col) const {
  const Cell& c = rows.at(row).at(column(col));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  throw Error("column " + std::string(col) + " is not numeric");
}

std::string Table::text(std::size_t row, std::string_view col) const {
  return format_cell(rows.at(row).at(column(col)));
}

std::string format_cell(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  char buf[64];
  std::to_chars_result res;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) {
    res = std::to_chars(buf, buf + sizeof(buf), *i);
  } else {
    res = std::to_chars(buf, buf + sizeof(buf), std::get<double>(cell));
  }
  return std::string(buf, res.ptr);
}

std::string Table::to_csv(std::span<const std::string> preamble) const {
  std::string out;
  for (const auto& line : preamble) out += "# " + line + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, double>> Table::mean_by(std::string_view key_col,
                                                           std::string_view value_col) const {
  std::vector<std::pair<std::string, double>> sums;
  std::vector<std::size_t> counts;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto key = text(r, key_col);
    auto it = std::find_if(sums.begin(), sums.end(), [&](const auto& p) { return p.first == key; });
    if (it == sums.end()) {
      sums.emplace_back(key, 0.0);
      counts.push_back(0);
      it = sums.end() - 1;
    }
    it->second += number(r, value_col);
    ++counts[static_cast<std::size_t>(it - sums.begin())];
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i].second /= static_cast<double>(counts[i]);
  return sums;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("spearman needs two equal-length series");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace t3ar
