#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpbm/problem.hpp"

namespace dpbm {

LabelMap LabelMap::signed_labels() {
  LabelMap m;
  m.mapping = {{1.0, 1.0}, {-1.0, -1.0}, {0.0, -1.0}};
  return m;
}

LabelMap LabelMap::one_vs_rest(double positive) {
  LabelMap m;
  m.mapping = {{positive, 1.0}};
  m.otherwise = -1.0;
  return m;
}

double LabelMap::operator()(double raw, long line) const {
  if (auto it = mapping.find(raw); it != mapping.end()) return it->second;
  if (otherwise) return *otherwise;
  throw std::runtime_error("line " + std::to_string(line) + ": label " + std::to_string(raw) +
                           " has no mapping to +-1");
}

namespace {

double parse_double(std::string_view tok, long line, const char* what) {
  // std::from_chars for double is available in libstdc++ 11.
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw std::runtime_error("line " + std::to_string(line) + ": invalid " + what + " '" + std::string(tok) + "'");
  return v;
}

long parse_index(std::string_view tok, long line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw std::runtime_error("line " + std::to_string(line) + ": invalid feature index '" + std::string(tok) + "'");
  if (v <= 0) throw std::runtime_error("line " + std::to_string(line) + ": feature indices are 1-based, got " + std::to_string(v));
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t pos = s.find(sep, start);
    const std::size_t end = pos == std::string_view::npos ? s.size() : pos;
    out.push_back(s.substr(start, end - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset load_libsvm(const std::string& path, const LabelMap& labels, Index dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");

  struct Row {
    double label = 0.0;
    std::vector<std::pair<long, double>> entries;
  };
  std::vector<Row> rows;
  long max_index = 0;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = trim(view.substr(0, hash));
    if (view.empty()) continue;
    Row row;
    bool first = true;
    for (std::string_view tok : split(view, ' ')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      if (first) {
        row.label = labels(parse_double(tok, lineno, "label"), lineno);
        first = false;
        continue;
      }
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw std::runtime_error("line " + std::to_string(lineno) + ": expected idx:val, got '" + std::string(tok) + "'");
      const long idx = parse_index(tok.substr(0, colon), lineno);
      const double val = parse_double(tok.substr(colon + 1), lineno, "feature value");
      if (dim > 0 && idx > dim)
        throw std::runtime_error("line " + std::to_string(lineno) + ": index " + std::to_string(idx) +
                                 " exceeds dimension " + std::to_string(dim));
      max_index = std::max(max_index, idx);
      row.entries.emplace_back(idx, val);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("dataset '" + path + "' has no samples");

  const Index d = dim > 0 ? dim : static_cast<Index>(max_index);
  if (d == 0) throw std::runtime_error("dataset '" + path + "' has no features");
  Dataset data;
  data.features = RowMatrix::Zero(static_cast<Index>(rows.size()), d);
  data.labels.resize(static_cast<Index>(rows.size()));
  for (Index j = 0; j < static_cast<Index>(rows.size()); ++j) {
    data.labels[j] = rows[j].label;
    for (auto [idx, val] : rows[j].entries) data.features(j, idx - 1) = val;
  }
  return data;
}

Dataset load_csv(const std::string& path, const LabelMap& labels) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset '" + path + "' is empty");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header.front()) != "label")
    throw std::runtime_error("line 1: CSV header must be 'label,f1,...,fd'");
  const Index d = static_cast<Index>(header.size()) - 1;

  std::vector<double> values;
  std::vector<double> ys;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto cells = split(view, ',');
    if (static_cast<Index>(cells.size()) != d + 1)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected " + std::to_string(d + 1) +
                               " columns, got " + std::to_string(cells.size()));
    ys.push_back(labels(parse_double(trim(cells[0]), lineno, "label"), lineno));
    for (Index c = 1; c <= d; ++c) values.push_back(parse_double(trim(cells[c]), lineno, "feature value"));
  }
  if (ys.empty()) throw std::runtime_error("dataset '" + path + "' has no samples");
  Dataset data;
  data.features = Eigen::Map<const RowMatrix>(values.data(), static_cast<Index>(ys.size()), d);
  data.labels = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
  return data;
}

Dataset load_dataset(const std::string& path, const LabelMap& labels, Index dim) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_csv(path, labels);
  return load_libsvm(path, labels, dim);
}

}  // namespace dpbm
