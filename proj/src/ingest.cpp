#include "dhnn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dhnn::ingest {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(const std::string& cell) {
  if (cell.empty()) return true;
  if (cell.size() == 3) {
    auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    return lower(cell[0]) == 'n' && lower(cell[1]) == 'a' && lower(cell[2]) == 'n';
  }
  return false;
}

bool try_parse_cell(const std::string& cell, double* out) {
  try {
    *out = parse_double(cell);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

}  // namespace

void SeriesTable::validate() const {
  if (values.rows() < 2) throw DataError("series table needs at least 2 rows");
  if (values.cols() < 1) throw DataError("series table has no columns");
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw DataError("series table name/column count mismatch");
  }
  if (target_index < 0 || target_index >= values.cols()) {
    throw DataError("target index out of range");
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (!std::isfinite(values(r, c))) {
        throw DataError("non-finite value at row " + std::to_string(r) +
                        ", column " + names[static_cast<std::size_t>(c)]);
      }
    }
  }
}

SeriesTable load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open CSV file: " + path);
  return load_csv(in, schema, path);
}

SeriesTable load_csv(std::istream& in, const CsvSchema& schema,
                     const std::string& origin) {
  std::vector<std::string> raw_names;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_pending = schema.has_header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, schema.delimiter);
    for (auto& c : cells) c = trim(c);
    if (header_pending) {
      raw_names = cells;
      header_pending = false;
      continue;
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw DataError(origin + ": no data rows");

  const std::size_t n_cols = rows.front().size();
  if (raw_names.empty()) {
    for (std::size_t c = 0; c < n_cols; ++c) raw_names.push_back("c" + std::to_string(c));
  }
  if (raw_names.size() != n_cols) {
    throw DataError(origin + ": header has " + std::to_string(raw_names.size()) +
                    " columns but first data row has " + std::to_string(n_cols));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != n_cols) {
      throw DataError(origin + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " cells, expected " +
                      std::to_string(n_cols));
    }
  }

  // Classify columns: numeric (values or missing markers only) vs categorical.
  std::vector<bool> numeric(n_cols, true);
  std::vector<bool> all_missing(n_cols, true);
  for (std::size_t c = 0; c < n_cols; ++c) {
    for (const auto& row : rows) {
      const std::string& cell = row[c];
      if (is_missing_token(cell)) continue;
      double v;
      if (!try_parse_cell(cell, &v)) {
        numeric[c] = false;
        break;
      }
      all_missing[c] = false;
    }
  }

  std::vector<int> keep;
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (!numeric[c]) continue;
    if (all_missing[c]) {
      throw DataError(origin + ": column '" + raw_names[c] + "' has no valid values");
    }
    keep.push_back(static_cast<int>(c));
  }
  if (keep.empty()) throw DataError(origin + ": no numeric columns");

  SeriesTable table;
  for (int c : keep) table.names.push_back(raw_names[static_cast<std::size_t>(c)]);
  auto it = std::find(table.names.begin(), table.names.end(), schema.target_column);
  if (it == table.names.end()) {
    throw DataError(origin + ": target column '" + schema.target_column +
                    "' absent (or non-numeric)");
  }
  table.target_index = static_cast<int>(it - table.names.begin());

  const Eigen::Index t_raw = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd values(t_raw, n);
  for (Eigen::Index r = 0; r < t_raw; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const std::string& cell = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(keep[c])];
      if (is_missing_token(cell)) {
        values(r, c) = kNan;
      } else {
        values(r, c) = parse_double(cell);
      }
    }
  }

  // Drop rows that precede the first valid value of any column, then
  // forward-fill with the most recent prior observation.
  Eigen::Index first_full = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index r = 0;
    while (r < t_raw && std::isnan(values(r, c))) ++r;
    first_full = std::max(first_full, r);
  }
  const Eigen::Index t = t_raw - first_full;
  if (t < 2) throw DataError(origin + ": fewer than 2 usable rows after trimming");
  table.values.resize(t, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    double last = values(first_full, c);
    for (Eigen::Index r = 0; r < t; ++r) {
      double v = values(first_full + r, c);
      if (std::isnan(v)) v = last;
      table.values(r, c) = v;
      last = v;
    }
  }
  table.validate();
  return table;
}

SeriesTable log_returns(const SeriesTable& table) {
  table.validate();
  const Eigen::Index t = table.length();
  const Eigen::Index n = table.n_series();
  for (Eigen::Index r = 0; r < t; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (table.values(r, c) <= 0.0) {
        throw DataError("log returns need strictly positive values; row " +
                        std::to_string(r) + ", column " +
                        table.names[static_cast<std::size_t>(c)] + " is " +
                        format_double(table.values(r, c)));
      }
    }
  }
  SeriesTable out = table;
  out.values.resize(t - 1, n);
  for (Eigen::Index r = 1; r < t; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      out.values(r - 1, c) = std::log(table.values(r, c)) - std::log(table.values(r - 1, c));
    }
  }
  return out;
}

SeriesTable rolling_normalize(const SeriesTable& table, int w) {
  table.validate();
  if (w < 2) throw DataError("normalization window must be >= 2");
  const Eigen::Index t = table.length();
  const Eigen::Index n = table.n_series();
  if (t < w) {
    throw DataError("normalization window " + std::to_string(w) +
                    " exceeds series length " + std::to_string(t));
  }
  SeriesTable out = table;
  out.values.resize(t - w + 1, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = w - 1; r < t; ++r) {
      double mean = 0.0;
      for (Eigen::Index k = r - w + 1; k <= r; ++k) mean += table.values(k, c);
      mean /= w;
      double var = 0.0;
      for (Eigen::Index k = r - w + 1; k <= r; ++k) {
        const double d = table.values(k, c) - mean;
        var += d * d;
      }
      const double sd = std::sqrt(var / w);
      out.values(r - w + 1, c) = sd > 0.0 ? (table.values(r, c) - mean) / sd : 0.0;
    }
  }
  return out;
}

RollingStats rolling_stats(const SeriesTable& table, int column, int w) {
  table.validate();
  if (column < 0 || column >= table.n_series()) throw DataError("rolling_stats: column out of range");
  if (w < 2 || table.length() < w) throw DataError("rolling_stats: bad window");
  RollingStats stats;
  const Eigen::Index t = table.length();
  for (Eigen::Index r = w - 1; r < t; ++r) {
    double mean = 0.0;
    for (Eigen::Index k = r - w + 1; k <= r; ++k) mean += table.values(k, column);
    mean /= w;
    double var = 0.0;
    for (Eigen::Index k = r - w + 1; k <= r; ++k) {
      const double d = table.values(k, column) - mean;
      var += d * d;
    }
    stats.mean.push_back(mean);
    stats.stddev.push_back(std::sqrt(var / w));
    stats.pre_norm_value.push_back(table.values(r, column));
  }
  return stats;
}

std::vector<WindowSample> make_windows(const SeriesTable& table, int m, int q) {
  table.validate();
  if (m < 2) throw DataError("window length m must be >= 2");
  if (q < 1) throw DataError("horizon q must be >= 1");
  const Eigen::Index t = table.length();
  if (t < m + q) {
    throw DataError("series length " + std::to_string(t) + " too short for m=" +
                    std::to_string(m) + ", q=" + std::to_string(q));
  }
  std::vector<WindowSample> samples;
  samples.reserve(static_cast<std::size_t>(t - m - q + 1));
  for (Eigen::Index end = m - 1; end + q < t; ++end) {
    WindowSample s;
    s.features = table.values.block(end - m + 1, 0, m, table.n_series());
    s.target.resize(q);
    for (int k = 0; k < q; ++k) s.target(k) = table.values(end + 1 + k, table.target_index);
    s.window_end = static_cast<long>(end);
    samples.push_back(std::move(s));
  }
  return samples;
}

Split chronological_split(std::vector<WindowSample> samples, const SplitRatios& ratios) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");
  const std::size_t n = samples.size();
  if (n < 3) throw DataError("need at least 3 samples to split");
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(ratios.val * n));
  std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(ratios.test * n));
  if (n_val + n_test >= n) throw DataError("split leaves no training samples");
  const std::size_t n_train = n - n_val - n_test;
  Split out;
  out.train.assign(samples.begin(), samples.begin() + n_train);
  out.val.assign(samples.begin() + n_train, samples.begin() + n_train + n_val);
  out.test.assign(samples.begin() + n_train + n_val, samples.end());
  return out;
}

}  // namespace dhnn::ingest
