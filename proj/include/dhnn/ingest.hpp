#pragma once

#include <Eigen/Dense>
#include <istream>
#include <string>
#include <vector>

#include "dhnn/common.hpp"

namespace dhnn::ingest {

// Named multivariate time series: one row per timestamp, one column per
// series. After loading, every cell is a finite real.
struct SeriesTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // T x N_s
  int target_index = 0;
  std::string frequency_note;

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index n_series() const { return values.cols(); }
  void validate() const;
};

// One supervised sample: the past m observations of every series plus the
// next q values of the target series.
struct WindowSample {
  Eigen::MatrixXd features;  // m x N_s, rows t-m+1..t
  Eigen::VectorXd target;    // q values, rows t+1..t+q of the target column
  long window_end = 0;       // t, as a row index of the source table
};

struct CsvSchema {
  std::string target_column;
  char delimiter = ',';
  bool has_header = true;
};

// Loads a CSV, drops non-numeric columns, forward-fills missing cells and
// trims rows that precede the first valid value of any surviving column.
SeriesTable load_csv(const std::string& path, const CsvSchema& schema);
SeriesTable load_csv(std::istream& in, const CsvSchema& schema,
                     const std::string& origin = "<stream>");

// r_t = ln(x_t) - ln(x_{t-1}); output has T-1 rows.
SeriesTable log_returns(const SeriesTable& table);

// Trailing-window z-score with window w (population std); the first w-1
// rows are dropped. Flat windows (sigma = 0) normalize to 0.
SeriesTable rolling_normalize(const SeriesTable& table, int w);

// Per-row trailing mean/std of one column, aligned with rolling_normalize
// output rows. Used to map normalized-scale predictions back.
struct RollingStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> pre_norm_value;  // the column value being normalized
};
RollingStats rolling_stats(const SeriesTable& table, int column, int w);

std::vector<WindowSample> make_windows(const SeriesTable& table, int m, int q);

struct SplitRatios {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct Split {
  std::vector<WindowSample> train;
  std::vector<WindowSample> val;
  std::vector<WindowSample> test;
};

// Contiguous chronological slices; val/test take max(1, floor(ratio*n))
// samples each and train absorbs the remainder.
Split chronological_split(std::vector<WindowSample> samples,
                          const SplitRatios& ratios = {});

}  // namespace dhnn::ingest
