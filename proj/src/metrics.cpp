#include "dhnn/metrics.hpp"

#include <cmath>
#include <sstream>

namespace dhnn::metrics {

namespace {

void require_pair(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.empty()) throw DataError("metrics need at least one sample");
  if (y.size() != y_hat.size()) throw DataError("metrics: length mismatch");
}

}  // namespace

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
  require_pair(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

double mae(const std::vector<double>& y, const std::vector<double>& y_hat) {
  require_pair(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

double mape(const std::vector<double>& y, const std::vector<double>& y_hat, int* excluded) {
  require_pair(y, y_hat);
  double acc = 0.0;
  int used = 0;
  int skipped = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      ++skipped;
      continue;
    }
    acc += std::abs((y[i] - y_hat[i]) / y[i]);
    ++used;
  }
  if (excluded) *excluded = skipped;
  if (used == 0) throw DataError("MAPE undefined: every target value is zero");
  return 100.0 * acc / static_cast<double>(used);
}

MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& y_hat,
                              const std::string& dataset_tag, const std::string& model_tag) {
  MetricsReport report;
  report.rmse = rmse(y, y_hat);
  report.mae = mae(y, y_hat);
  report.mape = mape(y, y_hat, &report.excluded_mape_terms);
  report.n_samples = static_cast<int>(y.size());
  report.dataset_tag = dataset_tag;
  report.model_tag = model_tag;
  return report;
}

std::string render_metrics_line(const MetricsReport& report) {
  std::ostringstream out;
  out << report.dataset_tag << ", " << report.model_tag << ", " << format_double(report.rmse)
      << ", " << format_double(report.mae) << ", " << format_double(report.mape) << ", "
      << report.n_samples << ", " << report.excluded_mape_terms;
  return out.str();
}

std::vector<Eigen::VectorXd> persistence_baseline(const std::vector<ingest::WindowSample>& samples,
                                                  int target_index) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (target_index < 0 || target_index >= s.features.cols()) {
      throw DataError("persistence baseline: target index out of range");
    }
    const double last = s.features(s.features.rows() - 1, target_index);
    out.push_back(Eigen::VectorXd::Constant(s.target.size(), last));
  }
  return out;
}

}  // namespace dhnn::metrics
