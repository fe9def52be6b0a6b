#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dhnn/common.hpp"
#include "dhnn/ingest.hpp"

namespace dhnn::metrics {

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;  // percentage scale
  int n_samples = 0;
  int excluded_mape_terms = 0;
  std::string dataset_tag;
  std::string model_tag;
};

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat);
double mae(const std::vector<double>& y, const std::vector<double>& y_hat);
// Percentage MAPE; y_i = 0 terms are excluded and counted via `excluded`.
double mape(const std::vector<double>& y, const std::vector<double>& y_hat,
            int* excluded = nullptr);

MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& y_hat,
                              const std::string& dataset_tag, const std::string& model_tag);

// `dataset, model, rmse, mae, mape, n, excluded_mape_terms`
std::string render_metrics_line(const MetricsReport& report);

// Repeats the last observed target value q times for every sample.
std::vector<Eigen::VectorXd> persistence_baseline(const std::vector<ingest::WindowSample>& samples,
                                                  int target_index);

}  // namespace dhnn::metrics
