#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dhnn {

// Error categories; the CLI maps each to a distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal rendering that round-trips through parse_double.
std::string format_double(double v);
double parse_double(std::string_view s);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

// splitmix64-style combiner for deriving per-window / per-stage seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Worker count honoring the DHNN_THREADS env cap.
int thread_budget(int n_items);

// Runs body(0..n-1) over a bounded pool; rethrows the first worker exception.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace dhnn
