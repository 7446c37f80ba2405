#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dpa {

struct MetricsRow {
  std::size_t iteration = 0;
  double p_global_s = 0.0;
  double p_global_t = 0.0;
  double gap_global = 0.0;
  double p_instance_s = 0.0;
  double p_instance_t = 0.0;
  double gap_instance = 0.0;
  double w_s = 0.0;
  double w_t = 0.0;
  double w_gap = 0.0;
  double w_figure = 0.0;
  double inst_weight_s = 0.0;
  double inst_weight_t = 0.0;
  double neg_frac_global = 0.0;
  double neg_frac_instance = 0.0;
  double excluded_frac_instance = 0.0;
  double loss_det = 0.0;
  double loss_global = 0.0;
  double loss_instance = 0.0;
  double loss_pcc = 0.0;
  double alpha = 0.0;
  double loss_total = 0.0;
  double loss_bound = 0.0;
  double target_shared_acc = 0.0;
  double radius_s = 0.0;
  double radius_t = 0.0;
  double eps_s = 0.0;
  double eps_t = 0.0;
  std::string flags;
};

inline constexpr std::size_t kMetricsColumns = 29;
const std::array<std::string_view, kMetricsColumns>& metrics_header();

std::string metrics_header_line();
std::string to_csv_line(const MetricsRow& row);

// Shortest round-trip decimal representation.
std::string format_double(double v);

class CsvError : public std::runtime_error {
 public:
  explicit CsvError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal comma-separated table (no quoting; fields never contain commas).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws CsvError naming the missing columns.
  std::vector<std::size_t> require(const std::vector<std::string>& columns) const;
  std::vector<double> numeric_column(std::size_t col) const;
};

// Throws CsvError with the 1-based line number of the first malformed line.
CsvTable parse_csv(std::istream& in, const std::string& source_name = "<csv>");
CsvTable read_csv(const std::string& path);

std::vector<MetricsRow> parse_metrics(const CsvTable& table);

// Running mean of per-step rows; flags are unioned. The gap columns of the
// mean row are recomputed from the mean probabilities.
class MetricsAccumulator {
 public:
  void add(const MetricsRow& row);
  bool empty() const { return count_ == 0; }
  MetricsRow mean(std::size_t iteration) const;
  void reset() { *this = MetricsAccumulator{}; }

 private:
  MetricsRow sum_;
  std::size_t count_ = 0;
  std::size_t eps_count_ = 0;
  std::vector<std::string> flags_;
};

}  // namespace dpa
