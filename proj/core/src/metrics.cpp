#include "dpa/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dpa {

namespace {

// Field accessors in column order, excluding iteration (first) and flags (last).
constexpr std::array<double MetricsRow::*, kMetricsColumns - 2> kNumeric = {
    &MetricsRow::p_global_s,        &MetricsRow::p_global_t,
    &MetricsRow::gap_global,        &MetricsRow::p_instance_s,
    &MetricsRow::p_instance_t,      &MetricsRow::gap_instance,
    &MetricsRow::w_s,               &MetricsRow::w_t,
    &MetricsRow::w_gap,             &MetricsRow::w_figure,
    &MetricsRow::inst_weight_s,     &MetricsRow::inst_weight_t,
    &MetricsRow::neg_frac_global,   &MetricsRow::neg_frac_instance,
    &MetricsRow::excluded_frac_instance, &MetricsRow::loss_det,
    &MetricsRow::loss_global,       &MetricsRow::loss_instance,
    &MetricsRow::loss_pcc,          &MetricsRow::alpha,
    &MetricsRow::loss_total,        &MetricsRow::loss_bound,
    &MetricsRow::target_shared_acc, &MetricsRow::radius_s,
    &MetricsRow::radius_t,          &MetricsRow::eps_s,
    &MetricsRow::eps_t,
};

constexpr std::array<std::string_view, kMetricsColumns> kHeader = {
    "iteration",     "p_global_s",    "p_global_t",      "gap_global",
    "p_instance_s",  "p_instance_t",  "gap_instance",    "w_s",
    "w_t",           "w_gap",         "w_figure",        "inst_weight_s",
    "inst_weight_t", "neg_frac_global", "neg_frac_instance", "excluded_frac_instance",
    "loss_det",      "loss_global",   "loss_instance",   "loss_pcc",
    "alpha",         "loss_total",    "loss_bound",      "target_shared_acc",
    "radius_s",      "radius_t",      "eps_s",           "eps_t",
    "flags",
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw CsvError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  return v;
}

void merge_flags(std::vector<std::string>& into, const std::string& flags) {
  std::size_t start = 0;
  while (start < flags.size()) {
    const auto bar = flags.find('|', start);
    const auto tok = flags.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
    if (!tok.empty() && std::find(into.begin(), into.end(), tok) == into.end()) into.push_back(tok);
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
}

}  // namespace

const std::array<std::string_view, kMetricsColumns>& metrics_header() { return kHeader; }

std::string metrics_header_line() {
  std::string out;
  for (std::size_t i = 0; i < kHeader.size(); ++i) {
    if (i) out += ',';
    out += kHeader[i];
  }
  return out;
}

std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string to_csv_line(const MetricsRow& row) {
  std::string out = std::to_string(row.iteration);
  for (auto field : kNumeric) {
    out += ',';
    out += format_double(row.*field);
  }
  out += ',';
  out += row.flags;
  return out;
}

std::vector<std::size_t> CsvTable::require(const std::vector<std::string>& columns) const {
  std::vector<std::size_t> idx;
  std::string missing;
  for (const auto& c : columns) {
    const auto it = std::find(header.begin(), header.end(), c);
    if (it == header.end()) {
      missing += missing.empty() ? c : ", " + c;
    } else {
      idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (!missing.empty()) throw CsvError("missing columns: " + missing);
  return idx;
}

std::vector<double> CsvTable::numeric_column(std::size_t col) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(parse_double(rows[r][col], r + 2));
  return out;
}

CsvTable parse_csv(std::istream& in, const std::string& source_name) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      t.header = split(line);
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw CsvError(source_name + ": line " + std::to_string(lineno) + ": expected " +
                     std::to_string(t.header.size()) + " fields, found " +
                     std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (lineno == 0) throw CsvError(source_name + ": empty file");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);
  return parse_csv(in, path);
}

std::vector<MetricsRow> parse_metrics(const CsvTable& table) {
  std::vector<std::string> names(kHeader.begin(), kHeader.end());
  const auto idx = table.require(names);
  std::vector<MetricsRow> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    MetricsRow row;
    row.iteration = static_cast<std::size_t>(parse_double(f[idx[0]], r + 2));
    for (std::size_t k = 0; k < kNumeric.size(); ++k) {
      row.*kNumeric[k] = parse_double(f[idx[k + 1]], r + 2);
    }
    row.flags = f[idx.back()];
    out.push_back(std::move(row));
  }
  return out;
}

void MetricsAccumulator::add(const MetricsRow& row) {
  for (auto field : kNumeric) {
    if (field == &MetricsRow::eps_s || field == &MetricsRow::eps_t) continue;
    sum_.*field += row.*field;
  }
  // eps is only meaningful on steps where the constraint was defined.
  if (row.eps_s != 0.0 || row.eps_t != 0.0) {
    sum_.eps_s += row.eps_s;
    sum_.eps_t += row.eps_t;
    ++eps_count_;
  }
  merge_flags(flags_, row.flags);
  ++count_;
}

MetricsRow MetricsAccumulator::mean(std::size_t iteration) const {
  MetricsRow out;
  out.iteration = iteration;
  if (count_ == 0) return out;
  const double inv = 1.0 / static_cast<double>(count_);
  for (auto field : kNumeric) out.*field = sum_.*field * inv;
  out.eps_s = eps_count_ ? sum_.eps_s / static_cast<double>(eps_count_) : 0.0;
  out.eps_t = eps_count_ ? sum_.eps_t / static_cast<double>(eps_count_) : 0.0;
  // Gaps compare the interval's mean probabilities, so batch noise averages out.
  out.gap_global = std::abs(out.p_global_s - out.p_global_t);
  out.gap_instance = std::abs(out.p_instance_s - out.p_instance_t);
  for (const auto& f : flags_) out.flags += out.flags.empty() ? f : "|" + f;
  return out;
}

}  // namespace dpa
