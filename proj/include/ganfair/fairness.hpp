#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganfair/dataset.hpp"
#include "ganfair/tensor.hpp"

namespace ganfair {

// Half L1 distance between two distributions on the same groups.
inline double tv_distance(const std::vector<double>& rates,
                          const std::vector<double>& target) {
  if (rates.size() != target.size()) {
    throw std::invalid_argument("tv_distance: length mismatch");
  }
  auto check_simplex = [](const std::vector<double>& p, const char* name) {
    double total = 0.0;
    for (double v : p) total += v;
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument(std::string("tv_distance: ") + name +
                                  " must sum to 1");
    }
  };
  check_simplex(rates, "rates");
  check_simplex(target, "target");
  double acc = 0.0;
  for (std::size_t g = 0; g < rates.size(); ++g) {
    acc += std::abs(rates[g] - target[g]);
  }
  return 0.5 * acc;
}

// Per-group counts and rates of one generated sample set, with the TV
// discrepancy against a target distribution.
struct GroupRateReport {
  std::vector<long> counts;
  std::vector<double> rates;
  long total = 0;
  std::string assigner;
  std::vector<double> target;
  double tv = 0.0;
  std::string run_id;
  std::uint64_t seed = 0;
  std::string model;
  std::string dataset;
  std::string status = "ok";

  std::size_t groups() const { return rates.size(); }
};

inline GroupRateReport group_rates(const Tensor& samples,
                                   const GroupAssigner& assigner,
                                   std::size_t k,
                                   const std::vector<double>& target) {
  if (samples.rows() == 0) {
    throw std::invalid_argument("group_rates: empty sample set");
  }
  if (target.size() != k) {
    throw std::invalid_argument("group_rates: target length != k");
  }
  GroupRateReport report;
  report.counts.assign(k, 0);
  report.total = static_cast<long>(samples.rows());
  report.assigner = assigner.describe();
  report.target = target;
  for (int label : assigner.assign_all(samples)) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::invalid_argument("group_rates: assigner produced group " +
                                  std::to_string(label) + " outside k=" +
                                  std::to_string(k));
    }
    report.counts[static_cast<std::size_t>(label)] += 1;
  }
  report.rates.resize(k);
  for (std::size_t g = 0; g < k; ++g) {
    report.rates[g] =
        static_cast<double>(report.counts[g]) / static_cast<double>(report.total);
  }
  report.tv = tv_distance(report.rates, target);
  return report;
}

// Multi-run order statistics. Median is the lower median for even counts;
// quartiles follow the same index convention.
struct AggregateReport {
  std::size_t runs = 0;
  std::vector<double> rate_median;
  std::vector<double> rate_iqr;
  std::vector<double> rate_min;
  std::vector<double> rate_max;
  double tv_median = 0.0;
  double tv_max = 0.0;
  double worst_group_min_rate = 0.0;
  double min_rate_median = 0.0;  // median over runs of each run's lowest rate
};

namespace detail {

inline double lower_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const std::size_t idx =
      static_cast<std::size_t>(static_cast<double>(values.size() - 1) * q);
  return values[idx];
}

inline double lower_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

}  // namespace detail

inline AggregateReport aggregate_runs(
    const std::vector<GroupRateReport>& reports) {
  if (reports.empty()) {
    throw std::invalid_argument("aggregate_runs: no reports");
  }
  const std::size_t k = reports.front().groups();
  for (const auto& r : reports) {
    if (r.groups() != k) {
      throw std::invalid_argument("aggregate_runs: inconsistent group counts");
    }
  }
  AggregateReport agg;
  agg.runs = reports.size();
  agg.rate_median.resize(k);
  agg.rate_iqr.resize(k);
  agg.rate_min.resize(k);
  agg.rate_max.resize(k);
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<double> column;
    for (const auto& r : reports) column.push_back(r.rates[g]);
    agg.rate_median[g] = detail::lower_median(column);
    agg.rate_iqr[g] = detail::lower_quantile(column, 0.75) -
                      detail::lower_quantile(column, 0.25);
    agg.rate_min[g] = *std::min_element(column.begin(), column.end());
    agg.rate_max[g] = *std::max_element(column.begin(), column.end());
  }
  std::vector<double> tvs, run_minima;
  for (const auto& r : reports) {
    tvs.push_back(r.tv);
    run_minima.push_back(*std::min_element(r.rates.begin(), r.rates.end()));
  }
  agg.tv_median = detail::lower_median(tvs);
  agg.tv_max = *std::max_element(tvs.begin(), tvs.end());
  agg.worst_group_min_rate =
      *std::min_element(run_minima.begin(), run_minima.end());
  agg.min_rate_median = detail::lower_median(run_minima);
  return agg;
}

// ---------------------------------------------------------------------------
// Report CSV. Rates are printed with 6 decimals; the status column carries
// the experiment runner's diverged sentinel ("ok" otherwise).
// ---------------------------------------------------------------------------

inline const char* kReportCsvHeader =
    "run_id,seed,model,dataset,group_id,target_prop,count,rate,tv_distance,"
    "status";

inline void write_report_rows(const std::vector<GroupRateReport>& reports,
                              std::ostream& os) {
  os << kReportCsvHeader << '\n';
  char buf[64];
  auto rate6 = [&](double v) {
    if (std::isnan(v)) return std::string("nan");
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    for (std::size_t g = 0; g < r.groups(); ++g) {
      os << r.run_id << ',' << r.seed << ',' << r.model << ',' << r.dataset
         << ',' << g << ',' << rate6(r.target[g]) << ',' << r.counts[g] << ','
         << rate6(r.rates[g]) << ',' << rate6(r.tv) << ',' << r.status << '\n';
    }
  }
}

inline void write_report_csv(const std::vector<GroupRateReport>& reports,
                             const std::string& path) {
  std::ofstream os(path, std::ios::binary);  // keep LF endings everywhere
  if (!os) throw std::runtime_error("write_report_csv: cannot write " + path);
  write_report_rows(reports, os);
  if (!os) throw std::runtime_error("write_report_csv: write failed " + path);
}

inline std::vector<GroupRateReport> read_report_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kReportCsvHeader) {
    throw std::runtime_error("read_report_csv: unexpected header");
  }
  std::vector<GroupRateReport> reports;
  auto parse_rate = [](const std::string& cell) {
    return cell == "nan" ? std::nan("") : std::stod(cell);
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string run_id, seed, model, dataset, group, target, count, rate, tv,
        status;
    std::getline(ls, run_id, ',');
    std::getline(ls, seed, ',');
    std::getline(ls, model, ',');
    std::getline(ls, dataset, ',');
    std::getline(ls, group, ',');
    std::getline(ls, target, ',');
    std::getline(ls, count, ',');
    std::getline(ls, rate, ',');
    std::getline(ls, tv, ',');
    std::getline(ls, status, ',');
    if (reports.empty() || reports.back().run_id != run_id) {
      GroupRateReport r;
      r.run_id = run_id;
      r.seed = std::stoull(seed);
      r.model = model;
      r.dataset = dataset;
      r.status = status;
      reports.push_back(std::move(r));
    }
    GroupRateReport& r = reports.back();
    r.target.push_back(parse_rate(target));
    r.counts.push_back(std::stol(count));
    r.rates.push_back(parse_rate(rate));
    r.tv = parse_rate(tv);
    r.total += std::stol(count);
  }
  return reports;
}

inline std::vector<GroupRateReport> read_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_report_csv: cannot read " + path);
  return read_report_csv(is);
}

// Fraction of samples generated under each condition that the assigner maps
// back to that group.
inline double conditional_purity(const Tensor& samples,
                                 const GroupAssigner& assigner, int label) {
  if (samples.rows() == 0) {
    throw std::invalid_argument("conditional_purity: empty sample set");
  }
  std::size_t hits = 0;
  for (int assigned : assigner.assign_all(samples)) {
    hits += (assigned == label);
  }
  return static_cast<double>(hits) / static_cast<double>(samples.rows());
}

}  // namespace ganfair
