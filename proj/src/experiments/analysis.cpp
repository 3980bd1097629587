#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "halpern/experiments.hpp"

namespace halpern {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& values,
                 std::optional<std::pair<double, double>> window, bool envelope) {
  if (n.size() != values.size()) throw DomainError("fit_rate: n and values differ in length");
  if (n.empty()) throw DomainError("fit_rate: empty trace");

  std::vector<std::size_t> order(n.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return n[a] < n[b]; });
  std::vector<double> xs(n.size()), ys(n.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    xs[i] = n[order[i]];
    ys[i] = values[order[i]];
  }
  if (envelope) {
    for (std::size_t i = ys.size() - 1; i-- > 0;) ys[i] = std::max(ys[i], ys[i + 1]);
  }

  RateFit fit;
  fit.envelope = envelope;
  if (window) {
    fit.window_lo = window->first;
    fit.window_hi = window->second;
  } else {
    const double first = *std::find_if(xs.begin(), xs.end(), [](double v) { return v > 0.0; });
    fit.window_hi = xs.back();
    fit.window_lo = std::max(first, xs.front() + 0.1 * (xs.back() - xs.front()));
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < fit.window_lo || xs[i] > fit.window_hi || xs[i] <= 0.0) continue;
    if (!(ys[i] > 0.0)) {
      throw DomainError("fit_rate: nonpositive value " + format_double(ys[i]) + " at n = " + format_double(xs[i]));
    }
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
    ++m;
  }
  if (m < 5) throw DomainError("fit_rate: window holds " + std::to_string(m) + " points, need at least 5");
  const double md = static_cast<double>(m);
  const double vxx = sxx - sx * sx / md;
  const double vxy = sxy - sx * sy / md;
  const double vyy = syy - sy * sy / md;
  if (!(vxx > 0.0)) throw DomainError("fit_rate: window has no spread in n");
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / md;
  fit.points = m;
  if (vyy <= 0.0) {
    fit.r_squared = 1.0;
  } else {
    fit.r_squared = std::clamp(vxy * vxy / (vxx * vyy), 0.0, 1.0);
  }
  return fit;
}

namespace {

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
  bool complete = true;

  void add(const std::optional<double>& v) {
    if (!v) {
      complete = false;
      return;
    }
    sum += *v;
    sum_sq += *v * *v;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
  std::optional<double> standard_error() const {
    if (count < 2) return std::nullopt;
    const double c = static_cast<double>(count);
    const double var = std::max(0.0, (sum_sq - sum * sum / c) / (c - 1.0));
    return std::sqrt(var / c);
  }
};

}  // namespace

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs) {
  std::size_t length = 0;
  for (const auto& r : runs) length = std::max(length, r.rows.size());
  std::vector<AggregateRow> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    Moments residual, dist, noise;
    double queries = 0.0;
    AggregateRow row;
    for (const auto& r : runs) {
      if (i >= r.rows.size()) continue;
      const TraceRow& t = r.rows[i];
      row.n = t.n;
      row.step = t.step;
      row.batch = t.batch;
      queries += static_cast<double>(t.cum_queries);
      residual.add(t.residual);
      dist.add(t.dist_to_fp);
      noise.add(t.noise_norm);
    }
    row.count = residual.count;
    row.mean_cum_queries = queries / static_cast<double>(row.count);
    row.mean_residual = residual.mean();
    row.se_residual = residual.standard_error();
    if (dist.complete && dist.count > 0) {
      row.mean_dist = dist.mean();
      row.se_dist = dist.standard_error();
    }
    if (noise.complete && noise.count > 0) {
      row.mean_noise = noise.mean();
      row.se_noise = noise.standard_error();
    }
    out.push_back(row);
  }
  return out;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

void write_run_csv(std::ostream& out, const RunRecord& run) {
  out << "n,beta_or_alpha,k_n,cum_queries,residual,dist_to_fp,noise_norm\n";
  for (const auto& r : run.rows) {
    out << r.n << ',' << format_double(r.step) << ',' << r.batch << ',' << r.cum_queries << ','
        << format_double(r.residual) << ',' << cell(r.dist_to_fp) << ',' << cell(r.noise_norm) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "n,count,beta_or_alpha,k_n,mean_cum_queries,mean_residual,se_residual,mean_dist_to_fp,se_dist_to_fp,"
         "mean_noise_norm,se_noise_norm\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.count << ',' << format_double(r.step) << ',' << r.batch << ','
        << format_double(r.mean_cum_queries) << ',' << format_double(r.mean_residual) << ',' << cell(r.se_residual)
        << ',' << cell(r.mean_dist) << ',' << cell(r.se_dist) << ',' << cell(r.mean_noise) << ','
        << cell(r.se_noise) << '\n';
  }
}

std::vector<std::vector<double>> read_csv_columns(std::istream& in, const std::vector<std::string>& columns) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw DomainError("read_csv_columns: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  std::vector<std::size_t> index;
  for (const auto& name : columns) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DomainError("read_csv_columns: no column \"" + name + "\"");
    index.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::vector<double>> out(columns.size());
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    for (std::size_t c = 0; c < index.size(); ++c) {
      if (index[c] >= cells.size() || cells[index[c]].empty()) {
        out[c].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        std::size_t used = 0;
        out[c].push_back(std::stod(cells[index[c]], &used));
        if (used != cells[index[c]].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw DomainError("read_csv_columns: line " + std::to_string(line_no) + ": bad number \"" +
                          cells[index[c]] + "\"");
      }
    }
  }
  return out;
}

}  // namespace halpern
