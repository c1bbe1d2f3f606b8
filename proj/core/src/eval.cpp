#include "foresee/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "foresee/cohort.hpp"

namespace foresee {

double c_index(const std::vector<double>& risk, const std::vector<double>& times,
               const std::vector<int>& events) {
  size_t n = risk.size();
  if (times.size() != n || events.size() != n)
    throw ShapeError("c_index: input length mismatch");
  double num = 0.0;
  long comparable = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    for (size_t j = 0; j < n; ++j) {
      if (i == j || !(times[i] < times[j])) continue;
      ++comparable;
      if (risk[i] > risk[j])
        num += 1.0;
      else if (risk[i] == risk[j])
        num += 0.5;
    }
  }
  if (comparable == 0)
    throw ValidationError("c_index: undefined, no comparable pairs");
  return num / (double)comparable;
}

KmCurve km_curve(const std::vector<double>& times, const std::vector<int>& events) {
  size_t n = times.size();
  if (n == 0) throw ValidationError("km_curve: empty sample");
  if (events.size() != n) throw ShapeError("km_curve: length mismatch");
  std::set<double> distinct;
  for (size_t i = 0; i < n; ++i)
    if (events[i]) distinct.insert(times[i]);
  KmCurve curve;
  double s = 1.0;
  for (double t : distinct) {
    int at_risk = 0, deaths = 0;
    for (size_t i = 0; i < n; ++i) {
      if (times[i] >= t) ++at_risk;
      if (events[i] && times[i] == t) ++deaths;
    }
    s *= 1.0 - (double)deaths / at_risk;
    curve.event_times.push_back(t);
    curve.survival.push_back(s);
    curve.at_risk.push_back(at_risk);
  }
  return curve;
}

double km_survival_at(const KmCurve& curve, double t) {
  double s = 1.0;
  for (size_t i = 0; i < curve.event_times.size(); ++i) {
    if (curve.event_times[i] > t) break;
    s = curve.survival[i];
  }
  return s;
}

RiskSplit median_risk_split(const std::vector<double>& risk) {
  size_t n = risk.size();
  if (n < 2) throw ValidationError("median_risk_split: need at least 2 risks");
  std::vector<double> sorted = risk;
  std::sort(sorted.begin(), sorted.end());
  double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  RiskSplit split;
  for (size_t i = 0; i < n; ++i) {
    if (risk[i] > median)
      split.high.push_back((int)i);
    else
      split.low.push_back((int)i);
  }
  split.degenerate = split.high.empty() || split.low.empty();
  return split;
}

// ---- incomplete gamma ----

namespace {

double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw ValidationError("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_p(double stat) { return gamma_q(0.5, stat / 2.0); }

LogRankResult log_rank_p(const std::vector<double>& times_a,
                         const std::vector<int>& events_a,
                         const std::vector<double>& times_b,
                         const std::vector<int>& events_b) {
  if (times_a.empty() || times_b.empty())
    throw ValidationError("log_rank_p: both groups must be nonempty");
  int total_events = 0;
  for (int e : events_a) total_events += e;
  for (int e : events_b) total_events += e;
  if (total_events == 0)
    throw ValidationError("log_rank_p: undefined, no events in either group");

  std::set<double> distinct;
  for (size_t i = 0; i < times_a.size(); ++i)
    if (events_a[i]) distinct.insert(times_a[i]);
  for (size_t i = 0; i < times_b.size(); ++i)
    if (events_b[i]) distinct.insert(times_b[i]);

  double observed_minus_expected = 0.0, variance = 0.0;
  for (double t : distinct) {
    int n1 = 0, n2 = 0, d1 = 0, d2 = 0;
    for (size_t i = 0; i < times_a.size(); ++i) {
      if (times_a[i] >= t) ++n1;
      if (events_a[i] && times_a[i] == t) ++d1;
    }
    for (size_t i = 0; i < times_b.size(); ++i) {
      if (times_b[i] >= t) ++n2;
      if (events_b[i] && times_b[i] == t) ++d2;
    }
    int n = n1 + n2, d = d1 + d2;
    if (n < 2) continue;
    double e1 = (double)d * n1 / n;
    observed_minus_expected += d1 - e1;
    variance += (double)d * ((double)n1 / n) * ((double)n2 / n) * (n - d) / (n - 1);
  }
  LogRankResult res;
  if (variance <= 0.0) {
    res.chi_square = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.chi_square = observed_minus_expected * observed_minus_expected / variance;
  res.p_value = chi_square_p(res.chi_square);
  return res;
}

void write_km_csv(const KmCurve& curve, const std::string& group,
                  const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("write_km_csv: cannot write " + path);
  f << "time,survival,at_risk,group\n";
  for (size_t i = 0; i < curve.event_times.size(); ++i)
    f << format_double(curve.event_times[i]) << ',' << format_double(curve.survival[i])
      << ',' << curve.at_risk[i] << ',' << group << '\n';
}

}  // namespace foresee
