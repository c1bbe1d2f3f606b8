#pragma once

#include <string>
#include <utility>
#include <vector>

#include "foresee/matrix.hpp"

namespace foresee {

// Harrell's concordance index. Comparable pairs: times differ and the earlier
// time is an observed event. Risk ties score 0.5. Throws ValidationError when
// no pair is comparable.
double c_index(const std::vector<double>& risk, const std::vector<double>& times,
               const std::vector<int>& events);

struct KmCurve {
  std::vector<double> event_times;  // ascending distinct event times
  std::vector<double> survival;     // S(t) after each event time
  std::vector<int> at_risk;         // risk-set size just before each event time
};

KmCurve km_curve(const std::vector<double>& times, const std::vector<int>& events);

// Survival probability at time t (step function; S(0) = 1).
double km_survival_at(const KmCurve& curve, double t);

// Threshold at the median; risk > median goes high, ties go low.
struct RiskSplit {
  std::vector<int> low, high;
  bool degenerate = false;  // empty high group (all risks at or below median)
};
RiskSplit median_risk_split(const std::vector<double>& risk);

struct LogRankResult {
  double chi_square = 0.0;
  double p_value = 1.0;
};

LogRankResult log_rank_p(const std::vector<double>& times_a,
                         const std::vector<int>& events_a,
                         const std::vector<double>& times_b,
                         const std::vector<int>& events_b);

// Regularized upper incomplete gamma Q(a, x), series + continued fraction.
double gamma_q(double a, double x);
// Chi-square survival function with 1 dof.
double chi_square_p(double stat);

// CSV export: columns time,survival,at_risk,group
void write_km_csv(const KmCurve& curve, const std::string& group,
                  const std::string& path);

}  // namespace foresee
