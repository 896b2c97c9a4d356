#pragma once

namespace zkstar {

/// Upper quantile of the chi-squared distribution: the q with P(X > q) = alpha
/// for X ~ chi2(dof). This is the UCL used by the window-level alarm test.
double chi_squared_ucl(int dof, double alpha);

/// Upper tail probability P(X > x) for X ~ chi2(dof).
double chi_squared_tail(int dof, double x);

/// Alarm decisions agree for two test statistics against one control limit.
/// Two measurement realizations are treated as similar when their statistics
/// fall on the same side of the limit.
inline bool same_alarm_decision(double t_a, double t_b, double ucl) {
  return (t_a > ucl) == (t_b > ucl);
}

}  // namespace zkstar
