#pragma once

#include <vector>

#include "pathlab/policy.hpp"

namespace pathlab {

// Closed-form expected return of the stop-only model: the walk earns mu[t-1]
// for reaching position t and continues past each position with probability
// 1-p, so J(p) = sum_{t=1}^{l_max} mu[t-1] * (1-p)^(t-1).
double expected_return(const StopOnlyModel& model, double p);

// dJ/dp = -sum_{t=2}^{l_max} (t-1) * mu[t-1] * (1-p)^(t-2).  With all
// mu >= mu_min > 0 this is <= -mu_min for every p in (0,1), which is what
// drives the stop probability to zero under gradient ascent.
double return_derivative(const StopOnlyModel& model, double p);

// Expected path length sum_{t=1}^{l_max} (1-p)^(t-1).
double expected_length(double p, int l_max);

// Gradient flow on the stop logit: d theta/ds = dJ/dp * p * (1-p) with
// p = sigmoid(theta).  Integrated with classic RK4 at fixed step h.
struct FlowTrace {
  std::vector<double> s;      // time grid, s[0] = 0
  std::vector<double> theta;
  std::vector<double> p;
  double step = 0.0;
  bool reached_half = false;  // p dropped to 1/2 inside the horizon
  double s_half = 0.0;        // first grid time with p <= 1/2
};

FlowTrace integrate_flow(const StopOnlyModel& model, double horizon, double step = 1e-3);

// Checks p(s) <= 4 / (mu_min * (s - s_half)) strictly after the first
// crossing of 1/2.  Inconclusive when the trace never crosses.
struct BoundReport {
  enum class Status { Holds, Violated, Inconclusive };
  Status status = Status::Inconclusive;
  double max_violation = 0.0;  // max over checked points of p - bound
  double worst_s = 0.0;
};

BoundReport verify_bound(const FlowTrace& trace, double mu_min);

// Smallest mu entry (the constant the bound depends on).
double min_step_reward(const StopOnlyModel& model);

}  // namespace pathlab
