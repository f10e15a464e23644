#include "pathlab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pathlab {

namespace {
void check_model(const StopOnlyModel& model) {
  if (model.l_max < 1) throw std::invalid_argument("StopOnlyModel: l_max must be >= 1");
  if (static_cast<int>(model.mu.size()) != model.l_max)
    throw std::invalid_argument("StopOnlyModel: mu must have l_max entries");
}
void check_p(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("stop probability must lie strictly inside (0,1)");
}
}  // namespace

double expected_return(const StopOnlyModel& model, double p) {
  check_model(model);
  check_p(p);
  double j = 0.0;
  double q = 1.0;  // (1-p)^(t-1)
  for (int t = 1; t <= model.l_max; ++t) {
    j += model.mu[t - 1] * q;
    q *= 1.0 - p;
  }
  return j;
}

double return_derivative(const StopOnlyModel& model, double p) {
  check_model(model);
  check_p(p);
  double d = 0.0;
  double q = 1.0;  // (1-p)^(t-2)
  for (int t = 2; t <= model.l_max; ++t) {
    d -= (t - 1) * model.mu[t - 1] * q;
    q *= 1.0 - p;
  }
  return d;
}

double expected_length(double p, int l_max) {
  check_p(p);
  if (l_max < 1) throw std::invalid_argument("expected_length: l_max must be >= 1");
  double e = 0.0;
  double q = 1.0;
  for (int t = 1; t <= l_max; ++t) {
    e += q;
    q *= 1.0 - p;
  }
  return e;
}

FlowTrace integrate_flow(const StopOnlyModel& model, double horizon, double step) {
  check_model(model);
  if (!(horizon > 0.0) || !(step > 0.0) || step > horizon)
    throw std::invalid_argument("integrate_flow: need 0 < step <= horizon");

  auto sigmoid = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  auto f = [&](double theta) {
    const double p = sigmoid(theta);
    return return_derivative(model, p) * p * (1.0 - p);
  };

  const int n_steps = static_cast<int>(std::lround(horizon / step));
  FlowTrace tr;
  tr.step = step;
  tr.s.reserve(n_steps + 1);
  tr.theta.reserve(n_steps + 1);
  tr.p.reserve(n_steps + 1);

  double theta = model.theta;
  for (int i = 0; i <= n_steps; ++i) {
    const double p = sigmoid(theta);
    if (!std::isfinite(theta) || !std::isfinite(p))
      throw std::runtime_error("integrate_flow: state became non-finite");
    const double s = i * step;
    tr.s.push_back(s);
    tr.theta.push_back(theta);
    tr.p.push_back(p);
    if (!tr.reached_half && p <= 0.5) {
      tr.reached_half = true;
      tr.s_half = s;
    }
    if (i == n_steps) break;
    const double k1 = f(theta);
    const double k2 = f(theta + 0.5 * step * k1);
    const double k3 = f(theta + 0.5 * step * k2);
    const double k4 = f(theta + step * k3);
    theta += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return tr;
}

BoundReport verify_bound(const FlowTrace& trace, double mu_min) {
  if (!(mu_min > 0.0)) throw std::invalid_argument("verify_bound: mu_min must be positive");
  BoundReport rep;
  if (!trace.reached_half) return rep;  // never crossed 1/2: nothing to check
  bool any = false;
  for (std::size_t i = 0; i < trace.s.size(); ++i) {
    const double ds = trace.s[i] - trace.s_half;
    if (ds <= trace.step) continue;  // skip the crossing neighborhood
    const double bound = 4.0 / (mu_min * ds);
    const double violation = trace.p[i] - bound;
    if (!any || violation > rep.max_violation) {
      rep.max_violation = violation;
      rep.worst_s = trace.s[i];
    }
    any = true;
  }
  if (!any) return rep;  // horizon ended at the crossing: inconclusive
  rep.status = rep.max_violation <= 0.0 ? BoundReport::Status::Holds
                                        : BoundReport::Status::Violated;
  return rep;
}

double min_step_reward(const StopOnlyModel& model) {
  check_model(model);
  return *std::min_element(model.mu.begin(), model.mu.end());
}

}  // namespace pathlab
