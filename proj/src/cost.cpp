#include "halc/cost.hpp"

#include "halc/error.hpp"

namespace halc {

void CostModel::validate() const {
  if (tokens < 0.0 || t_lvlm < 0.0 || t_detector < 0.0 || n < 0) {
    throw InvalidParameter("cost model quantities must be non-negative");
  }
  if (!(trigger_rate >= 0.0 && trigger_rate <= 1.0)) throw InvalidParameter("trigger_rate must lie in [0, 1]");
  if (!(t_lvlm > 0.0)) throw InvalidParameter("t_lvlm must be positive");
}

CostEstimate cost_estimate(const CostModel& m) {
  m.validate();
  CostEstimate e;
  e.greedy_seconds = m.tokens * m.t_lvlm;
  e.sequential_seconds = m.tokens * ((1.0 + m.trigger_rate * m.n) * m.t_lvlm + m.trigger_rate * m.t_detector);
  e.parallel_seconds = m.tokens * (m.t_lvlm + m.trigger_rate * (m.t_detector + m.t_lvlm));
  e.sequential_ratio = e.sequential_seconds / e.greedy_seconds;
  e.parallel_ratio = e.parallel_seconds / e.greedy_seconds;
  return e;
}

bool verify_cost_accounting(const DecodeTrace& trace, const CostModel& model) {
  long calls = 0;
  long triggered = 0;
  for (const auto& rec : trace.steps) {
    const int expected = 1 + (rec.triggered ? model.n : 0);
    if (rec.model_calls != expected) return false;
    calls += rec.model_calls;
    triggered += rec.triggered ? 1 : 0;
  }
  if (triggered > 0 && trace.n != model.n) return false;
  return calls == trace.totals.model_calls && triggered == trace.totals.triggered &&
         trace.totals.detector_calls <= trace.totals.triggered;
}

}  // namespace halc
