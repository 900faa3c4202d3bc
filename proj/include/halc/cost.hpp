#pragma once

#include "halc/decoder.hpp"

namespace halc {

struct CostModel {
  double tokens = 100.0;      // L
  double t_lvlm = 1.0;        // seconds per model call
  double t_detector = 0.0;    // seconds per detector call
  int n = 4;                  // windows per triggered token
  double trigger_rate = 0.35; // fraction of tokens that are object-like

  void validate() const;
};

struct CostEstimate {
  double greedy_seconds = 0.0;
  double sequential_seconds = 0.0;
  double sequential_ratio = 0.0;
  /// All n window decodes of one token run as a single batched call.
  double parallel_seconds = 0.0;
  double parallel_ratio = 0.0;
};

CostEstimate cost_estimate(const CostModel& model);

/// Checks that every step was charged 1 + triggered * n model calls and that the
/// totals are the exact sums of the steps. Baseline traces have no triggered steps.
bool verify_cost_accounting(const DecodeTrace& trace, const CostModel& model);

}  // namespace halc
