#pragma once

#include "rankatt/losses.hpp"
#include "rankatt/model.hpp"

namespace rankatt {

/// Weights on the terms of the overall pair objective. 0/1 values implement
/// phase schedules and ablations; disabling a term and weighting it by zero
/// are the same thing by construction.
struct TermWeights {
  double rank_plus = 1.0;
  double rank_minus = 1.0;
  double rank_uniform = 1.0;
  double disparity = 1.0;
  double rank_aware = 1.0;
  double diversity = 1.0;

  static TermWeights all() { return {}; }
  static TermWeights ranking_phase() {
    return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0};
  }
};

/// Forward intermediates of one video, kept alive for the backward pass.
struct VideoTrace {
  Matrix segments;  // the features actually scored (owned copy)
  std::vector<FilterTrace> high_filters;
  std::vector<FilterTrace> low_filters;
  ModuleAttention high;
  ModuleAttention low;
  Vec pooled_high;
  Vec pooled_low;
  Vec mean;
  BranchScores scores;
  double u_unbiased = 0.0;  // uniform score without its bias (see pair_forward)
};

struct PairTrace {
  VideoTrace better;
  VideoTrace worse;
  PairLossBreakdown raw;  // all terms, before any weighting
};

/// Scores both videos of an ordered pair and fills the trace. Returns the
/// unweighted loss breakdown.
PairLossBreakdown pair_forward(const RankModel& model, Matrix better_segments,
                               Matrix worse_segments, const LossConfig& cfg,
                               PairTrace& trace);

/// Weighted objective value for a forward trace:
///   sum of rank terms + w_disp*(disp+ + disp-) + w_ra*rAware
///   + w_div*lambda*(div+ + div-), each term scaled by its weight.
double weighted_total(const PairLossBreakdown& raw, const LossConfig& cfg,
                      const TermWeights& w);

/// Breakdown with disabled terms zeroed and total recomputed, as logged.
PairLossBreakdown apply_weights(const PairLossBreakdown& raw,
                                const LossConfig& cfg, const TermWeights& w);

/// Accumulates d(scale * weighted objective) into the model's gradient
/// buffers. `into_ranking` / `into_attention` select which parameter sets
/// receive gradients; frozen sets are left untouched bit-for-bit.
void pair_backward(RankModel& model, const PairTrace& trace,
                   const LossConfig& cfg, const TermWeights& w,
                   bool into_ranking, bool into_attention, double scale = 1.0);

}  // namespace rankatt
