#pragma once

#include "rankatt/matrix.hpp"
#include "rankatt/model.hpp"

namespace rankatt {

struct LossConfig {
  double margin = 1.0;             // m, per-branch ranking margin
  double margin_disparity = 0.1;   // m2
  double margin_rank_aware = 0.3;  // m3, must exceed m2
  double lambda_diversity = 0.1;

  void validate() const;
};

/// All loss terms of one ordered pair (better video first). `total` is the
/// weighted combination; diversity terms sum both videos' matrices.
struct PairLossBreakdown {
  double rank_plus = 0.0;
  double rank_minus = 0.0;
  double rank_uniform = 0.0;
  double disp_plus = 0.0;
  double disp_minus = 0.0;
  double rank_aware = 0.0;
  double div_plus = 0.0;
  double div_minus = 0.0;
  double total = 0.0;

  PairLossBreakdown& operator+=(const PairLossBreakdown& other);
  PairLossBreakdown& operator*=(double c);
};

double margin_rank_loss(double s_i, double s_j, double m);
double disparity_loss(double s_i, double s_j, double u_i, double u_j, double m2);

/// Cross-branch hinge: high-skill score of the better video against
/// low-skill score of the worse one, relative to the uniform gap.
double rank_aware_loss(double s_plus_i, double s_minus_j, double u_i,
                       double u_j, double m3);

/// Hinge subgradient: 1 if the hinge is strictly active, else 0 (including
/// at the boundary).
double hinge_active(double loss_value);

PairLossBreakdown pair_total_loss(const BranchScores& scores_i,
                                  const BranchScores& scores_j,
                                  const Matrix& a_i_high, const Matrix& a_i_low,
                                  const Matrix& a_j_high, const Matrix& a_j_low,
                                  const LossConfig& cfg);

}  // namespace rankatt
