#include "rankatt/losses.hpp"

#include "rankatt/attention.hpp"
#include "rankatt/errors.hpp"

namespace rankatt {

void LossConfig::validate() const {
  if (margin < 0.0 || margin_disparity < 0.0 || margin_rank_aware < 0.0) {
    throw NumericError("loss config: margins must be non-negative");
  }
  if (margin_rank_aware <= margin_disparity) {
    throw NumericError("loss config: rank-aware margin must exceed the disparity margin");
  }
  if (lambda_diversity < 0.0) {
    throw NumericError("loss config: diversity weight must be non-negative");
  }
}

PairLossBreakdown& PairLossBreakdown::operator+=(const PairLossBreakdown& o) {
  rank_plus += o.rank_plus;
  rank_minus += o.rank_minus;
  rank_uniform += o.rank_uniform;
  disp_plus += o.disp_plus;
  disp_minus += o.disp_minus;
  rank_aware += o.rank_aware;
  div_plus += o.div_plus;
  div_minus += o.div_minus;
  total += o.total;
  return *this;
}

PairLossBreakdown& PairLossBreakdown::operator*=(double c) {
  rank_plus *= c;
  rank_minus *= c;
  rank_uniform *= c;
  disp_plus *= c;
  disp_minus *= c;
  rank_aware *= c;
  div_plus *= c;
  div_minus *= c;
  total *= c;
  return *this;
}

double margin_rank_loss(double s_i, double s_j, double m) {
  return std::max(0.0, m - s_i + s_j);
}

double disparity_loss(double s_i, double s_j, double u_i, double u_j, double m2) {
  return std::max(0.0, m2 - (s_i - s_j) + (u_i - u_j));
}

double rank_aware_loss(double s_plus_i, double s_minus_j, double u_i,
                       double u_j, double m3) {
  return std::max(0.0, m3 - (s_plus_i - s_minus_j) + (u_i - u_j));
}

double hinge_active(double loss_value) {
  return loss_value > 0.0 ? 1.0 : 0.0;
}

PairLossBreakdown pair_total_loss(const BranchScores& si,
                                  const BranchScores& sj,
                                  const Matrix& a_i_high, const Matrix& a_i_low,
                                  const Matrix& a_j_high, const Matrix& a_j_low,
                                  const LossConfig& cfg) {
  PairLossBreakdown b;
  b.rank_plus = margin_rank_loss(si.s_plus, sj.s_plus, cfg.margin);
  b.rank_minus = margin_rank_loss(si.s_minus, sj.s_minus, cfg.margin);
  b.rank_uniform = margin_rank_loss(si.u, sj.u, cfg.margin);
  b.disp_plus = disparity_loss(si.s_plus, sj.s_plus, si.u, sj.u,
                               cfg.margin_disparity);
  b.disp_minus = disparity_loss(si.s_minus, sj.s_minus, si.u, sj.u,
                                cfg.margin_disparity);
  b.rank_aware = rank_aware_loss(si.s_plus, sj.s_minus, si.u, sj.u,
                                 cfg.margin_rank_aware);
  b.div_plus = diversity_loss(a_i_high) + diversity_loss(a_j_high);
  b.div_minus = diversity_loss(a_i_low) + diversity_loss(a_j_low);
  b.total = b.rank_plus + b.rank_minus + b.rank_uniform +
            cfg.lambda_diversity * (b.div_plus + b.div_minus) +
            b.disp_plus + b.disp_minus + b.rank_aware;
  return b;
}

}  // namespace rankatt
