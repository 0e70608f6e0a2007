#include "rankatt/pair_step.hpp"

#include "rankatt/errors.hpp"

namespace rankatt {

namespace {

void video_forward(const RankModel& model, Matrix segments, VideoTrace& out) {
  out.segments = std::move(segments);
  out.high = module_attention(out.segments, model.att_high, out.high_filters);
  out.low = module_attention(out.segments, model.att_low, out.low_filters);
  out.pooled_high = attention_pool(out.segments, out.high.alpha);
  out.pooled_low = attention_pool(out.segments, out.low.alpha);

  out.mean.assign(out.segments.cols, 0.0);
  const double inv = 1.0 / static_cast<double>(out.segments.rows);
  for (std::size_t t = 0; t < out.segments.rows; ++t) {
    axpy(inv, out.segments.row(t), out.mean);
  }

  out.scores.s_plus = model.rank_high.forward(out.pooled_high)[0];
  out.scores.s_minus = model.rank_low.forward(out.pooled_low)[0];
  out.scores.u = model.rank_uniform.forward(out.mean)[0];
  out.u_unbiased = dot(model.rank_uniform.w.row(0), out.mean);
}

bool all_zero(std::span<const double> x) {
  for (double v : x) {
    if (v != 0.0) return false;
  }
  return true;
}

// Backward through one attention module of one video. dpooled is the
// gradient at the pooled feature; ddiv (may be null) is the gradient at the
// module's K x T attention matrix from the diversity term.
void module_backward(const Matrix& segments, AttentionModule& module,
                     const std::vector<FilterTrace>& traces,
                     std::span<const double> dpooled, const Matrix* ddiv) {
  const std::size_t t_count = segments.rows;

  // pooled = sum_t alpha_t p_t with alpha_t = sum_k alpha_kt, so every
  // filter row shares the same pooling gradient.
  Vec dalpha_pool(t_count, 0.0);
  if (!all_zero(dpooled)) {
    for (std::size_t t = 0; t < t_count; ++t) {
      dalpha_pool[t] = dot(dpooled, segments.row(t));
    }
  }

  Vec dalpha(t_count);
  for (std::size_t k = 0; k < module.filter_count(); ++k) {
    std::copy(dalpha_pool.begin(), dalpha_pool.end(), dalpha.begin());
    if (ddiv != nullptr) {
      axpy(1.0, ddiv->row(k), dalpha);
    }
    if (all_zero(dalpha)) continue;
    filter_backward(segments, module.filters[k], traces[k], dalpha);
  }
}

struct ScoreGrads {
  double ds_plus = 0.0;
  double ds_minus = 0.0;
  double du = 0.0;
};

void video_backward(RankModel& model, const VideoTrace& vt,
                    const ScoreGrads& g, const Matrix* ddiv_high,
                    const Matrix* ddiv_low, bool into_ranking,
                    bool into_attention) {
  const std::size_t d = vt.segments.cols;

  // Gradient at the pooled features always flows through the (possibly
  // frozen) ranking layers' weights.
  Vec dpooled_high(d, 0.0);
  Vec dpooled_low(d, 0.0);
  if (g.ds_plus != 0.0) axpy(g.ds_plus, model.rank_high.w.row(0), dpooled_high);
  if (g.ds_minus != 0.0) axpy(g.ds_minus, model.rank_low.w.row(0), dpooled_low);

  if (into_ranking) {
    if (g.ds_plus != 0.0) {
      model.rank_high.db[0] += g.ds_plus;
      axpy(g.ds_plus, vt.pooled_high, model.rank_high.dw.row(0));
    }
    if (g.ds_minus != 0.0) {
      model.rank_low.db[0] += g.ds_minus;
      axpy(g.ds_minus, vt.pooled_low, model.rank_low.dw.row(0));
    }
    if (g.du != 0.0) {
      model.rank_uniform.db[0] += g.du;
      axpy(g.du, vt.mean, model.rank_uniform.dw.row(0));
    }
  }

  if (into_attention) {
    module_backward(vt.segments, model.att_high, vt.high_filters, dpooled_high,
                    ddiv_high);
    module_backward(vt.segments, model.att_low, vt.low_filters, dpooled_low,
                    ddiv_low);
  }
}

}  // namespace

PairLossBreakdown pair_forward(const RankModel& model, Matrix better_segments,
                               Matrix worse_segments, const LossConfig& cfg,
                               PairTrace& trace) {
  if (better_segments.cols != model.cfg.feature_dim ||
      worse_segments.cols != model.cfg.feature_dim) {
    throw ShapeError("pair_forward: feature dim mismatch");
  }
  video_forward(model, std::move(better_segments), trace.better);
  video_forward(model, std::move(worse_segments), trace.worse);
  // Every loss term sees the uniform scores only through u_i - u_j, so the
  // uniform layer's bias cancels; evaluating with the unbiased values keeps
  // the objective exactly constant along that parameter (its true gradient).
  BranchScores li = trace.better.scores;
  BranchScores lj = trace.worse.scores;
  li.u = trace.better.u_unbiased;
  lj.u = trace.worse.u_unbiased;
  trace.raw = pair_total_loss(li, lj, trace.better.high.a, trace.better.low.a,
                              trace.worse.high.a, trace.worse.low.a, cfg);
  return trace.raw;
}

double weighted_total(const PairLossBreakdown& raw, const LossConfig& cfg,
                      const TermWeights& w) {
  return w.rank_plus * raw.rank_plus + w.rank_minus * raw.rank_minus +
         w.rank_uniform * raw.rank_uniform +
         w.disparity * (raw.disp_plus + raw.disp_minus) +
         w.rank_aware * raw.rank_aware +
         w.diversity * cfg.lambda_diversity * (raw.div_plus + raw.div_minus);
}

PairLossBreakdown apply_weights(const PairLossBreakdown& raw,
                                const LossConfig& cfg, const TermWeights& w) {
  PairLossBreakdown b;
  b.rank_plus = w.rank_plus * raw.rank_plus;
  b.rank_minus = w.rank_minus * raw.rank_minus;
  b.rank_uniform = w.rank_uniform * raw.rank_uniform;
  b.disp_plus = w.disparity * raw.disp_plus;
  b.disp_minus = w.disparity * raw.disp_minus;
  b.rank_aware = w.rank_aware * raw.rank_aware;
  b.div_plus = w.diversity * raw.div_plus;
  b.div_minus = w.diversity * raw.div_minus;
  b.total = weighted_total(raw, cfg, w);
  return b;
}

void pair_backward(RankModel& model, const PairTrace& trace,
                   const LossConfig& cfg, const TermWeights& w,
                   bool into_ranking, bool into_attention, double scale) {
  const PairLossBreakdown& raw = trace.raw;

  // Hinge subgradients: active only when the hinge is strictly positive.
  const double a_rp = w.rank_plus * hinge_active(raw.rank_plus);
  const double a_rm = w.rank_minus * hinge_active(raw.rank_minus);
  const double a_ru = w.rank_uniform * hinge_active(raw.rank_uniform);
  const double a_dp = w.disparity * hinge_active(raw.disp_plus);
  const double a_dm = w.disparity * hinge_active(raw.disp_minus);
  const double a_ra = w.rank_aware * hinge_active(raw.rank_aware);

  ScoreGrads gi;  // better video
  gi.ds_plus = scale * (-a_rp - a_dp - a_ra);
  gi.ds_minus = scale * (-a_rm - a_dm);
  gi.du = scale * (-a_ru + a_dp + a_dm + a_ra);

  ScoreGrads gj;  // worse video
  gj.ds_plus = scale * (a_rp + a_dp);
  gj.ds_minus = scale * (a_rm + a_dm + a_ra);
  gj.du = scale * (a_ru - a_dp - a_dm - a_ra);

  const double div_coeff = scale * w.diversity * cfg.lambda_diversity;
  Matrix ddiv_i_high, ddiv_i_low, ddiv_j_high, ddiv_j_low;
  const Matrix* pi_high = nullptr;
  const Matrix* pi_low = nullptr;
  const Matrix* pj_high = nullptr;
  const Matrix* pj_low = nullptr;
  if (into_attention && div_coeff != 0.0) {
    auto scaled_grad = [div_coeff](const Matrix& a) {
      Matrix g = diversity_loss_grad(a);
      for (double& v : g.data) v *= div_coeff;
      return g;
    };
    ddiv_i_high = scaled_grad(trace.better.high.a);
    ddiv_i_low = scaled_grad(trace.better.low.a);
    ddiv_j_high = scaled_grad(trace.worse.high.a);
    ddiv_j_low = scaled_grad(trace.worse.low.a);
    pi_high = &ddiv_i_high;
    pi_low = &ddiv_i_low;
    pj_high = &ddiv_j_high;
    pj_low = &ddiv_j_low;
  }

  video_backward(model, trace.better, gi, pi_high, pi_low, into_ranking,
                 into_attention);
  video_backward(model, trace.worse, gj, pj_high, pj_low, into_ranking,
                 into_attention);
}

}  // namespace rankatt
