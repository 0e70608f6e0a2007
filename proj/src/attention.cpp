#include "rankatt/attention.hpp"

#include "rankatt/activations.hpp"
#include "rankatt/errors.hpp"

namespace rankatt {

Vec filter_forward(const Matrix& segments, const AttentionFilter& filter,
                   FilterTrace& trace) {
  if (segments.rows == 0) {
    throw ShapeError("filter_forward: video has no segments");
  }
  trace.hidden = filter.layer1.forward(segments);
  relu_inplace(trace.hidden);
  // Per-segment scalar logit, then softmax across the T segments. The
  // softmax is shift invariant, so the logit bias cancels exactly; folding it
  // in would only add per-segment rounding noise (and a parameter whose true
  // gradient is zero), so the evaluation leaves it out.
  Vec logits(segments.rows);
  const std::span<const double> w2 = filter.layer2.w.row(0);
  for (std::size_t t = 0; t < segments.rows; ++t) {
    logits[t] = dot(trace.hidden.row(t), w2);
  }
  trace.alpha = softmax_stable(logits);
  return trace.alpha;
}

Vec filter_forward(const Matrix& segments, const AttentionFilter& filter) {
  FilterTrace trace;
  return filter_forward(segments, filter, trace);
}

void filter_backward(const Matrix& segments, AttentionFilter& filter,
                     const FilterTrace& trace, std::span<const double> dalpha) {
  const std::size_t t_count = segments.rows;
  const std::size_t hidden = filter.layer1.out_dim();

  const Vec dlogit = softmax_backward(trace.alpha, dalpha);

  // layer2 (1 x H): dW2 += dlogit^T * hidden, dhidden = dlogit (x) w2,
  // masked by the relu. The logit bias cancels through the softmax (see
  // filter_forward), so db2 stays at its true value: zero.
  Matrix dhidden(t_count, hidden);
  const std::span<const double> w2 = filter.layer2.w.row(0);
  std::span<double> dw2 = filter.layer2.dw.row(0);
  for (std::size_t t = 0; t < t_count; ++t) {
    const double g = dlogit[t];
    axpy(g, trace.hidden.row(t), dw2);
    axpy(g, w2, dhidden.row(t));
  }
  relu_backward_inplace(trace.hidden, dhidden);

  // Segments are inputs; only parameter gradients are needed for layer1.
  filter.layer1.backward_params_only(segments, dhidden);
}

ModuleAttention module_attention(const Matrix& segments,
                                 const AttentionModule& module,
                                 std::vector<FilterTrace>& traces) {
  const std::size_t k = module.filter_count();
  if (k == 0) {
    throw ShapeError("module_attention: module has no filters");
  }
  traces.resize(k);
  ModuleAttention out;
  out.alpha.assign(segments.rows, 0.0);
  out.a = Matrix(k, segments.rows);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec& row = filter_forward(segments, module.filters[i], traces[i]);
    std::copy(row.begin(), row.end(), out.a.row(i).begin());
    axpy(1.0, row, out.alpha);
  }
  return out;
}

ModuleAttention module_attention(const Matrix& segments,
                                 const AttentionModule& module) {
  std::vector<FilterTrace> traces;
  return module_attention(segments, module, traces);
}

Vec attention_pool(const Matrix& segments, std::span<const double> alpha) {
  if (alpha.size() != segments.rows) {
    throw ShapeError("attention_pool: weight count != segment count");
  }
  Vec pooled(segments.cols, 0.0);
  for (std::size_t t = 0; t < segments.rows; ++t) {
    axpy(alpha[t], segments.row(t), pooled);
  }
  return pooled;
}

double diversity_loss(const Matrix& a) {
  const std::size_t k = a.rows;
  double loss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double gram = dot(a.row(i), a.row(j));
      const double diff = gram - (i == j ? 1.0 : 0.0);
      loss += diff * diff;
    }
  }
  return loss;
}

Matrix diversity_loss_grad(const Matrix& a) {
  const std::size_t k = a.rows;
  Matrix m(k, k);  // A A^T - I
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      m.at(i, j) = dot(a.row(i), a.row(j)) - (i == j ? 1.0 : 0.0);
    }
  }
  Matrix grad(k, a.cols, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double c = 4.0 * m.at(i, j);
      if (c != 0.0) axpy(c, a.row(j), grad.row(i));
    }
  }
  return grad;
}

}  // namespace rankatt
