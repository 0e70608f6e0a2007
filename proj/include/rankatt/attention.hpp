#pragma once

#include <vector>

#include "rankatt/affine.hpp"
#include "rankatt/matrix.hpp"

namespace rankatt {

/// One attention filter: FC(D -> H) + relu, FC(H -> 1), softmax over the T
/// segments of a video. Each filter's weights over a video sum to 1.
struct AttentionFilter {
  AffineLayer layer1;  // H x D
  AffineLayer layer2;  // 1 x H

  AttentionFilter() = default;
  AttentionFilter(std::size_t hidden, std::size_t input)
      : layer1(hidden, input), layer2(1, hidden) {}
};

enum class ModuleRole { high, low };

/// K filters sharing nothing; their softmax rows are summed into segment
/// weights with total mass K.
struct AttentionModule {
  std::vector<AttentionFilter> filters;
  ModuleRole role = ModuleRole::high;

  AttentionModule() = default;
  AttentionModule(std::size_t k, std::size_t hidden, std::size_t input,
                  ModuleRole r)
      : filters(k, AttentionFilter(hidden, input)), role(r) {}

  std::size_t filter_count() const { return filters.size(); }
  std::size_t input_dim() const {
    return filters.empty() ? 0 : filters.front().layer1.in_dim();
  }
  std::size_t hidden_dim() const {
    return filters.empty() ? 0 : filters.front().layer1.out_dim();
  }
};

/// Forward intermediates for one filter over one video, kept for backward.
struct FilterTrace {
  Matrix hidden;  // T x H, post-relu
  Vec alpha;      // T, softmax output
};

/// Softmax weights of one filter over a video's T segments.
Vec filter_forward(const Matrix& segments, const AttentionFilter& filter);
Vec filter_forward(const Matrix& segments, const AttentionFilter& filter,
                   FilterTrace& trace);

/// Accumulates parameter gradients of one filter given dL/dalpha.
void filter_backward(const Matrix& segments, AttentionFilter& filter,
                     const FilterTrace& trace, std::span<const double> dalpha);

struct ModuleAttention {
  Vec alpha;  // T, summed over filters; sums to K
  Matrix a;   // K x T, row-stochastic
};

/// Per-segment attention of a whole module: alpha_t = sum_k alpha_k(t).
ModuleAttention module_attention(const Matrix& segments,
                                 const AttentionModule& module);
ModuleAttention module_attention(const Matrix& segments,
                                 const AttentionModule& module,
                                 std::vector<FilterTrace>& traces);

/// Weighted sum of segment features; alpha carries total mass K, which is
/// deliberately not renormalized.
Vec attention_pool(const Matrix& segments, std::span<const double> alpha);

/// ||A A^T - I||_F^2 for one video's K x T attention matrix.
double diversity_loss(const Matrix& a);

/// dL/dA = 4 (A A^T - I) A.
Matrix diversity_loss_grad(const Matrix& a);

}  // namespace rankatt
