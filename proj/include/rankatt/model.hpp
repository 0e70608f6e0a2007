#pragma once

#include <cstdint>
#include <filesystem>

#include "rankatt/adam.hpp"
#include "rankatt/attention.hpp"

namespace rankatt {

struct ModelConfig {
  std::size_t feature_dim = 1024;
  std::size_t hidden_dim = 256;
  std::size_t filters = 3;        // K
  std::size_t default_segments = 400;

  bool operator==(const ModelConfig&) const = default;
};

struct BranchScores {
  double s_plus = 0.0;
  double s_minus = 0.0;
  double u = 0.0;
};

/// Three-branch scoring network. One instance scores both videos of a pair;
/// the ranking layers g, h, f are separate parameter sets from each other
/// and from the attention modules.
struct RankModel {
  ModelConfig cfg;
  AttentionModule att_high;   // alpha+
  AttentionModule att_low;    // alpha-
  AffineLayer rank_high;      // g, 1 x D
  AffineLayer rank_low;       // h, 1 x D
  AffineLayer rank_uniform;   // f, 1 x D

  static RankModel init(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<ParamView> ranking_params();
  std::vector<ParamView> attention_params();
  std::vector<ParamView> all_params();

  void zero_grad();
};

double uniform_score(const Matrix& segments, const RankModel& model);
BranchScores branch_scores(const Matrix& segments, const RankModel& model);

/// Test-time rank R = s+ + s-; the uniform branch is deliberately excluded.
double rank_score(const Matrix& segments, const RankModel& model);

// Checkpoint file: magic "RSKM", u32 version=1, u32 D, u32 H, u32 K,
// u32 default_T, then parameter blocks as little-endian f64 in this order:
// att_high filters 0..K-1 (layer1 W row-major, layer1 b, layer2 W, layer2 b),
// att_low likewise, then rank_high, rank_low, rank_uniform (W then b each).
void save_checkpoint(const RankModel& model, const std::filesystem::path& path);
RankModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rankatt
