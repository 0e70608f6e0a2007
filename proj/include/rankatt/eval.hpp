#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rankatt/data.hpp"
#include "rankatt/train.hpp"

namespace rankatt {

enum class ScorerKind { fused, high, low, uniform };
const char* scorer_name(ScorerKind s);

struct EvalReport {
  double pairwise_accuracy = 0.0;  // of the requested scorer
  std::size_t n_pairs = 0;
  std::size_t n_correct = 0;   // requested scorer; integer form for exactness
  std::size_t tie_count = 0;   // requested scorer
  // Accuracy of every branch, always computed (one forward per video).
  double high = 0.0;
  double low = 0.0;
  double uniform = 0.0;
  double fused = 0.0;
};

/// Fraction of pairs whose scores strictly agree with the annotation.
/// Ties never count as correct and are tallied. Features are used as-is
/// (no noise). Throws on an unknown id or an empty pair set.
EvalReport pairwise_accuracy(const RankModel& model, const Dataset& data,
                             const std::vector<PairAnnotation>& pairs,
                             ScorerKind scorer = ScorerKind::fused);

/// Same metric for an arbitrary id -> score function (oracle scorers,
/// baselines). Only the headline fields are filled.
EvalReport pairwise_accuracy(
    const std::function<double(const std::string&)>& score,
    const std::vector<PairAnnotation>& pairs);

/// Pearson correlation; either side having zero variance gives 0.
double pearson(std::span<const double> a, std::span<const double> b);

struct CorrelationReport {
  Matrix cross;          // K x K; [k][k'] = mean over videos of
                         // pearson(alpha+_k, alpha-_k')
  double mean = 0.0;     // over all entries
  double max = 0.0;      // largest entry
};

/// Per-video Pearson between each high filter's and each low filter's
/// attention vector, averaged over videos (correlate-then-average).
CorrelationReport filter_correlation(const RankModel& model,
                                     const Dataset& data);

/// Mean Pearson over unordered filter pairs within one module, averaged
/// over videos. 0 when the module has a single filter.
double within_module_correlation(const RankModel& model, const Dataset& data,
                                 ModuleRole role);

/// CSV with one row per segment: index, summed module weights, and each
/// filter's weight for both modules. Deterministic byte-for-byte.
void export_attention(const RankModel& model, const Matrix& segments,
                      const std::filesystem::path& path);

struct AblationRow {
  std::string name;
  std::vector<double> accuracies;  // test accuracy, one entry per seed
  double mean = 0.0;
  double stddev = 0.0;
};

/// Loss ablations (cumulative: rank-only, +diversity, +disparity,
/// +rank-aware) and a filter-count sweep K in {1,2,3,4}, each trained per
/// seed on a fresh split and scored on the held-out pairs. The full
/// configuration is trained exactly once per seed and shared between the
/// "+rank-aware" row and its K row.
std::vector<AblationRow> ablation_suite(
    const Dataset& data, const std::vector<PairAnnotation>& pairs,
    const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
    double test_fraction = 0.2);

void write_ablation_table(const std::vector<AblationRow>& rows,
                          const std::filesystem::path& path);

}  // namespace rankatt
