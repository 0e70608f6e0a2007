#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rankatt/adam.hpp"
#include "rankatt/data.hpp"
#include "rankatt/pair_step.hpp"

namespace rankatt {

/// Loss terms that can be switched off for ablations. The rank losses are
/// always on; they are what makes the model a ranker at all.
struct AblationFlags {
  bool disparity = true;
  bool rank_aware = true;
  bool diversity = true;
};

struct TrainConfig {
  LossConfig loss;
  double lr = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 2000;
  std::size_t filters = 3;       // K
  std::size_t hidden_dim = 256;  // H
  double noise_sigma = 0.01;
  std::uint64_t seed = 1;
  // Epochs per phase before switching; 0 alternates per batch instead.
  std::size_t alternation_period = 1;
  AblationFlags ablation;
  std::size_t checkpoint_interval = 0;  // in epochs; 0 = final only

  void validate() const;
};

enum class Phase { ranking, attention };
const char* phase_name(Phase p);

/// Objective weights for one optimization phase. The ranking phase trains
/// f, g, h on the three rank hinges. The attention phase trains the two
/// attention modules on lambda*div + disp + rank-aware, minus whatever the
/// ablation flags remove; with every term ablated the phase has an empty
/// objective and performs no update, so a "rank-only" model keeps its
/// randomly initialized attention.
TermWeights phase_weights(Phase phase, const AblationFlags& a);

/// Mask used for the logged breakdown: ablated terms read as zero.
TermWeights ablation_weights(const AblationFlags& a);

struct PairBatchItem {
  const Matrix* better = nullptr;
  const Matrix* worse = nullptr;
};

/// One Adam step of `phase` on a batch (gradient = batch mean). Parameters
/// of the other phase are left bit-identical. Returns the mean of the raw
/// (unweighted) loss breakdowns. Throws NumericError on non-finite loss.
PairLossBreakdown phase_step(RankModel& model, AdamState& opt, Phase phase,
                             const std::vector<PairBatchItem>& batch,
                             const LossConfig& loss, const AblationFlags& abl);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  Phase phase = Phase::ranking;
  PairLossBreakdown loss;       // mean over the epoch's pairs, ablation-masked
  double train_accuracy = 0.0;  // fused scorer on the training pairs, no noise
  std::string checkpoint;       // path written after this epoch, if any
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  RankModel model;
  TrainHistory history;
};

/// Called after every optimizer step; lets tests watch invariants mid-run.
using StepHook = std::function<void(std::size_t epoch, Phase phase,
                                    std::size_t batch, const RankModel&)>;

/// Alternating two-phase training. Deterministic for a fixed seed: same
/// model init, same per-epoch shuffles, same noise draws, byte-identical
/// checkpoints. When out_dir is non-empty, writes train_log.jsonl (one
/// record per epoch), interval checkpoints checkpoint-NNNNNN.rskm, and the
/// final model as model.rskm.
TrainResult train(const Dataset& data, const std::vector<PairAnnotation>& pairs,
                  const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {},
                  const StepHook& hook = {});

void write_history(const TrainHistory& history,
                   const std::filesystem::path& path);

// Flat key=value config file mirroring TrainConfig fields (unknown keys
// rejected; '#' comments allowed).
TrainConfig load_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& cfg);
void save_train_config(const TrainConfig& cfg,
                       const std::filesystem::path& path);

}  // namespace rankatt
