#pragma once

#include "rankatt/data.hpp"
#include "rankatt/model.hpp"

namespace rankatt {

/// Planted-signal benchmark: videos are sequences of prototype features
/// where "pro" segments occur more often in high-skill videos and "con"
/// segments in low-skill ones. Background dominates, so mean pooling is a
/// weak readout and attention has something real to find.
struct SynthSpec {
  std::size_t n_videos = 60;
  std::size_t segments = 40;      // T
  std::size_t feature_dim = 32;   // D
  std::size_t n_pro_prototypes = 3;
  std::size_t n_con_prototypes = 3;
  std::size_t n_bg_prototypes = 40;
  double pro_rate = 4.0;          // expected pro segments per video
  double con_rate = 4.0;
  double noise_std = 0.25;
  double reversal_rate = 0.15;    // cross-contamination of planted labels
  double min_score_gap = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class SegmentLabel : std::uint8_t { background = 0, pro = 1, con = 2 };

struct SynthDataset {
  Dataset data;
  std::vector<double> truth_scores;                 // parallel to data.videos
  std::vector<std::vector<SegmentLabel>> planted;   // per video, length T
  std::vector<PairAnnotation> pairs;                // all gap-qualifying pairs
  std::vector<Matrix> prototypes;                   // pro, then con, then bg

  double truth_of(const std::string& id) const;
};

SynthDataset generate(const SynthSpec& spec);

/// Average fraction of a module's attention mass (alpha / K) landing on
/// segments of each planted label, over all videos.
struct AlignmentReport {
  double pro_mass_high = 0.0;
  double con_mass_high = 0.0;
  double bg_mass_high = 0.0;
  double pro_mass_low = 0.0;
  double con_mass_low = 0.0;
  double bg_mass_low = 0.0;
};

AlignmentReport attention_alignment(const RankModel& model,
                                    const SynthDataset& dataset);

/// Mean over videos of the per-video fraction of segments with this label;
/// uniform attention reproduces exactly this mass.
double label_base_rate(const SynthDataset& dataset, SegmentLabel label);

// Truth sidecar: plain text, one line per video: "id,score,labels" where
// labels is a length-T string over {b,p,c}.
void save_truth(const SynthDataset& dataset, const std::filesystem::path& path);

/// Writes features/, manifest.txt, pairs.csv and truth.txt under out_dir.
void write_synth_dataset(const SynthDataset& dataset,
                         const std::filesystem::path& out_dir);

}  // namespace rankatt
