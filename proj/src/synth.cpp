#include "rankatt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rankatt/errors.hpp"

namespace rankatt {

void SynthSpec::validate() const {
  if (n_videos < 2 || segments < 1 || feature_dim < 1) {
    throw DataError(DataError::Kind::degenerate,
                    "synth spec: need at least 2 videos and positive T, D");
  }
  if (n_pro_prototypes < 1 || n_con_prototypes < 1 || n_bg_prototypes < 1) {
    throw DataError(DataError::Kind::degenerate,
                    "synth spec: prototype counts must be at least 1");
  }
  if (pro_rate < 0.0 || con_rate < 0.0 || noise_std < 0.0) {
    throw DataError(DataError::Kind::degenerate,
                    "synth spec: rates and noise must be non-negative");
  }
  if (reversal_rate < 0.0 || reversal_rate > 1.0) {
    throw DataError(DataError::Kind::degenerate,
                    "synth spec: reversal_rate must lie in [0, 1]");
  }
}

double SynthDataset::truth_of(const std::string& id) const {
  return truth_scores[data.index.at(id)];
}

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthDataset out;

  // Prototypes with unit-scale entries; signal and background share the
  // same distribution so nothing is linearly separable for free.
  const std::size_t n_protos =
      spec.n_pro_prototypes + spec.n_con_prototypes + spec.n_bg_prototypes;
  const double proto_scale = 1.0 / std::sqrt(static_cast<double>(spec.feature_dim));
  out.prototypes.reserve(n_protos);
  for (std::size_t p = 0; p < n_protos; ++p) {
    Matrix proto(1, spec.feature_dim);
    for (double& v : proto.data) v = proto_scale * rng.normal();
    out.prototypes.push_back(std::move(proto));
  }
  auto prototype = [&](SegmentLabel label, std::size_t which) -> const Matrix& {
    switch (label) {
      case SegmentLabel::pro:
        return out.prototypes[which];
      case SegmentLabel::con:
        return out.prototypes[spec.n_pro_prototypes + which];
      default:
        return out.prototypes[spec.n_pro_prototypes + spec.n_con_prototypes +
                              which];
    }
  };

  const double t = static_cast<double>(spec.segments);
  const double r = spec.reversal_rate;
  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    const double z = rng.uniform();  // latent skill
    // Per-segment planting probabilities: pro grows with z, con shrinks,
    // and the reversal rate mixes in the opposite tendency.
    const double p_pro =
        std::min(1.0, (spec.pro_rate / t) * 2.0 * ((1.0 - r) * z + r * (1.0 - z)));
    const double p_con =
        std::min(1.0 - p_pro,
                 (spec.con_rate / t) * 2.0 * ((1.0 - r) * (1.0 - z) + r * z));

    VideoRecord record;
    record.id = "v" + std::to_string(v);
    record.task = "synthetic";
    record.features = Matrix(spec.segments, spec.feature_dim);

    std::vector<SegmentLabel> labels(spec.segments, SegmentLabel::background);
    int n_pro = 0;
    int n_con = 0;
    for (std::size_t s = 0; s < spec.segments; ++s) {
      const double roll = rng.uniform();
      std::size_t which;
      if (roll < p_pro) {
        labels[s] = SegmentLabel::pro;
        which = rng.below(spec.n_pro_prototypes);
        ++n_pro;
      } else if (roll < p_pro + p_con) {
        labels[s] = SegmentLabel::con;
        which = rng.below(spec.n_con_prototypes);
        ++n_con;
      } else {
        which = rng.below(spec.n_bg_prototypes);
      }
      const Matrix& proto = prototype(labels[s], which);
      auto row = record.features.row(s);
      for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        row[d] = proto.data[d] + spec.noise_std * rng.normal();
      }
    }

    // Planted count signal plus a small z tiebreak; the tiebreak never
    // crosses the min_score_gap threshold on its own.
    const double score = static_cast<double>(n_pro - n_con) / t + 1e-4 * z;
    out.truth_scores.push_back(score);
    out.planted.push_back(std::move(labels));
    out.data.add(std::move(record));
  }

  double lo = out.truth_scores[0];
  double hi = out.truth_scores[0];
  for (double s : out.truth_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo < spec.min_score_gap) {
    throw DataError(DataError::Kind::degenerate,
                    "synth generation degenerate: all truth scores within the "
                    "minimum gap");
  }

  for (std::size_t i = 0; i < spec.n_videos; ++i) {
    for (std::size_t j = 0; j < spec.n_videos; ++j) {
      if (i == j) continue;
      if (out.truth_scores[i] - out.truth_scores[j] >= spec.min_score_gap) {
        out.pairs.push_back({out.data.videos[i].id, out.data.videos[j].id,
                             PairOrigin::annotated});
      }
    }
  }
  if (out.pairs.empty()) {
    throw DataError(DataError::Kind::degenerate,
                    "synth generation degenerate: no qualifying pairs");
  }
  return out;
}

AlignmentReport attention_alignment(const RankModel& model,
                                    const SynthDataset& dataset) {
  AlignmentReport report;
  const double k = static_cast<double>(model.cfg.filters);
  const std::size_t n = dataset.data.videos.size();
  for (std::size_t v = 0; v < n; ++v) {
    const Matrix& segments = dataset.data.videos[v].features;
    const auto& labels = dataset.planted[v];
    const Vec alpha_high = module_attention(segments, model.att_high).alpha;
    const Vec alpha_low = module_attention(segments, model.att_low).alpha;
    double masses[2][3] = {{0, 0, 0}, {0, 0, 0}};
    for (std::size_t t = 0; t < segments.rows; ++t) {
      const int lab = static_cast<int>(labels[t]);
      masses[0][lab] += alpha_high[t] / k;
      masses[1][lab] += alpha_low[t] / k;
    }
    report.bg_mass_high += masses[0][0];
    report.pro_mass_high += masses[0][1];
    report.con_mass_high += masses[0][2];
    report.bg_mass_low += masses[1][0];
    report.pro_mass_low += masses[1][1];
    report.con_mass_low += masses[1][2];
  }
  const double inv = 1.0 / static_cast<double>(n);
  report.pro_mass_high *= inv;
  report.con_mass_high *= inv;
  report.bg_mass_high *= inv;
  report.pro_mass_low *= inv;
  report.con_mass_low *= inv;
  report.bg_mass_low *= inv;
  return report;
}

double label_base_rate(const SynthDataset& dataset, SegmentLabel label) {
  double acc = 0.0;
  for (const auto& labels : dataset.planted) {
    const auto hits = std::count(labels.begin(), labels.end(), label);
    acc += static_cast<double>(hits) / static_cast<double>(labels.size());
  }
  return acc / static_cast<double>(dataset.planted.size());
}

void save_truth(const SynthDataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  os.precision(17);
  for (std::size_t v = 0; v < dataset.data.videos.size(); ++v) {
    os << dataset.data.videos[v].id << ',' << dataset.truth_scores[v] << ',';
    for (SegmentLabel lab : dataset.planted[v]) {
      os << (lab == SegmentLabel::pro ? 'p'
                                      : lab == SegmentLabel::con ? 'c' : 'b');
    }
    os << '\n';
  }
}

void write_synth_dataset(const SynthDataset& dataset,
                         const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "features");
  std::vector<std::string> rel_paths;
  for (const auto& video : dataset.data.videos) {
    const std::string rel = "features/" + video.id + ".rskf";
    save_features(video.features, out_dir / rel);
    rel_paths.push_back(rel);
  }
  save_manifest(dataset.data, out_dir / "manifest.txt", rel_paths);
  save_pairs(dataset.pairs, out_dir / "pairs.csv");
  save_truth(dataset, out_dir / "truth.txt");
}

}  // namespace rankatt
