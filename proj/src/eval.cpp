#include "rankatt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "rankatt/errors.hpp"

namespace rankatt {

const char* scorer_name(ScorerKind s) {
  switch (s) {
    case ScorerKind::fused: return "fused";
    case ScorerKind::high: return "high";
    case ScorerKind::low: return "low";
    case ScorerKind::uniform: return "uniform";
  }
  return "?";
}

namespace {

struct Tally {
  std::size_t correct = 0;
  std::size_t ties = 0;

  void feed(double better, double worse) {
    if (better > worse) {
      ++correct;
    } else if (better == worse) {
      ++ties;
    }
  }
  double accuracy(std::size_t n) const {
    return static_cast<double>(correct) / static_cast<double>(n);
  }
};

}  // namespace

EvalReport pairwise_accuracy(const RankModel& model, const Dataset& data,
                             const std::vector<PairAnnotation>& pairs,
                             ScorerKind scorer) {
  if (pairs.empty()) {
    throw DataError(DataError::Kind::degenerate,
                    "evaluation needs at least one pair");
  }
  // Score every distinct video once; pairs then compare cached numbers.
  std::unordered_map<std::string, BranchScores> cache;
  cache.reserve(pairs.size());
  auto scores_of = [&](const std::string& id) -> const BranchScores& {
    auto it = cache.find(id);
    if (it == cache.end()) {
      it = cache.emplace(id, branch_scores(data.at(id).features, model)).first;
    }
    return it->second;
  };

  Tally high, low, uniform, fused;
  for (const auto& p : pairs) {
    const BranchScores& a = scores_of(p.better);
    const BranchScores& b = scores_of(p.worse);
    high.feed(a.s_plus, b.s_plus);
    low.feed(a.s_minus, b.s_minus);
    uniform.feed(a.u, b.u);
    // The fused score is s+ + s-, full stop. u has no way in.
    fused.feed(a.s_plus + a.s_minus, b.s_plus + b.s_minus);
  }

  EvalReport r;
  r.n_pairs = pairs.size();
  r.high = high.accuracy(r.n_pairs);
  r.low = low.accuracy(r.n_pairs);
  r.uniform = uniform.accuracy(r.n_pairs);
  r.fused = fused.accuracy(r.n_pairs);
  const Tally& head = scorer == ScorerKind::high      ? high
                      : scorer == ScorerKind::low     ? low
                      : scorer == ScorerKind::uniform ? uniform
                                                      : fused;
  r.n_correct = head.correct;
  r.tie_count = head.ties;
  r.pairwise_accuracy = head.accuracy(r.n_pairs);
  return r;
}

EvalReport pairwise_accuracy(
    const std::function<double(const std::string&)>& score,
    const std::vector<PairAnnotation>& pairs) {
  if (pairs.empty()) {
    throw DataError(DataError::Kind::degenerate,
                    "evaluation needs at least one pair");
  }
  std::unordered_map<std::string, double> cache;
  auto score_of = [&](const std::string& id) {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, score(id)).first;
    return it->second;
  };
  Tally t;
  for (const auto& p : pairs) t.feed(score_of(p.better), score_of(p.worse));
  EvalReport r;
  r.n_pairs = pairs.size();
  r.n_correct = t.correct;
  r.tie_count = t.ties;
  r.pairwise_accuracy = t.accuracy(r.n_pairs);
  return r;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("pearson: length mismatch");
  }
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;  // constant vector convention
  return sab / std::sqrt(saa * sbb);
}

CorrelationReport filter_correlation(const RankModel& model,
                                     const Dataset& data) {
  if (data.videos.empty()) {
    throw DataError(DataError::Kind::degenerate,
                    "filter correlation needs at least one video");
  }
  const std::size_t k = model.cfg.filters;
  CorrelationReport rep;
  rep.cross = Matrix(k, k);
  for (const auto& video : data.videos) {
    const Matrix ah = module_attention(video.features, model.att_high).a;
    const Matrix al = module_attention(video.features, model.att_low).a;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        rep.cross.at(i, j) += pearson(ah.row(i), al.row(j));
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(data.videos.size());
  rep.max = -2.0;
  for (double& v : rep.cross.data) {
    v *= inv;
    rep.mean += v;
    rep.max = std::max(rep.max, v);
  }
  rep.mean /= static_cast<double>(k * k);
  return rep;
}

double within_module_correlation(const RankModel& model, const Dataset& data,
                                 ModuleRole role) {
  const AttentionModule& mod =
      role == ModuleRole::high ? model.att_high : model.att_low;
  const std::size_t k = mod.filter_count();
  if (k < 2 || data.videos.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& video : data.videos) {
    const Matrix a = module_attention(video.features, mod).a;
    double video_acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        video_acc += pearson(a.row(i), a.row(j));
        ++n;
      }
    }
    acc += video_acc / static_cast<double>(n);
  }
  return acc / static_cast<double>(data.videos.size());
}

void export_attention(const RankModel& model, const Matrix& segments,
                      const std::filesystem::path& path) {
  const ModuleAttention high = module_attention(segments, model.att_high);
  const ModuleAttention low = module_attention(segments, model.att_low);
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  os.precision(17);
  const std::size_t k = model.cfg.filters;
  os << "segment,alpha_high,alpha_low";
  for (std::size_t f = 0; f < k; ++f) os << ",high_" << f;
  for (std::size_t f = 0; f < k; ++f) os << ",low_" << f;
  os << '\n';
  for (std::size_t t = 0; t < segments.rows; ++t) {
    os << t << ',' << high.alpha[t] << ',' << low.alpha[t];
    for (std::size_t f = 0; f < k; ++f) os << ',' << high.a.at(f, t);
    for (std::size_t f = 0; f < k; ++f) os << ',' << low.a.at(f, t);
    os << '\n';
  }
  if (!os) {
    throw DataError(DataError::Kind::corrupt_payload,
                    "short write: " + path.string());
  }
}

namespace {

void finish_row(AblationRow& row) {
  double mean = 0.0;
  for (double a : row.accuracies) mean += a;
  mean /= static_cast<double>(row.accuracies.size());
  double var = 0.0;
  for (double a : row.accuracies) var += (a - mean) * (a - mean);
  var /= static_cast<double>(row.accuracies.size());
  row.mean = mean;
  row.stddev = std::sqrt(var);
}

}  // namespace

std::vector<AblationRow> ablation_suite(
    const Dataset& data, const std::vector<PairAnnotation>& pairs,
    const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
    double test_fraction) {
  if (seeds.empty()) {
    throw DataError(DataError::Kind::degenerate,
                    "ablation suite needs at least one seed");
  }
  struct LossConfigRow {
    const char* name;
    AblationFlags flags;
  };
  // Cumulative, in the order the terms were motivated.
  const LossConfigRow loss_rows[] = {
      {"rank-only", {false, false, false}},
      {"+diversity", {false, false, true}},
      {"+disparity", {true, false, true}},
      {"+rank-aware", {true, true, true}},
  };
  const std::size_t k_sweep[] = {1, 2, 3, 4};

  std::vector<AblationRow> rows;
  for (const auto& lr : loss_rows) rows.push_back({lr.name, {}, 0.0, 0.0});
  for (std::size_t k : k_sweep) {
    rows.push_back({"K=" + std::to_string(k), {}, 0.0, 0.0});
  }

  const std::vector<std::string> ids = data.ids();
  for (std::uint64_t seed : seeds) {
    const SplitSpec split = make_split(ids, pairs, test_fraction, seed);
    auto run = [&](const AblationFlags& flags, std::size_t filters) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.ablation = flags;
      cfg.filters = filters;
      const TrainResult result = train(data, split.train_pairs, cfg);
      return pairwise_accuracy(result.model, data, split.test_pairs)
          .pairwise_accuracy;
    };
    double full_accuracy = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double acc = run(loss_rows[i].flags, base.filters);
      rows[i].accuracies.push_back(acc);
      if (i == 3) full_accuracy = acc;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      // The all-losses run is trained once; its K row reuses it.
      const double acc = k_sweep[i] == base.filters
                             ? full_accuracy
                             : run(AblationFlags{}, k_sweep[i]);
      rows[4 + i].accuracies.push_back(acc);
    }
  }
  for (auto& row : rows) finish_row(row);
  return rows;
}

void write_ablation_table(const std::vector<AblationRow>& rows,
                          const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  os.precision(17);
  os << "config,mean,std";
  if (!rows.empty()) {
    for (std::size_t s = 0; s < rows.front().accuracies.size(); ++s) {
      os << ",seed" << s;
    }
  }
  os << '\n';
  for (const auto& row : rows) {
    os << row.name << ',' << row.mean << ',' << row.stddev;
    for (double a : row.accuracies) os << ',' << a;
    os << '\n';
  }
}

}  // namespace rankatt
