#include "rankatt/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rankatt/errors.hpp"
#include "rankatt/eval.hpp"
#include "rankatt/rng.hpp"

namespace rankatt {

void TrainConfig::validate() const {
  loss.validate();
  if (!(lr > 0.0)) {
    throw DataError(DataError::Kind::degenerate, "train config: lr must be > 0");
  }
  if (batch_size < 1) {
    throw DataError(DataError::Kind::degenerate,
                    "train config: batch_size must be >= 1");
  }
  if (epochs < 1) {
    throw DataError(DataError::Kind::degenerate,
                    "train config: epochs must be >= 1");
  }
  if (filters < 1 || hidden_dim < 1) {
    throw DataError(DataError::Kind::degenerate,
                    "train config: filters and hidden_dim must be >= 1");
  }
  if (noise_sigma < 0.0) {
    throw DataError(DataError::Kind::degenerate,
                    "train config: noise_sigma must be >= 0");
  }
}

const char* phase_name(Phase p) {
  return p == Phase::ranking ? "ranking" : "attention";
}

TermWeights phase_weights(Phase phase, const AblationFlags& a) {
  if (phase == Phase::ranking) return TermWeights::ranking_phase();
  TermWeights w;
  w.rank_plus = 0.0;
  w.rank_minus = 0.0;
  w.rank_uniform = 0.0;
  w.disparity = a.disparity ? 1.0 : 0.0;
  w.rank_aware = a.rank_aware ? 1.0 : 0.0;
  w.diversity = a.diversity ? 1.0 : 0.0;
  return w;
}

bool has_active_term(const TermWeights& w) {
  return w.rank_plus != 0.0 || w.rank_minus != 0.0 || w.rank_uniform != 0.0 ||
         w.disparity != 0.0 || w.rank_aware != 0.0 || w.diversity != 0.0;
}

TermWeights ablation_weights(const AblationFlags& a) {
  TermWeights w;  // rank terms always logged
  w.disparity = a.disparity ? 1.0 : 0.0;
  w.rank_aware = a.rank_aware ? 1.0 : 0.0;
  w.diversity = a.diversity ? 1.0 : 0.0;
  return w;
}

PairLossBreakdown phase_step(RankModel& model, AdamState& opt, Phase phase,
                             const std::vector<PairBatchItem>& batch,
                             const LossConfig& loss, const AblationFlags& abl) {
  if (batch.empty()) {
    throw DataError(DataError::Kind::degenerate, "phase step on empty batch");
  }
  const TermWeights w = phase_weights(phase, abl);
  const bool into_ranking = phase == Phase::ranking;
  // Fully ablated phase: the objective is empty, so only evaluate the
  // losses for the log and leave the parameters (and Adam state) alone.
  const bool update = has_active_term(w);
  const double scale = 1.0 / static_cast<double>(batch.size());

  model.zero_grad();
  PairLossBreakdown mean;
  PairTrace trace;
  for (const PairBatchItem& item : batch) {
    const PairLossBreakdown raw =
        pair_forward(model, *item.better, *item.worse, loss, trace);
    if (!std::isfinite(raw.total)) {
      throw NumericError("non-finite loss in training batch");
    }
    mean += raw;
    if (update) {
      pair_backward(model, trace, loss, w, into_ranking, !into_ranking, scale);
    }
  }
  mean *= scale;

  if (update) {
    auto params =
        into_ranking ? model.ranking_params() : model.attention_params();
    adam_step(params, opt);
  }
  return mean;
}

namespace {

nlohmann::json epoch_json(const EpochRecord& rec) {
  nlohmann::json j{
      {"epoch", rec.epoch},
      {"phase", phase_name(rec.phase)},
      {"rank_plus", rec.loss.rank_plus},
      {"rank_minus", rec.loss.rank_minus},
      {"rank_uniform", rec.loss.rank_uniform},
      {"disp_plus", rec.loss.disp_plus},
      {"disp_minus", rec.loss.disp_minus},
      {"rank_aware", rec.loss.rank_aware},
      {"div_plus", rec.loss.div_plus},
      {"div_minus", rec.loss.div_minus},
      {"total", rec.loss.total},
      {"train_accuracy", rec.train_accuracy},
  };
  if (!rec.checkpoint.empty()) j["checkpoint"] = rec.checkpoint;
  return j;
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint-%06zu.rskm", epoch);
  return buf;
}

}  // namespace

TrainResult train(const Dataset& data, const std::vector<PairAnnotation>& pairs,
                  const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const StepHook& hook) {
  cfg.validate();
  if (data.videos.empty()) {
    throw DataError(DataError::Kind::empty_split, "training set has no videos");
  }
  if (pairs.empty()) {
    throw DataError(DataError::Kind::empty_split,
                    "training needs at least one pair");
  }

  struct ResolvedPair {
    const Matrix* better;
    const Matrix* worse;
  };
  std::vector<ResolvedPair> resolved;
  resolved.reserve(pairs.size());
  for (const auto& p : pairs) {
    resolved.push_back({&data.at(p.better).features, &data.at(p.worse).features});
  }

  ModelConfig mcfg;
  mcfg.feature_dim = data.videos.front().features.cols;
  mcfg.hidden_dim = cfg.hidden_dim;
  mcfg.filters = cfg.filters;
  mcfg.default_segments = data.videos.front().features.rows;

  TrainResult out{RankModel::init(mcfg, cfg.seed), {}};
  RankModel& model = out.model;

  AdamState opt_rank;
  AdamState opt_att;
  opt_rank.lr = cfg.lr;
  opt_att.lr = cfg.lr;
  opt_rank.init(model.ranking_params());
  opt_att.init(model.attention_params());

  // Distinct stream from the init RNG so reshuffles never replay init draws.
  Rng rng(cfg.seed ^ 0x517cc1b727220a95ULL);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  const TermWeights log_mask = ablation_weights(cfg.ablation);
  const bool files = !out_dir.empty();
  std::ofstream log_os;
  if (files) {
    std::filesystem::create_directories(out_dir);
    log_os.open(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log_os) {
      throw DataError(DataError::Kind::missing_file,
                      "cannot open for writing: " +
                          (out_dir / "train_log.jsonl").string());
    }
  }

  std::vector<Matrix> noisy;
  std::vector<PairBatchItem> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Period p: p epochs of ranking, then p of attention, and so on.
    // Period 0 alternates per batch, ranking first within each epoch.
    const bool per_batch = cfg.alternation_period == 0;
    const Phase epoch_phase =
        per_batch ? Phase::ranking
                  : (((epoch - 1) / cfg.alternation_period) % 2 == 0
                         ? Phase::ranking
                         : Phase::attention);
    rng.shuffle(order);

    PairLossBreakdown epoch_sum;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Phase batch_phase =
          per_batch ? (batch_index % 2 == 0 ? Phase::ranking : Phase::attention)
                    : epoch_phase;

      noisy.clear();
      batch.clear();
      noisy.reserve(2 * (stop - start));  // keeps pointers stable below
      for (std::size_t i = start; i < stop; ++i) {
        const ResolvedPair& rp = resolved[order[i]];
        noisy.push_back(augment_noise(*rp.better, cfg.noise_sigma, rng));
        noisy.push_back(augment_noise(*rp.worse, cfg.noise_sigma, rng));
        batch.push_back({&noisy[noisy.size() - 2], &noisy[noisy.size() - 1]});
      }

      PairLossBreakdown raw_mean =
          phase_step(model, batch_phase == Phase::ranking ? opt_rank : opt_att,
                     batch_phase, batch, cfg.loss, cfg.ablation);
      raw_mean *= static_cast<double>(stop - start);
      epoch_sum += raw_mean;
      if (hook) hook(epoch, batch_phase, batch_index, model);
    }
    epoch_sum *= 1.0 / static_cast<double>(order.size());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = epoch_phase;
    rec.loss = apply_weights(epoch_sum, cfg.loss, log_mask);
    rec.train_accuracy = pairwise_accuracy(model, data, pairs).pairwise_accuracy;

    if (files && ((cfg.checkpoint_interval > 0 &&
                   epoch % cfg.checkpoint_interval == 0) ||
                  epoch == cfg.epochs)) {
      const std::string name =
          epoch == cfg.epochs ? "model.rskm" : checkpoint_name(epoch);
      save_checkpoint(model, out_dir / name);
      rec.checkpoint = name;
    }
    if (files) {
      log_os << epoch_json(rec).dump() << '\n';
      log_os.flush();
    }
    out.history.epochs.push_back(std::move(rec));
  }
  return out;
}

void write_history(const TrainHistory& history,
                   const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  for (const auto& rec : history.epochs) os << epoch_json(rec).dump() << '\n';
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw DataError(DataError::Kind::bad_record,
                  "config key '" + key + "': expected boolean, got '" + v + "'");
}

double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw DataError(DataError::Kind::bad_record,
                  "config key '" + key + "': expected number, got '" + v + "'");
}

std::uint64_t parse_count(const std::string& v, const std::string& key) {
  // stoull would wrap "-3" around instead of failing.
  if (v.empty() || v[0] == '-') {
    throw DataError(DataError::Kind::bad_record,
                    "config key '" + key + "': expected count, got '" + v + "'");
  }
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw DataError(DataError::Kind::bad_record,
                  "config key '" + key + "': expected count, got '" + v + "'");
}

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

}  // namespace

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open config: " + path.string());
  }
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError(DataError::Kind::bad_record,
                      path.string() + ":" + std::to_string(lineno) +
                          ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key == "margin") cfg.loss.margin = parse_real(val, key);
    else if (key == "margin_disparity") cfg.loss.margin_disparity = parse_real(val, key);
    else if (key == "margin_rank_aware") cfg.loss.margin_rank_aware = parse_real(val, key);
    else if (key == "lambda_diversity") cfg.loss.lambda_diversity = parse_real(val, key);
    else if (key == "lr") cfg.lr = parse_real(val, key);
    else if (key == "batch_size") cfg.batch_size = parse_count(val, key);
    else if (key == "epochs") cfg.epochs = parse_count(val, key);
    else if (key == "filters") cfg.filters = parse_count(val, key);
    else if (key == "hidden_dim") cfg.hidden_dim = parse_count(val, key);
    else if (key == "noise_sigma") cfg.noise_sigma = parse_real(val, key);
    else if (key == "seed") cfg.seed = parse_count(val, key);
    else if (key == "alternation_period") cfg.alternation_period = parse_count(val, key);
    else if (key == "disparity") cfg.ablation.disparity = parse_bool(val, key);
    else if (key == "rank_aware") cfg.ablation.rank_aware = parse_bool(val, key);
    else if (key == "diversity") cfg.ablation.diversity = parse_bool(val, key);
    else if (key == "checkpoint_interval") cfg.checkpoint_interval = parse_count(val, key);
    else {
      throw DataError(DataError::Kind::bad_record,
                      path.string() + ":" + std::to_string(lineno) +
                          ": unknown config key '" + key + "'");
    }
  }
  return cfg;
}

std::string format_train_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "margin=" << cfg.loss.margin << '\n'
     << "margin_disparity=" << cfg.loss.margin_disparity << '\n'
     << "margin_rank_aware=" << cfg.loss.margin_rank_aware << '\n'
     << "lambda_diversity=" << cfg.loss.lambda_diversity << '\n'
     << "lr=" << cfg.lr << '\n'
     << "batch_size=" << cfg.batch_size << '\n'
     << "epochs=" << cfg.epochs << '\n'
     << "filters=" << cfg.filters << '\n'
     << "hidden_dim=" << cfg.hidden_dim << '\n'
     << "noise_sigma=" << cfg.noise_sigma << '\n'
     << "seed=" << cfg.seed << '\n'
     << "alternation_period=" << cfg.alternation_period << '\n'
     << "disparity=" << (cfg.ablation.disparity ? "true" : "false") << '\n'
     << "rank_aware=" << (cfg.ablation.rank_aware ? "true" : "false") << '\n'
     << "diversity=" << (cfg.ablation.diversity ? "true" : "false") << '\n'
     << "checkpoint_interval=" << cfg.checkpoint_interval << '\n';
  return os.str();
}

void save_train_config(const TrainConfig& cfg,
                       const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  os << format_train_config(cfg);
}

}  // namespace rankatt
