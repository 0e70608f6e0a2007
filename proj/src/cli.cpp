#include "rankatt/cli.hpp"

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "rankatt/data.hpp"
#include "rankatt/errors.hpp"
#include "rankatt/eval.hpp"
#include "rankatt/synth.hpp"
#include "rankatt/train.hpp"

namespace rankatt {
namespace {

namespace fs = std::filesystem;

void bind_train_flags(CLI::App* cmd, TrainConfig& cfg,
                      std::string& config_path) {
  cmd->add_option("--margin", cfg.loss.margin)->capture_default_str();
  cmd->add_option("--margin_disparity", cfg.loss.margin_disparity)
      ->capture_default_str();
  cmd->add_option("--margin_rank_aware", cfg.loss.margin_rank_aware)
      ->capture_default_str();
  cmd->add_option("--lambda_diversity", cfg.loss.lambda_diversity)
      ->capture_default_str();
  cmd->add_option("--lr", cfg.lr)->capture_default_str();
  cmd->add_option("--batch_size", cfg.batch_size)->capture_default_str();
  cmd->add_option("--epochs", cfg.epochs)->capture_default_str();
  cmd->add_option("--filters", cfg.filters)->capture_default_str();
  cmd->add_option("--hidden_dim", cfg.hidden_dim)->capture_default_str();
  cmd->add_option("--noise_sigma", cfg.noise_sigma)->capture_default_str();
  cmd->add_option("--seed", cfg.seed)->capture_default_str();
  cmd->add_option("--alternation_period", cfg.alternation_period)
      ->capture_default_str();
  cmd->add_flag("--disparity,!--no-disparity", cfg.ablation.disparity,
                "disparity loss on/off");
  cmd->add_flag("--rank_aware,!--no-rank_aware", cfg.ablation.rank_aware,
                "rank-aware loss on/off");
  cmd->add_flag("--diversity,!--no-diversity", cfg.ablation.diversity,
                "diversity loss on/off");
  cmd->add_option("--checkpoint_interval", cfg.checkpoint_interval)
      ->capture_default_str();
  cmd->add_option("--config", config_path,
                  "flat key=value file; flags win over it");
}

// Folds a config file under the parsed flags: file values replace defaults,
// explicit flags beat the file. (CLI11's own set_config never fires on
// subcommands, so the file is merged by hand at callback time.)
void merge_config_file(const CLI::App& cmd, TrainConfig& cfg,
                       const std::string& path) {
  if (path.empty()) return;
  TrainConfig merged = load_train_config(path);
  const auto keep = [&](const std::string& flag, auto member) {
    if (cmd.count(flag) > 0) merged.*member = cfg.*member;
  };
  const auto keep_loss = [&](const std::string& flag, auto member) {
    if (cmd.count(flag) > 0) merged.loss.*member = cfg.loss.*member;
  };
  const auto keep_abl = [&](const std::string& flag, auto member) {
    if (cmd.count(flag) > 0) merged.ablation.*member = cfg.ablation.*member;
  };
  keep_loss("--margin", &LossConfig::margin);
  keep_loss("--margin_disparity", &LossConfig::margin_disparity);
  keep_loss("--margin_rank_aware", &LossConfig::margin_rank_aware);
  keep_loss("--lambda_diversity", &LossConfig::lambda_diversity);
  keep("--lr", &TrainConfig::lr);
  keep("--batch_size", &TrainConfig::batch_size);
  keep("--epochs", &TrainConfig::epochs);
  keep("--filters", &TrainConfig::filters);
  keep("--hidden_dim", &TrainConfig::hidden_dim);
  keep("--noise_sigma", &TrainConfig::noise_sigma);
  keep("--seed", &TrainConfig::seed);
  keep("--alternation_period", &TrainConfig::alternation_period);
  keep("--checkpoint_interval", &TrainConfig::checkpoint_interval);
  keep_abl("--disparity", &AblationFlags::disparity);
  keep_abl("--rank_aware", &AblationFlags::rank_aware);
  keep_abl("--diversity", &AblationFlags::diversity);
  cfg = merged;
}

void echo_config(const std::string& body) {
  std::cout << "config:\n" << body;
}

struct CliState {
  // synth
  SynthSpec synth_spec;
  std::string synth_out;
  // closure
  std::string closure_pairs;
  std::string closure_out;
  // split
  std::string split_manifest;
  std::string split_pairs;
  double split_fraction = 0.2;
  std::uint64_t split_seed = 1;
  std::string split_out;
  // train
  TrainConfig train_cfg;
  std::string train_config;
  std::string train_manifest;
  std::string train_pairs;
  std::string train_out;
  // eval
  std::string eval_manifest;
  std::string eval_pairs;
  std::string eval_checkpoint;
  ScorerKind eval_scorer = ScorerKind::fused;
  std::string eval_out;
  // ablate
  TrainConfig ablate_cfg;
  std::string ablate_config;
  std::string ablate_manifest;
  std::string ablate_pairs;
  std::vector<std::uint64_t> ablate_seeds{1, 2, 3, 4, 5};
  double ablate_fraction = 0.2;
  std::string ablate_out;
  // export-attention
  std::string export_manifest;
  std::string export_checkpoint;
  std::string export_video;
  std::string export_out;
  // validate
  std::string validate_manifest;
  std::string validate_pairs_path;
};

void run_synth(const CliState& st) {
  const SynthSpec& spec = st.synth_spec;
  std::cout << "command: synth\nconfig:\n"
            << "n_videos=" << spec.n_videos << '\n'
            << "segments=" << spec.segments << '\n'
            << "feature_dim=" << spec.feature_dim << '\n'
            << "n_pro_prototypes=" << spec.n_pro_prototypes << '\n'
            << "n_con_prototypes=" << spec.n_con_prototypes << '\n'
            << "n_bg_prototypes=" << spec.n_bg_prototypes << '\n'
            << "pro_rate=" << spec.pro_rate << '\n'
            << "con_rate=" << spec.con_rate << '\n'
            << "noise_std=" << spec.noise_std << '\n'
            << "reversal_rate=" << spec.reversal_rate << '\n'
            << "min_score_gap=" << spec.min_score_gap << '\n'
            << "seed=" << spec.seed << '\n';
  const SynthDataset ds = generate(spec);
  write_synth_dataset(ds, st.synth_out);
  std::cout << "videos=" << ds.data.videos.size() << " pairs=" << ds.pairs.size()
            << "\nwrote " << st.synth_out << '\n';
}

void run_closure(const CliState& st) {
  std::cout << "command: closure\nconfig:\npairs=" << st.closure_pairs << '\n';
  const auto pairs = load_pairs(st.closure_pairs);
  const auto closed = transitive_closure(pairs);
  fs::create_directories(st.closure_out);
  const fs::path out = fs::path(st.closure_out) / "closure.csv";
  save_pairs(closed, out, /*with_origin=*/true);
  std::cout << "annotated=" << pairs.size() << " closed=" << closed.size()
            << "\nwrote " << out.string() << '\n';
}

void run_split(const CliState& st) {
  std::cout << "command: split\nconfig:\nmanifest=" << st.split_manifest
            << "\npairs=" << st.split_pairs
            << "\ntest_fraction=" << st.split_fraction
            << "\nseed=" << st.split_seed << '\n';
  const Dataset data = load_manifest(st.split_manifest);
  const auto pairs = load_pairs(st.split_pairs);
  const SplitSpec split =
      make_split(data.ids(), pairs, st.split_fraction, st.split_seed);
  fs::create_directories(st.split_out);
  const fs::path out(st.split_out);
  save_pairs(split.train_pairs, out / "train_pairs.csv");
  save_pairs(split.test_pairs, out / "test_pairs.csv");
  auto write_ids = [](const std::vector<std::string>& ids,
                      const fs::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
      throw DataError(DataError::Kind::missing_file,
                      "cannot open for writing: " + path.string());
    }
    for (const auto& id : ids) os << id << '\n';
  };
  write_ids(split.train_videos, out / "train_videos.txt");
  write_ids(split.test_videos, out / "test_videos.txt");
  std::cout << "train_videos=" << split.train_videos.size()
            << " test_videos=" << split.test_videos.size()
            << " train_pairs=" << split.train_pairs.size()
            << " test_pairs=" << split.test_pairs.size()
            << " dropped_cross_pairs=" << split.dropped_cross_pairs
            << "\nwrote " << out.string() << '\n';
}

void run_train(const CliState& st) {
  st.train_cfg.validate();
  std::cout << "command: train\n";
  echo_config(format_train_config(st.train_cfg));
  const Dataset data = load_manifest(st.train_manifest);
  const auto pairs = load_pairs(st.train_pairs);
  fs::create_directories(st.train_out);
  save_train_config(st.train_cfg, fs::path(st.train_out) / "resolved.cfg");
  const TrainResult result = train(data, pairs, st.train_cfg, st.train_out);
  const EpochRecord& last = result.history.epochs.back();
  std::cout << "epochs=" << result.history.epochs.size()
            << " final_loss=" << last.loss.total
            << " final_train_accuracy=" << last.train_accuracy << "\nwrote "
            << (fs::path(st.train_out) / "model.rskm").string() << '\n';
}

void run_eval(const CliState& st) {
  std::cout << "command: eval\nconfig:\nmanifest=" << st.eval_manifest
            << "\npairs=" << st.eval_pairs
            << "\ncheckpoint=" << st.eval_checkpoint
            << "\nscorer=" << scorer_name(st.eval_scorer) << '\n';
  const RankModel model = load_checkpoint(st.eval_checkpoint);
  const Dataset data = load_manifest(st.eval_manifest);
  const auto pairs = load_pairs(st.eval_pairs);
  const EvalReport r = pairwise_accuracy(model, data, pairs, st.eval_scorer);
  std::ostringstream body;
  body.precision(17);
  body << "scorer=" << scorer_name(st.eval_scorer) << '\n'
       << "n_pairs=" << r.n_pairs << '\n'
       << "n_correct=" << r.n_correct << '\n'
       << "tie_count=" << r.tie_count << '\n'
       << "pairwise_accuracy=" << r.pairwise_accuracy << '\n'
       << "accuracy_high=" << r.high << '\n'
       << "accuracy_low=" << r.low << '\n'
       << "accuracy_uniform=" << r.uniform << '\n'
       << "accuracy_fused=" << r.fused << '\n';
  std::cout << body.str();
  if (!st.eval_out.empty()) {
    fs::create_directories(st.eval_out);
    const fs::path path = fs::path(st.eval_out) / "eval.txt";
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
      throw DataError(DataError::Kind::missing_file,
                      "cannot open for writing: " + path.string());
    }
    os << body.str();
    std::cout << "wrote " << path.string() << '\n';
  }
}

void run_ablate(const CliState& st) {
  st.ablate_cfg.validate();
  std::cout << "command: ablate\n";
  echo_config(format_train_config(st.ablate_cfg));
  std::cout << "seeds=";
  for (std::size_t i = 0; i < st.ablate_seeds.size(); ++i) {
    std::cout << (i ? "," : "") << st.ablate_seeds[i];
  }
  std::cout << "\ntest_fraction=" << st.ablate_fraction << '\n';
  const Dataset data = load_manifest(st.ablate_manifest);
  const auto pairs = load_pairs(st.ablate_pairs);
  const auto rows = ablation_suite(data, pairs, st.ablate_cfg, st.ablate_seeds,
                                   st.ablate_fraction);
  fs::create_directories(st.ablate_out);
  const fs::path out = fs::path(st.ablate_out) / "ablation.csv";
  write_ablation_table(rows, out);
  for (const auto& row : rows) {
    std::cout << row.name << ": mean=" << row.mean << " std=" << row.stddev
              << '\n';
  }
  std::cout << "wrote " << out.string() << '\n';
}

void run_export_attention(const CliState& st) {
  std::cout << "command: export-attention\nconfig:\nmanifest="
            << st.export_manifest << "\ncheckpoint=" << st.export_checkpoint
            << "\nvideo=" << st.export_video << '\n';
  const RankModel model = load_checkpoint(st.export_checkpoint);
  const Dataset data = load_manifest(st.export_manifest);
  const VideoRecord& video = data.at(st.export_video);
  fs::create_directories(st.export_out);
  const fs::path out =
      fs::path(st.export_out) / ("attention-" + st.export_video + ".csv");
  export_attention(model, video.features, out);
  std::cout << "wrote " << out.string() << '\n';
}

void run_validate(const CliState& st) {
  std::cout << "command: validate\nconfig:\nmanifest=" << st.validate_manifest
            << "\npairs="
            << (st.validate_pairs_path.empty() ? "-" : st.validate_pairs_path)
            << '\n';
  const Dataset data = load_manifest(st.validate_manifest);
  std::cout << "videos=" << data.videos.size() << '\n';
  std::size_t problems = 0;
  if (!data.videos.empty()) {
    const std::size_t dim = data.videos.front().feature_dim();
    for (const auto& video : data.videos) {
      if (video.feature_dim() != dim) {
        std::cout << "dim mismatch: " << video.id << " has D="
                  << video.feature_dim() << ", expected " << dim << '\n';
        ++problems;
      }
    }
  }
  if (!st.validate_pairs_path.empty()) {
    const auto pairs = load_pairs(st.validate_pairs_path);
    std::cout << "pairs=" << pairs.size() << '\n';
    for (const auto& p : pairs) {
      if (!data.contains(p.better) || !data.contains(p.worse)) {
        std::cout << "unknown id in pair: " << p.better << ',' << p.worse
                  << '\n';
        ++problems;
      }
    }
    const PairFileIssues issues = validate_pairs(pairs);
    for (const auto& s : issues.self_pairs) {
      std::cout << "self pair: " << s << '\n';
      ++problems;
    }
    for (const auto& s : issues.duplicates) {
      std::cout << "duplicate: " << s << '\n';
      ++problems;
    }
    for (const auto& s : issues.contradictions) {
      std::cout << "contradiction: " << s << '\n';
      ++problems;
    }
    if (issues.clean() && problems == 0) {
      try {
        transitive_closure(pairs);
      } catch (const DataError& e) {
        std::cout << "cycle: " << e.what() << '\n';
        ++problems;
      }
    }
  }
  if (problems > 0) {
    throw DataError(DataError::Kind::bad_record,
                    std::to_string(problems) + " validation problem(s) found");
  }
  std::cout << "ok\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"rank-aware temporal attention for pairwise skill ranking"};
  app.require_subcommand(1);
  CliState st;

  auto* synth = app.add_subcommand("synth", "generate a planted-signal dataset");
  synth->add_option("--n_videos", st.synth_spec.n_videos)->capture_default_str();
  synth->add_option("--segments", st.synth_spec.segments)->capture_default_str();
  synth->add_option("--feature_dim", st.synth_spec.feature_dim)
      ->capture_default_str();
  synth->add_option("--n_pro_prototypes", st.synth_spec.n_pro_prototypes)
      ->capture_default_str();
  synth->add_option("--n_con_prototypes", st.synth_spec.n_con_prototypes)
      ->capture_default_str();
  synth->add_option("--n_bg_prototypes", st.synth_spec.n_bg_prototypes)
      ->capture_default_str();
  synth->add_option("--pro_rate", st.synth_spec.pro_rate)->capture_default_str();
  synth->add_option("--con_rate", st.synth_spec.con_rate)->capture_default_str();
  synth->add_option("--noise_std", st.synth_spec.noise_std)
      ->capture_default_str();
  synth->add_option("--reversal_rate", st.synth_spec.reversal_rate)
      ->capture_default_str();
  synth->add_option("--min_score_gap", st.synth_spec.min_score_gap)
      ->capture_default_str();
  synth->add_option("--seed", st.synth_spec.seed)->capture_default_str();
  synth->add_option("--out", st.synth_out, "output directory")->required();
  synth->callback([&st] { run_synth(st); });

  auto* closure =
      app.add_subcommand("closure", "expand pairs by transitivity");
  closure->add_option("--pairs", st.closure_pairs, "pair csv")->required();
  closure->add_option("--out", st.closure_out, "output directory")->required();
  closure->callback([&st] { run_closure(st); });

  auto* split = app.add_subcommand("split", "seeded train/test video split");
  split->add_option("--manifest", st.split_manifest)->required();
  split->add_option("--pairs", st.split_pairs)->required();
  split->add_option("--test_fraction", st.split_fraction)
      ->capture_default_str();
  split->add_option("--seed", st.split_seed)->capture_default_str();
  split->add_option("--out", st.split_out, "output directory")->required();
  split->callback([&st] { run_split(st); });

  auto* tr = app.add_subcommand("train", "train the three-branch ranker");
  tr->add_option("--manifest", st.train_manifest)->required();
  tr->add_option("--pairs", st.train_pairs)->required();
  tr->add_option("--out", st.train_out, "output directory")->required();
  bind_train_flags(tr, st.train_cfg, st.train_config);
  tr->callback([&st, tr] {
    merge_config_file(*tr, st.train_cfg, st.train_config);
    run_train(st);
  });

  auto* ev = app.add_subcommand("eval", "pairwise accuracy of a checkpoint");
  ev->add_option("--manifest", st.eval_manifest)->required();
  ev->add_option("--pairs", st.eval_pairs)->required();
  ev->add_option("--checkpoint", st.eval_checkpoint)->required();
  const std::map<std::string, ScorerKind> scorer_map{
      {"fused", ScorerKind::fused},
      {"high", ScorerKind::high},
      {"low", ScorerKind::low},
      {"uniform", ScorerKind::uniform}};
  ev->add_option("--scorer", st.eval_scorer)
      ->transform(CLI::CheckedTransformer(scorer_map, CLI::ignore_case))
      ->capture_default_str();
  ev->add_option("--out", st.eval_out, "optional output directory");
  ev->callback([&st] { run_eval(st); });

  auto* ab = app.add_subcommand("ablate", "loss and filter-count ablations");
  ab->add_option("--manifest", st.ablate_manifest)->required();
  ab->add_option("--pairs", st.ablate_pairs)->required();
  ab->add_option("--seeds", st.ablate_seeds, "comma-separated seeds")
      ->delimiter(',')
      ->capture_default_str();
  ab->add_option("--test_fraction", st.ablate_fraction)->capture_default_str();
  ab->add_option("--out", st.ablate_out, "output directory")->required();
  bind_train_flags(ab, st.ablate_cfg, st.ablate_config);
  ab->callback([&st, ab] {
    merge_config_file(*ab, st.ablate_cfg, st.ablate_config);
    run_ablate(st);
  });

  auto* ex = app.add_subcommand("export-attention",
                                "per-segment attention weights as csv");
  ex->add_option("--manifest", st.export_manifest)->required();
  ex->add_option("--checkpoint", st.export_checkpoint)->required();
  ex->add_option("--video", st.export_video, "video id")->required();
  ex->add_option("--out", st.export_out, "output directory")->required();
  ex->callback([&st] { run_export_attention(st); });

  auto* va = app.add_subcommand("validate", "lint a manifest and pair file");
  va->add_option("--manifest", st.validate_manifest)->required();
  va->add_option("--pairs", st.validate_pairs_path);
  va->callback([&st] { run_validate(st); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the flag error
    return code == 0 ? 0 : 2;
  } catch (const DataError& e) {
    std::cerr << "error: data: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << '\n';
    return 4;
  } catch (const ShapeError& e) {
    std::cerr << "error: numeric: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("rankatt");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace rankatt
