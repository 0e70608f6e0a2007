#include "rankatt/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "rankatt/errors.hpp"
#include "rankatt/rng.hpp"

namespace rankatt {

RankModel RankModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.feature_dim == 0 || cfg.hidden_dim == 0 || cfg.filters == 0) {
    throw ShapeError("model init: dimensions must be positive");
  }
  RankModel m;
  m.cfg = cfg;
  m.att_high = AttentionModule(cfg.filters, cfg.hidden_dim, cfg.feature_dim,
                               ModuleRole::high);
  m.att_low = AttentionModule(cfg.filters, cfg.hidden_dim, cfg.feature_dim,
                              ModuleRole::low);
  m.rank_high = AffineLayer(1, cfg.feature_dim);
  m.rank_low = AffineLayer(1, cfg.feature_dim);
  m.rank_uniform = AffineLayer(1, cfg.feature_dim);

  Rng rng(seed);
  for (auto* module : {&m.att_high, &m.att_low}) {
    for (auto& f : module->filters) {
      glorot_init(f.layer1, rng);
      glorot_init(f.layer2, rng);
    }
  }
  glorot_init(m.rank_high, rng);
  glorot_init(m.rank_low, rng);
  glorot_init(m.rank_uniform, rng);
  return m;
}

namespace {

void append_layer_views(AffineLayer& layer, std::vector<ParamView>& out) {
  out.push_back({layer.w.data.data(), layer.dw.data.data(), layer.w.data.size()});
  out.push_back({layer.b.data(), layer.db.data(), layer.b.size()});
}

void append_module_views(AttentionModule& module, std::vector<ParamView>& out) {
  for (auto& f : module.filters) {
    append_layer_views(f.layer1, out);
    append_layer_views(f.layer2, out);
  }
}

}  // namespace

std::vector<ParamView> RankModel::ranking_params() {
  std::vector<ParamView> out;
  append_layer_views(rank_high, out);
  append_layer_views(rank_low, out);
  append_layer_views(rank_uniform, out);
  return out;
}

std::vector<ParamView> RankModel::attention_params() {
  std::vector<ParamView> out;
  append_module_views(att_high, out);
  append_module_views(att_low, out);
  return out;
}

std::vector<ParamView> RankModel::all_params() {
  std::vector<ParamView> out = attention_params();
  auto ranking = ranking_params();
  out.insert(out.end(), ranking.begin(), ranking.end());
  return out;
}

void RankModel::zero_grad() {
  zero_grads(all_params());
}

double uniform_score(const Matrix& segments, const RankModel& model) {
  if (segments.cols != model.cfg.feature_dim) {
    throw ShapeError("uniform_score: feature dim mismatch");
  }
  Vec mean(segments.cols, 0.0);
  const double inv = 1.0 / static_cast<double>(segments.rows);
  for (std::size_t t = 0; t < segments.rows; ++t) {
    axpy(inv, segments.row(t), mean);
  }
  return model.rank_uniform.forward(mean)[0];
}

BranchScores branch_scores(const Matrix& segments, const RankModel& model) {
  BranchScores s;
  const ModuleAttention high = module_attention(segments, model.att_high);
  const ModuleAttention low = module_attention(segments, model.att_low);
  s.s_plus = model.rank_high.forward(attention_pool(segments, high.alpha))[0];
  s.s_minus = model.rank_low.forward(attention_pool(segments, low.alpha))[0];
  s.u = uniform_score(segments, model);
  return s;
}

double rank_score(const Matrix& segments, const RankModel& model) {
  const BranchScores s = branch_scores(segments, model);
  return s.s_plus + s.s_minus;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[4] = {'R', 'S', 'K', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_block(std::ostream& os, const std::vector<double>& values) {
  for (double v : values) put_f64(os, v);
}

void get_block(std::istream& is, std::vector<double>& values) {
  for (double& v : values) v = get_f64(is);
}

void put_layer(std::ostream& os, const AffineLayer& layer) {
  put_block(os, layer.w.data);
  put_block(os, layer.b);
}

void get_layer(std::istream& is, AffineLayer& layer) {
  get_block(is, layer.w.data);
  get_block(is, layer.b);
}

}  // namespace

void save_checkpoint(const RankModel& model, const std::filesystem::path& path) {
  // Write-temp-then-rename keeps checkpoints atomic.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw DataError(DataError::Kind::missing_file,
                      "cannot open checkpoint for writing: " + tmp.string());
    }
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(model.cfg.feature_dim));
    put_u32(os, static_cast<std::uint32_t>(model.cfg.hidden_dim));
    put_u32(os, static_cast<std::uint32_t>(model.cfg.filters));
    put_u32(os, static_cast<std::uint32_t>(model.cfg.default_segments));
    for (const auto* module : {&model.att_high, &model.att_low}) {
      for (const auto& f : module->filters) {
        put_layer(os, f.layer1);
        put_layer(os, f.layer2);
      }
    }
    put_layer(os, model.rank_high);
    put_layer(os, model.rank_low);
    put_layer(os, model.rank_uniform);
    if (!os) {
      throw DataError(DataError::Kind::corrupt_payload,
                      "short write while saving checkpoint: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

RankModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open checkpoint: " + path.string());
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(DataError::Kind::corrupt_header,
                    "bad checkpoint magic in " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw DataError(DataError::Kind::corrupt_header,
                    "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.feature_dim = get_u32(is);
  cfg.hidden_dim = get_u32(is);
  cfg.filters = get_u32(is);
  cfg.default_segments = get_u32(is);
  if (!is || cfg.feature_dim == 0 || cfg.hidden_dim == 0 || cfg.filters == 0) {
    throw DataError(DataError::Kind::corrupt_header,
                    "bad checkpoint dimensions in " + path.string());
  }

  RankModel model = RankModel::init(cfg, 0);
  for (auto* module : {&model.att_high, &model.att_low}) {
    for (auto& f : module->filters) {
      get_layer(is, f.layer1);
      get_layer(is, f.layer2);
    }
  }
  get_layer(is, model.rank_high);
  get_layer(is, model.rank_low);
  get_layer(is, model.rank_uniform);
  if (!is) {
    throw DataError(DataError::Kind::corrupt_payload,
                    "checkpoint payload truncated: " + path.string());
  }
  model.zero_grad();
  return model;
}

}  // namespace rankatt
