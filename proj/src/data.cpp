#include "rankatt/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "rankatt/errors.hpp"

namespace rankatt {

void Dataset::add(VideoRecord record) {
  if (contains(record.id)) {
    throw DataError(DataError::Kind::bad_record,
                    "duplicate video id: " + record.id);
  }
  index.emplace(record.id, videos.size());
  videos.push_back(std::move(record));
}

const VideoRecord& Dataset::at(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) {
    throw DataError(DataError::Kind::unknown_id, "unknown video id: " + id);
  }
  return videos[it->second];
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(v.id);
  return out;
}

// ---------------------------------------------------------------------------
// Feature files

namespace {

constexpr char kFeatureMagic[4] = {'R', 'S', 'K', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

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

}  // namespace

void save_features(const Matrix& features, const std::filesystem::path& path) {
  if (features.rows == 0 || features.cols == 0) {
    throw DataError(DataError::Kind::bad_record,
                    "refusing to write empty feature matrix");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  os.write(kFeatureMagic, 4);
  put_u32(os, kFeatureVersion);
  put_u32(os, static_cast<std::uint32_t>(features.rows));
  put_u32(os, static_cast<std::uint32_t>(features.cols));
  for (double v : features.data) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
      b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) {
    throw DataError(DataError::Kind::corrupt_payload,
                    "short write: " + path.string());
  }
}

VideoRecord load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError(DataError::Kind::missing_file,
                    "feature file not found: " + path.string());
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw DataError(DataError::Kind::corrupt_header,
                    "bad feature magic in " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  const std::uint32_t t = get_u32(is);
  const std::uint32_t d = get_u32(is);
  if (!is || version != kFeatureVersion) {
    throw DataError(DataError::Kind::corrupt_header,
                    "unsupported feature version in " + path.string());
  }
  if (t == 0 || d == 0) {
    throw DataError(DataError::Kind::corrupt_header,
                    "feature header declares empty matrix: " + path.string());
  }

  VideoRecord record;
  record.features = Matrix(t, d);
  for (double& v : record.features.data) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  if (!is) {
    throw DataError(DataError::Kind::corrupt_payload,
                    "feature payload truncated: " + path.string());
  }
  if (!record.features.all_finite()) {
    throw DataError(DataError::Kind::non_finite,
                    "non-finite feature values in " + path.string());
  }
  record.id = path.stem().string();
  record.source_path = path.string();
  return record;
}

// ---------------------------------------------------------------------------
// Manifest and pair files

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) {
    throw DataError(DataError::Kind::missing_file,
                    "manifest not found: " + manifest_path.string());
  }
  const std::filesystem::path base = manifest_path.parent_path();
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw DataError(DataError::Kind::bad_record,
                      "manifest line " + std::to_string(line_no) +
                          ": expected id,task,path");
    }
    VideoRecord record = load_features(base / fields[2]);
    record.id = fields[0];
    record.task = fields[1];
    dataset.add(std::move(record));
  }
  if (dataset.videos.empty()) {
    throw DataError(DataError::Kind::bad_record,
                    "manifest lists no videos: " + manifest_path.string());
  }
  return dataset;
}

void save_manifest(const Dataset& dataset,
                   const std::filesystem::path& manifest_path,
                   const std::vector<std::string>& relative_paths) {
  if (relative_paths.size() != dataset.videos.size()) {
    throw ShapeError("save_manifest: one relative path per video required");
  }
  std::ofstream os(manifest_path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + manifest_path.string());
  }
  for (std::size_t i = 0; i < dataset.videos.size(); ++i) {
    os << dataset.videos[i].id << ',' << dataset.videos[i].task << ','
       << relative_paths[i] << '\n';
  }
}

std::vector<PairAnnotation> load_pairs(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw DataError(DataError::Kind::missing_file,
                    "pair file not found: " + path.string());
  }
  std::string line;
  if (!std::getline(is, line)) {
    throw DataError(DataError::Kind::corrupt_header,
                    "empty pair file: " + path.string());
  }
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "better" || header[1] != "worse") {
    throw DataError(DataError::Kind::corrupt_header,
                    "pair file must start with 'better,worse': " + path.string());
  }
  std::vector<PairAnnotation> pairs;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() ||
        fields[1].empty()) {
      throw DataError(DataError::Kind::bad_record,
                      path.string() + " line " + std::to_string(line_no) +
                          ": expected better,worse[,origin]");
    }
    PairAnnotation p{fields[0], fields[1], PairOrigin::annotated};
    if (fields.size() == 3) {
      if (fields[2] == "closure") {
        p.origin = PairOrigin::closure;
      } else if (fields[2] != "annotated") {
        throw DataError(DataError::Kind::bad_record,
                        path.string() + " line " + std::to_string(line_no) +
                            ": unknown origin '" + fields[2] + "'");
      }
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_pairs(const std::vector<PairAnnotation>& pairs,
                const std::filesystem::path& path, bool with_origin) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError(DataError::Kind::missing_file,
                    "cannot open for writing: " + path.string());
  }
  os << (with_origin ? "better,worse,origin" : "better,worse") << '\n';
  for (const auto& p : pairs) {
    os << p.better << ',' << p.worse;
    if (with_origin) {
      os << ',' << (p.origin == PairOrigin::closure ? "closure" : "annotated");
    }
    os << '\n';
  }
}

PairFileIssues validate_pairs(const std::vector<PairAnnotation>& pairs) {
  PairFileIssues issues;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    if (p.better == p.worse) {
      issues.self_pairs.push_back(p.better);
      continue;
    }
    if (!seen.insert({p.better, p.worse}).second) {
      issues.duplicates.push_back(p.better + "," + p.worse);
    }
    if (seen.count({p.worse, p.better}) != 0) {
      issues.contradictions.push_back(p.better + "," + p.worse);
    }
  }
  return issues;
}

Matrix augment_noise(const Matrix& features, double sigma, Rng& rng) {
  if (sigma < 0.0) {
    throw NumericError("augment_noise: sigma must be non-negative");
  }
  Matrix out = features;
  if (sigma == 0.0) return out;
  for (double& v : out.data) v += sigma * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Transitive closure and splits

std::vector<PairAnnotation> transitive_closure(
    const std::vector<PairAnnotation>& pairs) {
  // Compact ids.
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> id_of;
  auto intern = [&](const std::string& name) {
    auto it = id_of.find(name);
    if (it != id_of.end()) return it->second;
    id_of.emplace(name, names.size());
    names.push_back(name);
    return names.size() - 1;
  };

  std::vector<std::set<std::size_t>> adj;
  std::set<std::pair<std::size_t, std::size_t>> annotated;
  for (const auto& p : pairs) {
    const std::size_t a = intern(p.better);
    const std::size_t b = intern(p.worse);
    if (adj.size() < names.size()) adj.resize(names.size());
    if (a == b) {
      throw DataError(DataError::Kind::cycle_detected,
                      "inconsistent annotations, cycle: " + p.better + " -> " +
                          p.better);
    }
    adj[a].insert(b);
    annotated.insert({a, b});
  }

  const std::size_t n = names.size();
  adj.resize(n);

  // DFS reachability per node; a node reaching itself is a cycle, which we
  // then reconstruct to name it in the error.
  std::vector<std::set<std::size_t>> reach(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack(adj[s].begin(), adj[s].end());
    std::vector<char> visited(n, 0);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (visited[u]) continue;
      visited[u] = 1;
      reach[s].insert(u);
      for (std::size_t v : adj[u]) {
        if (!visited[v]) stack.push_back(v);
      }
    }
    if (reach[s].count(s) != 0) {
      // Walk one shortest path s -> ... -> s via BFS parents.
      std::vector<std::size_t> parent(n, n);
      std::vector<std::size_t> queue;
      std::vector<char> seen(n, 0);
      for (std::size_t v : adj[s]) {
        if (!seen[v]) {
          seen[v] = 1;
          parent[v] = s;
          queue.push_back(v);
        }
      }
      for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const std::size_t u = queue[qi];
        if (u == s) break;
        for (std::size_t v : adj[u]) {
          if (!seen[v]) {
            seen[v] = 1;
            parent[v] = u;
            queue.push_back(v);
          }
        }
      }
      std::vector<std::string> cycle{names[s]};
      for (std::size_t u = parent[s]; u != s && u != n; u = parent[u]) {
        cycle.push_back(names[u]);
      }
      std::reverse(cycle.begin() + 1, cycle.end());
      std::string msg = "inconsistent annotations, cycle: " + names[s];
      for (std::size_t i = 1; i < cycle.size(); ++i) msg += " -> " + cycle[i];
      msg += " -> " + names[s];
      throw DataError(DataError::Kind::cycle_detected, msg);
    }
  }

  std::vector<PairAnnotation> out;
  for (const auto& [a, b] : annotated) {
    out.push_back({names[a], names[b], PairOrigin::annotated});
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b : reach[a]) {
      if (annotated.count({a, b}) == 0) {
        out.push_back({names[a], names[b], PairOrigin::closure});
      }
    }
  }
  return out;
}

SplitSpec make_split(const std::vector<std::string>& video_ids,
                     const std::vector<PairAnnotation>& pairs,
                     double test_fraction, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw DataError(DataError::Kind::empty_split,
                    "test_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = video_ids.size();
  const std::size_t n_test = static_cast<std::size_t>(
      std::floor(test_fraction * static_cast<double>(n) + 0.5));
  if (n_test == 0 || n_test == n) {
    throw DataError(DataError::Kind::empty_split,
                    "split leaves one side without videos");
  }

  std::vector<std::string> shuffled = video_ids;
  Rng rng(seed);
  rng.shuffle(shuffled);

  SplitSpec split;
  split.seed = seed;
  split.test_videos.assign(shuffled.begin(), shuffled.begin() + n_test);
  split.train_videos.assign(shuffled.begin() + n_test, shuffled.end());

  std::set<std::string> test_set(split.test_videos.begin(),
                                 split.test_videos.end());
  std::set<std::string> train_set(split.train_videos.begin(),
                                  split.train_videos.end());
  for (const auto& p : pairs) {
    const bool b_test = test_set.count(p.better) != 0;
    const bool w_test = test_set.count(p.worse) != 0;
    const bool b_train = train_set.count(p.better) != 0;
    const bool w_train = train_set.count(p.worse) != 0;
    if (b_test && w_test) {
      split.test_pairs.push_back(p);
    } else if (b_train && w_train) {
      split.train_pairs.push_back(p);
    } else {
      ++split.dropped_cross_pairs;
    }
  }
  if (split.train_pairs.empty() || split.test_pairs.empty()) {
    throw DataError(DataError::Kind::empty_split,
                    "split leaves one side without pairs");
  }
  return split;
}

std::vector<SplitSpec> make_kfold(const std::vector<std::string>& video_ids,
                                  const std::vector<PairAnnotation>& pairs,
                                  std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > video_ids.size()) {
    throw DataError(DataError::Kind::empty_split,
                    "fold count must lie in [2, #videos]");
  }
  std::vector<std::string> shuffled = video_ids;
  Rng rng(seed);
  rng.shuffle(shuffled);

  std::vector<std::vector<std::string>> folds(k);
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    folds[i % k].push_back(shuffled[i]);
  }

  std::vector<SplitSpec> splits;
  for (std::size_t f = 0; f < k; ++f) {
    SplitSpec split;
    split.seed = seed;
    split.test_videos = folds[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) continue;
      split.train_videos.insert(split.train_videos.end(), folds[g].begin(),
                                folds[g].end());
    }
    std::set<std::string> test_set(split.test_videos.begin(),
                                   split.test_videos.end());
    std::set<std::string> train_set(split.train_videos.begin(),
                                    split.train_videos.end());
    for (const auto& p : pairs) {
      const bool b_test = test_set.count(p.better) != 0;
      const bool w_test = test_set.count(p.worse) != 0;
      if (b_test && w_test) {
        split.test_pairs.push_back(p);
      } else if (train_set.count(p.better) != 0 &&
                 train_set.count(p.worse) != 0) {
        split.train_pairs.push_back(p);
      } else {
        ++split.dropped_cross_pairs;
      }
    }
    if (split.train_pairs.empty() || split.test_pairs.empty()) {
      throw DataError(DataError::Kind::empty_split,
                      "fold " + std::to_string(f) + " has a side without pairs");
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

}  // namespace rankatt
