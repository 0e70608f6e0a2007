#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "rankatt/matrix.hpp"
#include "rankatt/rng.hpp"

namespace rankatt {

/// One video's precomputed per-segment feature matrix (T x D).
struct VideoRecord {
  std::string id;
  std::string task;
  Matrix features;
  std::string source_path;

  std::size_t segment_count() const { return features.rows; }
  std::size_t feature_dim() const { return features.cols; }
};

enum class PairOrigin { annotated, closure };

/// Ordered skill comparison: `better` displays more skill than `worse`.
struct PairAnnotation {
  std::string better;
  std::string worse;
  PairOrigin origin = PairOrigin::annotated;
};

/// Immutable collection of videos with id lookup.
struct Dataset {
  std::vector<VideoRecord> videos;
  std::unordered_map<std::string, std::size_t> index;

  void add(VideoRecord record);
  bool contains(const std::string& id) const { return index.count(id) != 0; }
  const VideoRecord& at(const std::string& id) const;
  std::vector<std::string> ids() const;
};

// Feature file: magic "RSKF", u32 version=1, u32 T, u32 D, then T*D
// little-endian f64 row-major.
void save_features(const Matrix& features, const std::filesystem::path& path);
VideoRecord load_features(const std::filesystem::path& path);

// Manifest: plain text, one line per video: "id,task,relative_path".
// Paths are relative to the manifest's directory.
Dataset load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const Dataset& dataset,
                   const std::filesystem::path& manifest_path,
                   const std::vector<std::string>& relative_paths);

// Pair file: header "better,worse" then one comma-separated id pair per
// line; an optional third "origin" column (annotated|closure) round-trips
// closure output.
std::vector<PairAnnotation> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::vector<PairAnnotation>& pairs,
                const std::filesystem::path& path, bool with_origin = false);

/// Issues found by the pair-file validator; files are assumed pre-filtered
/// by annotator agreement, so these are treated as data errors upstream.
struct PairFileIssues {
  std::vector<std::string> duplicates;      // same ordered pair twice
  std::vector<std::string> contradictions;  // both (a,b) and (b,a)
  std::vector<std::string> self_pairs;      // (a,a)
  bool clean() const {
    return duplicates.empty() && contradictions.empty() && self_pairs.empty();
  }
};
PairFileIssues validate_pairs(const std::vector<PairAnnotation>& pairs);

/// Adds independent N(0, sigma^2) noise per entry. Training-time only; the
/// evaluation path never calls this.
Matrix augment_noise(const Matrix& features, double sigma, Rng& rng);

/// Annotated pairs plus every pair implied by reachability in the
/// better->worse digraph (origin=closure), deduplicated. Throws
/// DataError(cycle_detected) naming one cycle if the annotations are
/// inconsistent.
std::vector<PairAnnotation> transitive_closure(
    const std::vector<PairAnnotation>& pairs);

struct SplitSpec {
  std::vector<std::string> train_videos;
  std::vector<std::string> test_videos;
  std::vector<PairAnnotation> train_pairs;
  std::vector<PairAnnotation> test_pairs;
  std::size_t dropped_cross_pairs = 0;
  std::uint64_t seed = 0;
};

/// Seeded video partition; pairs follow the side holding both endpoints and
/// cross pairs are dropped (counted), keeping train and test videos fully
/// disjoint.
SplitSpec make_split(const std::vector<std::string>& video_ids,
                     const std::vector<PairAnnotation>& pairs,
                     double test_fraction, std::uint64_t seed);

/// k seeded folds; fold i uses partition i as the test side.
std::vector<SplitSpec> make_kfold(const std::vector<std::string>& video_ids,
                                  const std::vector<PairAnnotation>& pairs,
                                  std::size_t k, std::uint64_t seed);

}  // namespace rankatt
