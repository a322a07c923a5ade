#pragma once

// Pairing of the 2R decomposed signals into per-person pairs: autocorrelation,
// DTW distances between downsampled autocorrelations, and stable roommate
// matching over the resulting preference lists.

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace tensorbeat {

struct Autocorrelation {
  Eigen::VectorXd values;  // lags -(N-1) .. N-1, lag 0 at index N-1
  bool zero_input = false;  // left unnormalised when set

  Eigen::Index zero_lag_index() const noexcept { return (values.size() - 1) / 2; }
};

/// Full biased autocorrelation normalised to 1 at lag 0.
Autocorrelation autocorrelate(const Eigen::Ref<const Eigen::VectorXd>& series);

/// Every factor-th sample starting at index 0.
Eigen::VectorXd downsample(const Eigen::Ref<const Eigen::VectorXd>& series, int factor);

struct WarpingPath {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> steps;
  double total_cost = 0.0;
};

struct DtwResult {
  double distance = 0.0;
  WarpingPath path;
};

/// Absolute-difference DTW with the full step set {(1,0), (0,1), (1,1)} and
/// both ends pinned. Backtracking prefers the diagonal, then the vertical
/// (m-1, n) step.
DtwResult dtw_distance(const Eigen::Ref<const Eigen::VectorXd>& p,
                       const Eigen::Ref<const Eigen::VectorXd>& q);

struct PreferenceTable {
  /// lists[s]: every other index, most preferred first.
  std::vector<std::vector<int>> lists;
  /// Symmetric distance matrix behind the lists; may be empty when the table
  /// was given directly as lists.
  Eigen::MatrixXd distances;

  int size() const noexcept { return int(lists.size()); }

  /// Ascending distance, ties to the lower index.
  static PreferenceTable from_distances(const Eigen::Ref<const Eigen::MatrixXd>& distances);
  /// Validates that each list is a permutation of the other indices.
  static PreferenceTable from_lists(std::vector<std::vector<int>> lists);
};

/// autocorrelate -> downsample -> pairwise DTW -> preference lists.
PreferenceTable build_preferences(const std::vector<Eigen::VectorXd>& signals,
                                  int downsample_factor = 10);

enum class MatchStability { kStable, kFallback };

struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (lo, hi), sorted by lo
  MatchStability stability = MatchStability::kStable;

  /// partner()[s] is the index matched with s.
  std::vector<int> partner() const;
};

/// Two-phase stable roommate matching (proposals with symmetric rejections,
/// then rotation elimination). nullopt when no stable matching exists.
std::optional<Matching> stable_roommates(const PreferenceTable& prefs);

/// stable_roommates(), falling back to greedy minimum-distance pairing
/// (stability = kFallback) when no stable matching exists.
Matching stable_roommate_match(const PreferenceTable& prefs);

}  // namespace tensorbeat
