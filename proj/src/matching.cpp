#include "tensorbeat/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "tensorbeat/error.hpp"

namespace tensorbeat {

using Eigen::Index;

Autocorrelation autocorrelate(const Eigen::Ref<const Eigen::VectorXd>& series) {
  const Index n = series.size();
  if (n < 2) throw Error("autocorrelate: need at least 2 samples");
  Autocorrelation ac;
  ac.values.resize(2 * n - 1);
  for (Index lag = 0; lag < n; ++lag) {
    const double r = series.head(n - lag).dot(series.tail(n - lag));
    ac.values[n - 1 + lag] = r;
    ac.values[n - 1 - lag] = r;
  }
  const double zero_lag = ac.values[n - 1];
  if (zero_lag > 0.0) {
    ac.values /= zero_lag;
  } else {
    ac.values.setZero();
    ac.zero_input = true;
  }
  return ac;
}

Eigen::VectorXd downsample(const Eigen::Ref<const Eigen::VectorXd>& series, int factor) {
  if (factor < 1) throw Error("downsample: factor must be >= 1");
  const Index out_len = (series.size() + factor - 1) / factor;
  Eigen::VectorXd out(out_len);
  for (Index i = 0; i < out_len; ++i) out[i] = series[i * factor];
  return out;
}

DtwResult dtw_distance(const Eigen::Ref<const Eigen::VectorXd>& p,
                       const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (p.size() != q.size())
    throw Error("dtw_distance: length mismatch (" + std::to_string(p.size()) + " vs " +
                std::to_string(q.size()) + ")");
  const Index n = p.size();
  if (n < 1) throw Error("dtw_distance: empty sequences");

  Eigen::MatrixXd cost(n, n);
  for (Index m = 0; m < n; ++m) {
    for (Index k = 0; k < n; ++k) {
      const double local = std::abs(p[m] - q[k]);
      double best;
      if (m == 0 && k == 0) best = 0.0;
      else if (m == 0) best = cost(0, k - 1);
      else if (k == 0) best = cost(m - 1, 0);
      else best = std::min({cost(m - 1, k), cost(m, k - 1), cost(m - 1, k - 1)});
      cost(m, k) = local + best;
    }
  }

  DtwResult res;
  res.distance = cost(n - 1, n - 1);
  res.path.total_cost = res.distance;
  Index m = n - 1, k = n - 1;
  res.path.steps.emplace_back(m, k);
  while (m > 0 || k > 0) {
    if (m == 0) {
      --k;
    } else if (k == 0) {
      --m;
    } else {
      const double diag = cost(m - 1, k - 1), up = cost(m - 1, k), left = cost(m, k - 1);
      if (diag <= up && diag <= left) {
        --m;
        --k;
      } else if (up <= left) {
        --m;
      } else {
        --k;
      }
    }
    res.path.steps.emplace_back(m, k);
  }
  std::reverse(res.path.steps.begin(), res.path.steps.end());
  return res;
}

PreferenceTable PreferenceTable::from_distances(const Eigen::Ref<const Eigen::MatrixXd>& distances) {
  if (distances.rows() != distances.cols()) throw Error("preferences: distance matrix not square");
  const int n = int(distances.rows());
  if (n < 2) throw Error("preferences: need at least 2 signals");
  PreferenceTable t;
  t.distances = distances;
  t.lists.resize(std::size_t(n));
  for (int s = 0; s < n; ++s) {
    auto& list = t.lists[std::size_t(s)];
    for (int o = 0; o < n; ++o)
      if (o != s) list.push_back(o);
    std::stable_sort(list.begin(), list.end(),
                     [&](int l, int r) { return distances(s, l) < distances(s, r); });
  }
  return t;
}

PreferenceTable PreferenceTable::from_lists(std::vector<std::vector<int>> lists) {
  const int n = int(lists.size());
  if (n < 2) throw Error("preferences: need at least 2 signals");
  for (int s = 0; s < n; ++s) {
    const auto& list = lists[std::size_t(s)];
    std::vector<bool> seen(std::size_t(n), false);
    if (int(list.size()) != n - 1)
      throw Error("preferences: list " + std::to_string(s) + " must rank all other signals");
    for (int o : list) {
      if (o < 0 || o >= n || o == s || seen[std::size_t(o)])
        throw Error("preferences: list " + std::to_string(s) + " is not a permutation of the others");
      seen[std::size_t(o)] = true;
    }
  }
  PreferenceTable t;
  t.lists = std::move(lists);
  return t;
}

PreferenceTable build_preferences(const std::vector<Eigen::VectorXd>& signals, int downsample_factor) {
  const int n = int(signals.size());
  if (n < 2) throw Error("build_preferences: need at least 2 signals");
  std::vector<Eigen::VectorXd> reduced;
  reduced.reserve(signals.size());
  for (const auto& s : signals) reduced.push_back(downsample(autocorrelate(s).values, downsample_factor));
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      dist(a, b) = dist(b, a) = dtw_distance(reduced[std::size_t(a)], reduced[std::size_t(b)]).distance;
  return PreferenceTable::from_distances(dist);
}

std::vector<int> Matching::partner() const {
  std::vector<int> out(pairs.size() * 2, -1);
  for (const auto& [a, b] : pairs) {
    out[std::size_t(a)] = b;
    out[std::size_t(b)] = a;
  }
  return out;
}

namespace {

class RoommateTable {
 public:
  explicit RoommateTable(const std::vector<std::vector<int>>& lists) : lists_(lists) {}

  std::vector<int>& list(int s) { return lists_[std::size_t(s)]; }
  int size() const { return int(lists_.size()); }

  void remove_pair(int a, int b) {
    std::erase(lists_[std::size_t(a)], b);
    std::erase(lists_[std::size_t(b)], a);
  }

  /// Deletes, symmetrically, everyone ranked below `keep` on s's list.
  void truncate_after(int s, int keep) {
    auto& l = list(s);
    const auto it = std::find(l.begin(), l.end(), keep);
    if (it == l.end()) return;
    const std::vector<int> dropped(it + 1, l.end());
    for (int d : dropped) remove_pair(s, d);
  }

  bool any_empty() const {
    return std::any_of(lists_.begin(), lists_.end(), [](const auto& l) { return l.empty(); });
  }

 private:
  std::vector<std::vector<int>> lists_;
};

// Phase 1: everyone proposes down their list; a receiver holds the best
// proposal so far and drops everyone it ranks below the proposer.
bool proposal_phase(RoommateTable& table) {
  const int n = table.size();
  std::vector<int> holder(std::size_t(n), -1);
  std::vector<int> free_queue(static_cast<std::size_t>(n));
  std::iota(free_queue.begin(), free_queue.end(), 0);
  std::size_t head = 0;
  while (head < free_queue.size()) {
    const int x = free_queue[head++];
    if (table.list(x).empty()) return false;
    const int y = table.list(x).front();
    const int previous = holder[std::size_t(y)];
    holder[std::size_t(y)] = x;
    table.truncate_after(y, x);
    if (previous >= 0 && previous != x) free_queue.push_back(previous);
  }
  return !table.any_empty();
}

// Phase 2: find an all-or-nothing cycle starting from the first signal whose
// list still has two or more entries, eliminate it, rescan from the start.
bool rotation_phase(RoommateTable& table) {
  const int n = table.size();
  while (true) {
    int start = -1;
    for (int s = 0; s < n; ++s)
      if (table.list(s).size() > 1) {
        start = s;
        break;
      }
    if (start < 0) return true;

    std::vector<int> ps{start};
    std::vector<int> qs;
    std::size_t cycle_begin = 0;
    while (true) {
      const auto& pl = table.list(ps.back());
      if (pl.size() < 2) return false;
      const int q = pl[1];
      if (table.list(q).empty()) return false;
      const int next = table.list(q).back();
      qs.push_back(q);
      const auto seen = std::find(ps.begin(), ps.end(), next);
      if (seen != ps.end()) {
        cycle_begin = std::size_t(seen - ps.begin());
        break;
      }
      ps.push_back(next);
    }
    // Each p_i moves on to q_i, who then drops everyone it ranks below p_i.
    for (std::size_t i = cycle_begin; i < ps.size(); ++i) table.truncate_after(qs[i], ps[i]);
    if (table.any_empty()) return false;
  }
}

Matching greedy_pairing(const PreferenceTable& prefs) {
  const int n = prefs.size();
  std::vector<std::tuple<double, int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      double w;
      if (prefs.distances.size() > 0) {
        w = 0.5 * (prefs.distances(a, b) + prefs.distances(b, a));
      } else {
        const auto& la = prefs.lists[std::size_t(a)];
        const auto& lb = prefs.lists[std::size_t(b)];
        w = double(std::find(la.begin(), la.end(), b) - la.begin()) +
            double(std::find(lb.begin(), lb.end(), a) - lb.begin());
      }
      edges.emplace_back(w, a, b);
    }
  std::sort(edges.begin(), edges.end());
  std::vector<bool> used(std::size_t(n), false);
  Matching m;
  m.stability = MatchStability::kFallback;
  for (const auto& [w, a, b] : edges) {
    if (used[std::size_t(a)] || used[std::size_t(b)]) continue;
    used[std::size_t(a)] = used[std::size_t(b)] = true;
    m.pairs.emplace_back(a, b);
  }
  return m;
}

}  // namespace

std::optional<Matching> stable_roommates(const PreferenceTable& prefs) {
  const int n = prefs.size();
  if (n < 2 || n % 2 != 0) throw Error("stable_roommate_match: need an even number (>= 2) of signals");
  RoommateTable table(prefs.lists);
  if (!proposal_phase(table) || !rotation_phase(table)) return std::nullopt;

  Matching m;
  for (int s = 0; s < n; ++s) {
    const int t = table.list(s).front();
    if (table.list(t).front() != s) return std::nullopt;
    if (s < t) m.pairs.emplace_back(s, t);
  }
  return m;
}

Matching stable_roommate_match(const PreferenceTable& prefs) {
  if (auto m = stable_roommates(prefs)) return *m;
  return greedy_pairing(prefs);
}

}  // namespace tensorbeat
