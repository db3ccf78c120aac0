#pragma once

#include <cstddef>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "netwit/metric_space.hpp"
#include "netwit/nets.hpp"

namespace netwit {

/// Leaf mass aggregated at the level-i nodes of the tree (p-tilde_i).
struct ProjectedDistribution {
  int level = 0;
  std::vector<double> mass;  // indexed by position in N_i
};

/// Tree metric built from a net hierarchy.
///
/// Leaves are the points of X; level i holds a fresh node for every center of N_i.
/// Leaf x hangs below (l, pi_l(x)) with weight 2^l, and node (i, c) below
/// (i+1, pi_{i+1}(c)) with weight 2^{i+1}. Node ids: leaves first, then levels l..r in
/// order, each in center order.
class TreeEmbedding {
 public:
  explicit TreeEmbedding(const NetHierarchy& h)
      : space_(h.space()), l_(h.l()), r_(h.r()) {
    const std::size_t levels = h.level_count();
    leaf_parent_ = h.level(l_).assign;
    level_parent_.resize(levels - 1);
    level_size_.resize(levels);
    offset_.resize(levels);
    std::size_t next = space_.size();
    for (int i = l_; i <= r_; ++i) {
      level_size_[i - l_] = h.level(i).size();
      offset_[i - l_] = next;
      next += level_size_[i - l_];
      if (i < r_) level_parent_[i - l_] = h.parent(i);
    }
    node_count_ = next;
  }

  int l() const noexcept { return l_; }
  int r() const noexcept { return r_; }
  const FiniteMetricSpace& space() const noexcept { return space_; }
  std::size_t leaf_count() const noexcept { return space_.size(); }
  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t level_size(int i) const { return level_size_.at(i - l_); }
  std::size_t node_id(int i, std::size_t pos) const { return offset_.at(i - l_) + pos; }

  /// Position in N_i of the level-i ancestor of leaf x.
  std::size_t ancestor(std::size_t x, int i) const {
    check_level(i);
    std::size_t a = leaf_parent_[x];
    for (int k = l_; k < i; ++k) a = level_parent_[k - l_][a];
    return a;
  }

  /// Ancestors of every leaf at level i (one pass, reusing the level below).
  std::vector<std::size_t> ancestors(int i) const {
    check_level(i);
    std::vector<std::size_t> a = leaf_parent_;
    for (int k = l_; k < i; ++k)
      for (auto& v : a) v = level_parent_[k - l_][v];
    return a;
  }

  /// Path length between two leaves; 2 * (2^l + ... + 2^j) with j the LCA level.
  double distance(std::size_t x, std::size_t y) const {
    if (x == y) return 0.0;
    std::size_t ax = leaf_parent_[x], ay = leaf_parent_[y];
    double half = pow2(l_);
    int i = l_;
    while (ax != ay) {
      ax = level_parent_[i - l_][ax];
      ay = level_parent_[i - l_][ay];
      ++i;
      half += pow2(i);
    }
    return 2.0 * half;
  }

  ProjectedDistribution project(const Distribution& p, int i) const {
    if (!p.space().same_as(space_)) throw SpaceMismatch("distribution is not on the embedded space");
    check_level(i);
    std::vector<double> mass(level_size_[0], 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) mass[leaf_parent_[x]] += p[x];
    for (int k = l_; k < i; ++k) {
      std::vector<double> up(level_size_[k + 1 - l_], 0.0);
      for (std::size_t c = 0; c < mass.size(); ++c) up[level_parent_[k - l_][c]] += mass[c];
      mass = std::move(up);
    }
    return {i, std::move(mass)};
  }

  /// W_{d_T}(p, q) = 2^l L1(p, q) + sum_{i=l}^{r-1} 2^{i+1} L1(p~_i, q~_i).
  double wasserstein(const Distribution& p, const Distribution& q) const {
    require_same_space(p, q);
    if (!p.space().same_as(space_)) throw SpaceMismatch("distribution is not on the embedded space");
    double total = pow2(l_) * l1_distance(p.mass(), q.mass());
    std::vector<double> pm(level_size_[0], 0.0), qm(level_size_[0], 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) {
      pm[leaf_parent_[x]] += p[x];
      qm[leaf_parent_[x]] += q[x];
    }
    for (int i = l_; i < r_; ++i) {
      total += pow2(i + 1) * l1_distance(pm, qm);
      std::vector<double> pu(level_size_[i + 1 - l_], 0.0), qu(pu.size(), 0.0);
      for (std::size_t c = 0; c < pm.size(); ++c) {
        pu[level_parent_[i - l_][c]] += pm[c];
        qu[level_parent_[i - l_][c]] += qm[c];
      }
      pm = std::move(pu);
      qm = std::move(qu);
    }
    return total;
  }

  /// Leaf-to-leaf tree metric as a dense space (test and oracle use only).
  FiniteMetricSpace leaf_metric() const {
    const std::size_t n = leaf_count();
    std::vector<double> m(n * n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) m[a * n + b] = distance(a, b);
    return FiniteMetricSpace::from_matrix(std::move(m), n);
  }

  /// Indented dump, one node per line: `<node> parent=<id> weight=<w>`, children
  /// nested under their parent, root first.
  void write_text(std::ostream& os) const {
    std::vector<std::vector<std::size_t>> children(node_count_);
    for (std::size_t x = 0; x < leaf_count(); ++x) children[node_id(l_, leaf_parent_[x])].push_back(x);
    for (int i = l_; i < r_; ++i)
      for (std::size_t c = 0; c < level_size_[i - l_]; ++c)
        children[node_id(i + 1, level_parent_[i - l_][c])].push_back(node_id(i, c));
    const std::size_t root = node_id(r_, 0);
    os << "# netwit tree l=" << l_ << " r=" << r_ << " leaves=" << leaf_count()
       << " nodes=" << node_count_ << "\n";
    write_node(os, root, 0, children, root);
  }

  std::string to_text() const {
    std::ostringstream os;
    write_text(os);
    return os.str();
  }

 private:
  void check_level(int i) const {
    if (i < l_ || i > r_) throw LevelOutOfRange("level " + std::to_string(i) + " outside the tree");
  }

  std::string node_name(std::size_t id) const {
    if (id < leaf_count()) return "leaf " + std::to_string(id);
    for (int i = r_; i >= l_; --i)
      if (id >= offset_[i - l_]) return "L" + std::to_string(i) + ":" + std::to_string(id - offset_[i - l_]);
    return "?";
  }

  void write_node(std::ostream& os, std::size_t id, int depth,
                  const std::vector<std::vector<std::size_t>>& children, std::size_t root) const {
    os << std::string(2 * static_cast<std::size_t>(depth), ' ') << node_name(id);
    if (id == root) {
      os << " root\n";
    } else {
      std::size_t parent;
      double weight;
      if (id < leaf_count()) {
        parent = node_id(l_, leaf_parent_[id]);
        weight = pow2(l_);
      } else {
        int i = r_;
        while (id < offset_[i - l_]) --i;
        parent = node_id(i + 1, level_parent_[i - l_][id - offset_[i - l_]]);
        weight = pow2(i + 1);
      }
      os << " parent=" << parent << " weight=" << weight << "\n";
    }
    for (std::size_t ch : children[id]) write_node(os, ch, depth + 1, children, root);
  }

  FiniteMetricSpace space_;
  int l_, r_;
  std::vector<std::size_t> leaf_parent_;
  std::vector<std::vector<std::size_t>> level_parent_;
  std::vector<std::size_t> level_size_;
  std::vector<std::size_t> offset_;
  std::size_t node_count_ = 0;
};

inline TreeEmbedding embed(const NetHierarchy& h) { return TreeEmbedding(h); }

}  // namespace netwit
