#include "tevim/error.hpp"
#include "tevim/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tevim::detail {

namespace {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

using Tree = std::vector<TreeNode>;

double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

double evaluate(const Tree& tree, const Eigen::MatrixXd& X, Eigen::Index row) {
  int node = 0;
  while (tree[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& t = tree[static_cast<std::size_t>(node)];
    node = X(row, t.feature) <= t.threshold ? t.left : t.right;
  }
  return tree[static_cast<std::size_t>(node)].value;
}

class BoostedTreesPredictor final : public Predictor {
 public:
  BoostedTreesPredictor(double base, double learning_rate, std::vector<Tree> trees, bool logistic)
      : base_(base), learning_rate_(learning_rate), trees_(std::move(trees)), logistic_(logistic) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd score = Eigen::VectorXd::Constant(X.rows(), base_);
    for (const auto& tree : trees_)
      for (Eigen::Index i = 0; i < X.rows(); ++i) score[i] += learning_rate_ * evaluate(tree, X, i);
    if (logistic_) score = score.unaryExpr(&sigmoid);
    return score;
  }

 private:
  double base_;
  double learning_rate_;
  std::vector<Tree> trees_;
  bool logistic_;
};

struct NodeStats {
  double grad = 0.0;
  double hess = 0.0;
  Eigen::Index count = 0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Grows one tree level by level. For every level, each feature's presorted
// row list is scanned once and split statistics are accumulated for all
// open nodes simultaneously.
class TreeGrower {
 public:
  TreeGrower(const Eigen::MatrixXd& X, const std::vector<std::vector<Eigen::Index>>& sorted, int max_depth,
             int min_leaf, double reg)
      : X_(X), sorted_(sorted), max_depth_(max_depth), min_leaf_(min_leaf), reg_(reg) {}

  Tree grow(const Eigen::VectorXd& grad, const Eigen::VectorXd& hess, std::vector<int>& node_of) {
    const auto n = X_.rows();
    Tree tree(1);
    std::vector<NodeStats> stats(1);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (node_of[static_cast<std::size_t>(i)] < 0) continue;
      stats[0].grad += grad[i];
      stats[0].hess += hess[i];
      ++stats[0].count;
    }
    std::vector<int> open{0};
    for (int depth = 0; depth < max_depth_ && !open.empty(); ++depth) {
      std::vector<SplitCandidate> best(tree.size());
      std::vector<char> is_open(tree.size(), 0);
      for (int node : open)
        if (stats[static_cast<std::size_t>(node)].count >= 2 * min_leaf_) is_open[static_cast<std::size_t>(node)] = 1;

      for (std::size_t f = 0; f < sorted_.size(); ++f) scan_feature(static_cast<int>(f), grad, hess, node_of, stats,
                                                                    is_open, best);

      std::vector<int> next_open;
      std::vector<int> left_of(tree.size(), -1);
      for (int node : open) {
        const auto& b = best[static_cast<std::size_t>(node)];
        if (b.feature < 0 || b.gain <= 0.0) continue;
        const int left = static_cast<int>(tree.size());
        tree.push_back({});
        tree.push_back({});
        stats.push_back({});
        stats.push_back({});
        auto& parent = tree[static_cast<std::size_t>(node)];
        parent.feature = b.feature;
        parent.threshold = b.threshold;
        parent.left = left;
        parent.right = left + 1;
        left_of[static_cast<std::size_t>(node)] = left;
        next_open.push_back(left);
        next_open.push_back(left + 1);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const int node = node_of[static_cast<std::size_t>(i)];
        if (node < 0 || left_of[static_cast<std::size_t>(node)] < 0) continue;
        const auto& parent = tree[static_cast<std::size_t>(node)];
        const int child = X_(i, parent.feature) <= parent.threshold ? parent.left : parent.right;
        node_of[static_cast<std::size_t>(i)] = child;
        auto& s = stats[static_cast<std::size_t>(child)];
        s.grad += grad[i];
        s.hess += hess[i];
        ++s.count;
      }
      open = std::move(next_open);
    }
    for (std::size_t k = 0; k < tree.size(); ++k)
      if (tree[k].feature < 0) tree[k].value = -stats[k].grad / (stats[k].hess + reg_);
    return tree;
  }

 private:
  double score(double g, double h) const { return g * g / (h + reg_); }

  void scan_feature(int f, const Eigen::VectorXd& grad, const Eigen::VectorXd& hess, const std::vector<int>& node_of,
                    const std::vector<NodeStats>& stats, const std::vector<char>& is_open,
                    std::vector<SplitCandidate>& best) const {
    std::vector<NodeStats> left(stats.size());
    std::vector<double> last(stats.size(), 0.0);
    std::vector<char> seen(stats.size(), 0);
    for (Eigen::Index i : sorted_[static_cast<std::size_t>(f)]) {
      const int node = node_of[static_cast<std::size_t>(i)];
      if (node < 0 || !is_open[static_cast<std::size_t>(node)]) continue;
      const auto k = static_cast<std::size_t>(node);
      const double x = X_(i, f);
      auto& l = left[k];
      if (seen[k] && x > last[k] && l.count >= min_leaf_ && stats[k].count - l.count >= min_leaf_) {
        const double gr = stats[k].grad - l.grad;
        const double hr = stats[k].hess - l.hess;
        const double gain = score(l.grad, l.hess) + score(gr, hr) - score(stats[k].grad, stats[k].hess);
        if (gain > best[k].gain) {
          double mid = 0.5 * (last[k] + x);
          if (!(mid < x)) mid = last[k];
          best[k] = {gain, f, mid};
        }
      }
      l.grad += grad[i];
      l.hess += hess[i];
      ++l.count;
      last[k] = x;
      seen[k] = 1;
    }
  }

  const Eigen::MatrixXd& X_;
  const std::vector<std::vector<Eigen::Index>>& sorted_;
  int max_depth_;
  int min_leaf_;
  double reg_;
};

}  // namespace

std::shared_ptr<const Predictor> fit_boosted_trees(const BoostedTreesSpec& spec, const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y, bool logistic, std::uint64_t seed) {
  const auto n = X.rows();
  std::vector<std::vector<Eigen::Index>> sorted(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& order = sorted[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, f) < X(b, f); });
  }

  double base = y.mean();
  if (logistic) {
    const double p = std::clamp(base, 1e-6, 1 - 1e-6);
    base = std::log(p / (1 - p));
  }
  const double reg = logistic ? 1e-6 : 0.0;
  const auto sample_size = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(spec.subsample_fraction * static_cast<double>(n))));

  Eigen::VectorXd score = Eigen::VectorXd::Constant(n, base);
  Eigen::VectorXd grad(n), hess(n);
  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(spec.rounds));
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::vector<int> node_of(static_cast<std::size_t>(n));
  TreeGrower grower(X, sorted, spec.max_depth, spec.min_leaf, reg);

  for (int round = 0; round < spec.rounds; ++round) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (logistic) {
        const double p = sigmoid(score[i]);
        grad[i] = p - y[i];
        hess[i] = std::max(p * (1 - p), 1e-12);
      } else {
        grad[i] = score[i] - y[i];
        hess[i] = 1.0;
      }
    }
    if (sample_size < n) {
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
      // Partial Fisher-Yates: the first sample_size entries are the sample.
      for (Eigen::Index k = 0; k < sample_size; ++k) {
        std::uniform_int_distribution<Eigen::Index> draw(k, n - 1);
        const auto pick = draw(rng);
        std::swap(rows[static_cast<std::size_t>(k)], rows[static_cast<std::size_t>(pick)]);
      }
      std::fill(node_of.begin(), node_of.end(), -1);
      for (Eigen::Index k = 0; k < sample_size; ++k) node_of[static_cast<std::size_t>(rows[static_cast<std::size_t>(k)])] = 0;
    } else {
      std::fill(node_of.begin(), node_of.end(), 0);
    }
    Tree tree = grower.grow(grad, hess, node_of);
    for (Eigen::Index i = 0; i < n; ++i) score[i] += spec.learning_rate * evaluate(tree, X, i);
    trees.push_back(std::move(tree));
  }
  return std::make_shared<BoostedTreesPredictor>(base, spec.learning_rate, std::move(trees), logistic);
}

}  // namespace tevim::detail
