// Builds a net hierarchy on a small grid, embeds it into a tree, compares the tree
// distance with exact optimal transport, and runs both testers once on a null and a
// certified-far instance.

#include <cstdio>

#include "netwit/netwit.hpp"

using namespace netwit;

int main() {
  const auto grid = make_grid(2, 0.125, PointMetric::linf);
  const double eps = 0.2;
  const auto h = build_hierarchy(grid.space, eps);
  const TreeEmbedding tree(h);
  std::printf("grid: %zu points, levels %d..%d\n", grid.space.size(), h.l(), h.r());
  for (int i = h.l(); i <= h.r(); ++i) std::printf("  |N_%d| = %zu\n", i, h.level(i).size());

  const auto p = Distribution::uniform(grid.space);
  const auto far = far_instance(p, eps);
  std::printf("far instance: W_d(p, q) = %.4f, W_T(p, q) = %.4f\n", far.wasserstein,
              tree.wasserstein(p, far.q));

  WitConfig cfg;
  cfg.epsilon = eps;
  for (WitMode mode : {WitMode::worst, WitMode::instance}) {
    VectorSampler same(p, 1), shifted(far.q, 2);
    const auto a = wit_test(mode, h, tree, p, same, cfg);
    const auto b = wit_test(mode, h, tree, p, shifted, cfg);
    std::printf("%-8s m=%-6llu q=p: %s   q far: %s\n", to_string(mode).c_str(),
                static_cast<unsigned long long>(a.total_samples), to_string(a.verdict).c_str(),
                to_string(b.verdict).c_str());
  }
  return 0;
}
