#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "netwit/generators.hpp"
#include "netwit/l1_testers.hpp"
#include "netwit/random.hpp"

using namespace netwit;

namespace {

std::vector<std::size_t> draws_from(std::span<const double> w, std::size_t m, std::uint64_t seed) {
  VectorSampler s(w, seed);
  return draw_samples(s, m);
}

double rate(std::size_t hits, std::size_t n) { return static_cast<double>(hits) / static_cast<double>(n); }

}  // namespace

TEST(Quasinorm, Examples) {
  const std::vector<double> u4(4, 0.25), pm{1.0, 0.0, 0.0}, half{0.5, 0.5};
  EXPECT_NEAR(quasinorm_two_thirds(u4), 2.0, 1e-14);
  EXPECT_EQ(quasinorm_two_thirds(pm), 1.0);
  EXPECT_NEAR(quasinorm_two_thirds(half), std::sqrt(2.0), 1e-14);
}

TEST(Quasinorm, BoundsOnRandomVectors) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 60;
    const auto p = random_simplex_point(n, rng);
    const double v = quasinorm_two_thirds(p);
    EXPECT_GE(v, 1.0 - 1e-12);
    EXPECT_LE(v, std::sqrt(static_cast<double>(n)) * (1 + 1e-12));
  }
}

TEST(Truncation, ZeroEpsRemovesOnlyTheMax) {
  const std::vector<double> p{0.1, 0.6, 0.3};
  const auto t = truncate_minus_max_minus_eps(p, 0.0);
  EXPECT_EQ(t.remaining, (std::vector<double>{0.1, 0.0, 0.3}));
  EXPECT_EQ(t.max_index, 1u);
  EXPECT_EQ(t.removed_tail, 0.0);
  EXPECT_FALSE(t.exhausted);
}

TEST(Truncation, UniformFourQuarterEps) {
  const std::vector<double> p(4, 0.25);
  const auto t = truncate_minus_max_minus_eps(p, 0.25);
  std::vector<double> kept;
  for (double v : t.remaining)
    if (v > 0) kept.push_back(v);
  EXPECT_EQ(kept, (std::vector<double>{0.25, 0.25}));
  // Independent evaluation: (2 * 0.25^{2/3})^{3/2} = 2^{3/2} / 4 = sqrt(2) / 2.
  EXPECT_NEAR(quasinorm_two_thirds(t.remaining), std::sqrt(2.0) / 2.0, 1e-14);
}

TEST(Truncation, FractionalLastElement) {
  const std::vector<double> p{0.7, 0.2, 0.1};
  const auto t = truncate_minus_max_minus_eps(p, 0.15);
  EXPECT_EQ(t.remaining[0], 0.0);
  EXPECT_EQ(t.remaining[2], 0.0);
  EXPECT_NEAR(t.remaining[1], 0.15, 1e-15);
  EXPECT_NEAR(t.removed_max + t.removed_tail, 0.85, 1e-15);
}

TEST(Truncation, ExhaustedIsFlaggedNotThrown) {
  const std::vector<double> p{0.9, 0.1};
  const auto t = truncate_minus_max_minus_eps(p, 0.5);
  EXPECT_TRUE(t.exhausted);
  EXPECT_EQ(quasinorm_two_thirds(t.remaining), 0.0);
  EXPECT_THROW(truncate_minus_max_minus_eps(p, 1.0), Error);
  EXPECT_THROW(truncate_minus_max_minus_eps(p, -0.1), Error);
}

TEST(Truncation, RemovesExactlyMaxPlusEpsAndIsMonotone) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 30;
    const auto p = random_simplex_point(n, rng);
    const double maxv = *std::max_element(p.begin(), p.end());
    const double e1 = std::uniform_real_distribution<double>(0, 1 - maxv)(rng);
    const double e2 = std::uniform_real_distribution<double>(e1, 1 - maxv)(rng);
    const auto a = truncate_minus_max_minus_eps(p, e1);
    const auto b = truncate_minus_max_minus_eps(p, e2);
    const double kept = std::accumulate(a.remaining.begin(), a.remaining.end(), 0.0);
    EXPECT_NEAR(1.0 - kept, maxv + e1, 1e-12);
    EXPECT_EQ(a.removed_max, maxv);
    EXPECT_NEAR(a.removed_tail, e1, 1e-12);
    EXPECT_LE(quasinorm_two_thirds(b.remaining), quasinorm_two_thirds(a.remaining) + 1e-12);
  }
}

TEST(Truncation, ClassFormMatchesVectorForm) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    // Few distinct values with multiplicities, normalized.
    std::vector<MassClass> classes;
    std::vector<double> flat;
    const int k = 1 + static_cast<int>(rng() % 4);
    double total = 0;
    for (int c = 0; c < k; ++c) {
      const double v = 1.0 + static_cast<double>(rng() % 9);
      const double m = 1.0 + static_cast<double>(rng() % 5);
      classes.push_back({v, m});
      total += v * m;
    }
    for (auto& c : classes) {
      c.value /= total;
      for (int j = 0; j < static_cast<int>(c.multiplicity); ++j) flat.push_back(c.value);
    }
    const double maxv = *std::max_element(flat.begin(), flat.end());
    const double eps = std::uniform_real_distribution<double>(0, 0.999 * (1 - maxv))(rng);
    EXPECT_NEAR(truncated_quasinorm_classes(classes, eps),
                quasinorm_two_thirds(truncate_minus_max_minus_eps(flat, eps).remaining), 1e-12);
  }
}

TEST(Budgets, FormulaArithmetic) {
  L1TestInstance u{std::vector<double>(100, 0.01), 0.5, 1.0 / 3};
  EXPECT_EQ(required_samples_worst(u, 1.0), static_cast<std::uint64_t>(std::ceil(40.0 * std::log(3.0))));
  L1TestInstance pm{{1.0, 0.0, 0.0}, 0.5, 1.0 / 3};
  EXPECT_EQ(required_samples_instance(pm, 1.0), static_cast<std::uint64_t>(std::ceil(2.0 * std::log(3.0))));
}

TEST(Budgets, InstanceNeverExceedsWorstOnFixedSupport) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 50;
    L1TestInstance inst{random_simplex_point(n, rng), std::uniform_real_distribution<double>(0.05, 2)(rng), 0.2};
    // ||.||_{2/3} <= sqrt(n) and 1/e <= sqrt(n)/e^2 whenever e <= 2 <= ... ; c' = 2 covers n = 1.
    EXPECT_LE(required_samples_instance(inst), 2 * required_samples_worst(inst) + 1);
  }
}

TEST(Budgets, InsufficientSamplesThrow) {
  L1TestInstance u{std::vector<double>(16, 1.0 / 16), 0.5, 0.1};
  const auto batch = SampleBatch::from_draws(std::vector<std::size_t>(5, 0), 16);
  EXPECT_THROW(worst_case_l1_test(u, batch), InsufficientSamples);
  EXPECT_THROW(instance_optimal_l1_test(u, batch), InsufficientSamples);
}

TEST(SampleBatch, CountsSumToTotal) {
  const std::vector<std::size_t> d{0, 2, 2, 1, 2};
  const auto b = SampleBatch::from_draws(d, 4);
  EXPECT_EQ(b.counts, (std::vector<std::uint64_t>{1, 1, 3, 0}));
  EXPECT_EQ(b.total, 5u);
  EXPECT_THROW(SampleBatch::from_draws(d, 2), SizeMismatch);
}

TEST(L1Testers, WorstCaseCompletenessAndPaninskiSoundness) {
  CalibrationCache cache;
  const auto [p, q] = paninski_pair(40, 0.5);
  L1TestInstance inst{p, 0.5, 0.1};
  // The budget constant is unspecified; 4 gives the worst-case statistic ample power here.
  const L1Settings st{4.0, 2000, &cache};
  const std::size_t m = required_samples_worst(inst, st.budget_constant);
  std::size_t acc = 0, rej = 0;
  const std::size_t trials = 300;
  for (std::size_t k = 0; k < trials; ++k) {
    acc += worst_case_l1_test(inst, SampleBatch::from_draws(draws_from(p, m, derive_seed(1, 0, k)), 40), st) ==
           Verdict::accept;
    rej += worst_case_l1_test(inst, SampleBatch::from_draws(draws_from(q, m, derive_seed(2, 0, k)), 40), st) ==
           Verdict::reject;
  }
  const double margin = 3 * std::sqrt(0.1 * 0.9 / trials);
  EXPECT_GE(rate(acc, trials), 0.9 - margin);
  EXPECT_GE(rate(rej, trials), 0.9 - margin);
}

TEST(L1Testers, DisjointSupportAtMaximalProximityRejects) {
  std::vector<double> p(10, 0.0);
  p[0] = p[1] = 0.5;
  L1TestInstance inst{p, 2.0, 0.1};
  const std::size_t m = required_samples_worst(inst);
  const auto batch = SampleBatch::from_draws(std::vector<std::size_t>(m, 7), 10);
  EXPECT_EQ(worst_case_l1_test(inst, batch), Verdict::reject);
  EXPECT_EQ(instance_optimal_l1_test(inst, SampleBatch::from_draws(std::vector<std::size_t>(m, 7), 10)),
            Verdict::reject);
}

TEST(L1Testers, InstancePointMassUsesFewSamplesAndAccepts) {
  std::vector<double> p(50, 0.0);
  p[3] = 1.0;
  L1TestInstance inst{p, 0.3, 0.1};
  const auto mi = required_samples_instance(inst), mw = required_samples_worst(inst);
  EXPECT_LT(10 * mi, mw);
  const auto batch = SampleBatch::from_draws(std::vector<std::size_t>(mi, 3), 50);
  EXPECT_EQ(instance_optimal_l1_test(inst, batch), Verdict::accept);
}

TEST(L1Testers, InstanceUniformBudgetWithinConstantOfWorst) {
  L1TestInstance inst{std::vector<double>(64, 1.0 / 64), 0.4, 0.1};
  const double ratio =
      static_cast<double>(required_samples_instance(inst)) / static_cast<double>(required_samples_worst(inst));
  EXPECT_GT(ratio, 0.5);
  EXPECT_LE(ratio, 1.0);
}

TEST(L1Testers, InstanceRejectsFarFromHalfConcentrated) {
  CalibrationCache cache;
  std::vector<double> p(21, 0.5 / 20), q(21);
  p[0] = 0.5;
  // Move 0.25 of mass from the heavy element onto the light ones: L1 = 0.5.
  for (std::size_t j = 0; j < 21; ++j) q[j] = j == 0 ? 0.25 : p[j] + 0.25 / 20;
  L1TestInstance inst{p, 0.5, 0.1};
  // Most of the deviation sits on the dropped heaviest element, so the retained core
  // sees only a spread-out shift; a larger constant is needed for power.
  const L1Settings st{16.0, 2000, &cache};
  const std::size_t m = required_samples_instance(inst, st.budget_constant);
  std::size_t acc = 0, rej = 0;
  const std::size_t trials = 300;
  for (std::size_t k = 0; k < trials; ++k) {
    acc += instance_optimal_l1_test(inst, SampleBatch::from_draws(draws_from(p, m, derive_seed(3, 0, k)), 21),
                                    st) == Verdict::accept;
    rej += instance_optimal_l1_test(inst, SampleBatch::from_draws(draws_from(q, m, derive_seed(4, 0, k)), 21),
                                    st) == Verdict::reject;
  }
  const double margin = 3 * std::sqrt(0.1 * 0.9 / trials);
  EXPECT_GE(rate(acc, trials), 0.9 - margin);
  EXPECT_GE(rate(rej, trials), 0.9 - margin);
}

TEST(L1Testers, PermutationInvariance) {
  Rng rng(9);
  CalibrationCache cache;
  const L1Settings st{1.0, 500, &cache};
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 12;
    const auto p = random_simplex_point(n, rng);
    const auto q = random_simplex_point(n, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(n);
    for (std::size_t j = 0; j < n; ++j) pp[perm[j]] = p[j];
    const auto d = draws_from(q, 200, 77 + t);
    std::vector<std::size_t> dp(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) dp[k] = perm[d[k]];
    for (auto flavor : {L1Flavor::worst_case, L1Flavor::instance_optimal}) {
      L1TestInstance a{p, 0.4, 0.2}, b{pp, 0.4, 0.2};
      const auto da = l1_decide(a, flavor, SampleBatch::from_draws(d, n), st);
      const auto db = l1_decide(b, flavor, SampleBatch::from_draws(dp, n), st);
      EXPECT_EQ(da.verdict, db.verdict);
      EXPECT_EQ(da.thresholds.chi, db.thresholds.chi);
      EXPECT_EQ(da.thresholds.tail, db.thresholds.tail);
      EXPECT_NEAR(da.statistic.chi, db.statistic.chi, 1e-9 * (1 + std::abs(da.statistic.chi)));
      EXPECT_EQ(da.statistic.tail, db.statistic.tail);
    }
  }
}

TEST(Calibration, CacheIsKeyedAndReused) {
  CalibrationCache cache;
  const std::vector<double> p(8, 0.125);
  L1TestInstance inst{p, 0.5, 0.2};
  const L1Settings st{1.0, 300, &cache};
  const auto d = draws_from(p, 100, 5);
  const auto first = l1_decide(inst, L1Flavor::worst_case, SampleBatch::from_draws(d, 8), st);
  EXPECT_EQ(cache.size(), 1u);
  const auto second = l1_decide(inst, L1Flavor::worst_case, SampleBatch::from_draws(d, 8), st);
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(first.thresholds.chi, second.thresholds.chi);
  l1_decide(inst, L1Flavor::instance_optimal, SampleBatch::from_draws(d, 8), st);
  EXPECT_EQ(cache.size(), 2u);
  const auto direct = calibrate_thresholds(p, 0.5, 0.2, L1Flavor::worst_case, 100, 300);
  EXPECT_EQ(direct.chi, first.thresholds.chi);
}

TEST(Median, SingleRepetitionIsIdentity) {
  const std::vector<double> p(6, 1.0 / 6);
  L1TestInstance inst{p, 0.5, 0.2};
  CalibrationCache cache;
  const L1Settings st{1.0, 300, &cache};
  auto base = [&](const SampleBatch& b) { return l1_decide(inst, L1Flavor::worst_case, b, st).verdict; };
  auto med = amplify_median(base, 1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = draws_from(p, 60, s);
    EXPECT_EQ(med(d, 6), base(SampleBatch::from_draws(d, 6)));
  }
}

TEST(Median, AlwaysAcceptStaysAccept) {
  auto med = amplify_median([](const SampleBatch&) { return Verdict::accept; }, 7);
  const std::vector<std::size_t> d(70, 0);
  EXPECT_EQ(med(d, 1), Verdict::accept);
  EXPECT_THROW(amplify_median([](const SampleBatch&) { return Verdict::accept; }, 4), Error);
}

TEST(Median, FifteenRepetitionsDriveFailureBelowFivePercent) {
  // Base tester: rejects when its slice's single draw is 0, which happens w.p. 1/4;
  // a majority of 15 then errs w.p. P(Bin(15, 1/4) >= 8) ~ 0.017.
  const std::vector<double> w{1.0 / 4, 3.0 / 4};
  auto base = [](const SampleBatch& b) { return b.counts[0] > 0 ? Verdict::reject : Verdict::accept; };
  auto med = amplify_median(base, 15);
  std::size_t failures = 0;
  for (std::uint64_t t = 0; t < 1000; ++t)
    failures += med(draws_from(w, 15, derive_seed(8, 0, t)), 2) == Verdict::reject;
  EXPECT_LT(rate(failures, 1000), 0.05);
}
