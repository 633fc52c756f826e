#include "advstance/errors.hpp"
#include "advstance/metrics.hpp"
#include "advstance/rng.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>

using namespace advstance;

namespace {

constexpr Stance F = Stance::favor;
constexpr Stance A = Stance::against;
constexpr Stance N = Stance::none;

const std::vector<Stance> kGold{F, F, A, N};
const std::vector<Stance> kPred{F, A, A, N};

/// Per-class F1 by counting, independent of the library's confusion logic.
double f1_by_counting(const std::vector<Stance>& pred, const std::vector<Stance>& gold, Stance c) {
  double tp = 0;
  double fp = 0;
  double fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tp += (pred[i] == c && gold[i] == c) ? 1 : 0;
    fp += (pred[i] == c && gold[i] != c) ? 1 : 0;
    fn += (pred[i] != c && gold[i] == c) ? 1 : 0;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

}  // namespace

TEST_CASE("hand-computed four-example case") {
  const auto f1 = f1_per_class(kPred, kGold);
  CHECK(f1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(f1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(f1[2] == 1.0);
  CHECK(std::abs(f_avg(kPred, kGold) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(micro_f1(kPred, kGold) - 3.0 / 4.0) < 1e-12);
  CHECK(std::abs(macro_f1(kPred, kGold) - 7.0 / 9.0) < 1e-12);
  CHECK(std::abs(f_m(kPred, kGold) - 55.0 / 72.0) < 1e-12);
  CHECK(std::abs(f_avg(kPred, kGold, FavgClasses::all) - 7.0 / 9.0) < 1e-12);
}

TEST_CASE("perfect and disjoint predictions") {
  const std::vector<Stance> gold{F, A, A, N, F};
  CHECK(f_avg(gold, gold) == 1.0);
  CHECK(f_m(gold, gold) == 1.0);
  for (double f : f1_per_class(gold, gold)) CHECK(f == 1.0);

  const std::vector<Stance> all_favor(4, F);
  const std::vector<Stance> all_against(4, A);
  for (double f : f1_per_class(all_favor, all_against)) CHECK(f == 0.0);

  const std::vector<Stance> all_none(kGold.size(), N);
  CHECK(f_avg(all_none, kGold) == 0.0);
}

TEST_CASE("single-class golds predicted correctly") {
  const std::vector<Stance> gold(5, A);
  CHECK(micro_f1(gold, gold) == 1.0);
  CHECK(std::abs(macro_f1(gold, gold) - 1.0 / 3.0) < 1e-15);
  CHECK(std::abs(f_m(gold, gold) - 2.0 / 3.0) < 1e-15);
}

TEST_CASE("length mismatch is an error") {
  const std::vector<Stance> shorter{F};
  CHECK_THROWS_AS((void)f_avg(shorter, kGold), ShapeError);
  CHECK_THROWS_AS((void)f1_per_class(shorter, kGold), ShapeError);
}

TEST_CASE("random sequences agree with counting and stay in range") {
  Rng rng(17);
  for (int s = 0; s < 100; ++s) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<Stance> gold(n);
    std::vector<Stance> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = kAllStances[rng.below(3)];
      pred[i] = kAllStances[rng.below(3)];
    }
    const MetricReport r = score(pred, gold);
    double macro = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double want = f1_by_counting(pred, gold, kAllStances[c]);
      CHECK(std::abs(r.per_class_f1[c] - want) < 1e-12);
      macro += want / 3.0;
    }
    CHECK(std::abs(r.macro_f1 - macro) < 1e-12);
    CHECK(std::abs(r.f_m - (r.micro_f1 + r.macro_f1) / 2.0) < 1e-15);
    for (double v : {r.f_avg, r.f_m, r.micro_f1, r.macro_f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }

    // Consistent permutation of the pairs leaves every score unchanged.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Stance> gp(n);
    std::vector<Stance> pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      gp[i] = gold[order[i]];
      pp[i] = pred[order[i]];
    }
    const MetricReport q = score(pp, gp);
    CHECK(q.f_avg == r.f_avg);
    CHECK(q.f_m == r.f_m);
  }
}

TEST_CASE("mean report averages field-wise") {
  const std::vector<Stance> gold(3, F);
  const MetricReport a = score(kPred, kGold);
  const MetricReport b = score(gold, gold);
  const std::vector<MetricReport> both{a, b};
  const MetricReport m = mean_report(both);
  CHECK(m.f_avg == (a.f_avg + b.f_avg) / 2.0);
  CHECK(m.f_m == (a.f_m + b.f_m) / 2.0);
  CHECK(m.per_class_f1[2] == (a.per_class_f1[2] + b.per_class_f1[2]) / 2.0);
  CHECK(m.n_examples == 7);
  const std::vector<MetricReport> one{a};
  CHECK(mean_report(one).f_avg == a.f_avg);
}

TEST_CASE("F_avg class selection parses") {
  CHECK(parse_favg_classes("stance_bearing") == FavgClasses::stance_bearing);
  CHECK(parse_favg_classes("all") == FavgClasses::all);
  CHECK_THROWS_AS((void)parse_favg_classes("two"), ConfigError);
}
