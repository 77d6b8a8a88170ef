#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "migh/error.hpp"
#include "migh/ingest.hpp"
#include "migh/redistribute.hpp"
#include "test_support.hpp"

using namespace migh;

namespace {

const EntityId J("S01"), A("S02"), B("S03");
const OriginRef U = OriginRef::pseudo(OriginKind::Unclassifiable);

double unclassifiable_mass(const MigrationTable& t) {
  double s = 0;
  for (const auto& [key, row] : t.rows())
    if (key.origin.kind == OriginKind::Unclassifiable) s += row.sum();
  return s;
}

}  // namespace

TEST_CASE("fixed weight vector ignores lambda") {
  for (double lambda : {0.0, 0.4, 3.0}) {
    const WeightVector w = build_weight_vector(lambda, WeightMode::PaperFixed);
    CHECK(w.w == std::array<double, 5>{0.35, 0.30, 0.20, 0.10, 0.05});
    CHECK(is_valid(w));
  }
}

TEST_CASE("normalized exponential weights") {
  const WeightVector flat = build_weight_vector(0.0, WeightMode::NormalizedExponential);
  for (double v : flat.w) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

  for (int k = 0; k <= 20; ++k) {
    const double lambda = 0.1 * k;
    const WeightVector w = build_weight_vector(lambda, WeightMode::NormalizedExponential);
    // Oracle: closed form evaluated directly.
    double norm = 0;
    for (int b = 1; b <= 5; ++b) norm += std::exp(-lambda * (b - 1));
    double sum = 0;
    for (int b = 1; b <= 5; ++b) {
      CHECK(w.w[b - 1] == doctest::Approx(std::exp(-lambda * (b - 1)) / norm).epsilon(1e-14));
      sum += w.w[b - 1];
      if (b > 1) CHECK(w.w[b - 1] <= w.w[b - 2]);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(w.w[4] > 0);
    CHECK(is_valid(w));
  }
  CHECK_THROWS_AS(build_weight_vector(-0.1, WeightMode::NormalizedExponential), PreconditionError);
  CHECK_THROWS_AS(build_weight_vector(std::nan(""), WeightMode::NormalizedExponential), PreconditionError);
  WeightVector bad;
  bad.w = {0.1, 0.2, 0.3, 0.2, 0.2};
  CHECK_FALSE(is_valid(bad));
  bad.w = {0.5, 0.5, 0, 0, 0};
  CHECK_FALSE(is_valid(bad));
}

TEST_CASE("unclassifiable mass splits in proportion to classified flows") {
  MigrationTable t(2011);
  t.set_count(J, OriginRef::interstate(A), DurationBin::LessThan1, 10);
  t.set_count(J, OriginRef::interstate(B), DurationBin::LessThan1, 30);
  t.set_count(J, U, DurationBin::LessThan1, 4);
  const MigrationTable r = redistribute_unclassifiable(synthesize_totals(t));
  CHECK(r.count(J, OriginRef::interstate(A), DurationBin::LessThan1) == 11);
  CHECK(r.count(J, OriginRef::interstate(B), DurationBin::LessThan1) == 33);
  CHECK(r.count(J, U, DurationBin::LessThan1) == 0);
  CHECK(r.find(J, U) != nullptr);
  CHECK(*r.find(J, OriginRef::interstate(A))->total == 11);
  CHECK(r.destination_total(J) == 44);
}

TEST_CASE("unclassifiable bins fall back to row totals when a bin is empty") {
  MigrationTable t(2011);
  t.set_count(J, OriginRef::interstate(A), DurationBin::LessThan1, 10);
  t.set_count(J, OriginRef::interstate(B), DurationBin::OneToFour, 30);
  t.set_count(J, U, DurationBin::TwentyPlus, 8);
  const MigrationTable r = redistribute_unclassifiable(t);
  CHECK(r.count(J, OriginRef::interstate(A), DurationBin::TwentyPlus) == 2);
  CHECK(r.count(J, OriginRef::interstate(B), DurationBin::TwentyPlus) == 6);
  CHECK(r.destination_total(J) == 48);
}

TEST_CASE("zero unclassifiable mass is a bit-exact no-op") {
  test::Gen g(8);
  for (int trial = 0; trial < 20; ++trial) {
    const MigrationTable t = synthesize_totals(test::random_table(g, {.unclassifiable_probability = 0}));
    CHECK(redistribute_unclassifiable(t) == t);
    CHECK(redistribute_unclassifiable(t, UnclassifiableGranularity::RowTotal) == t);
  }
}

TEST_CASE("empty classified in-flow with unclassifiable mass aborts") {
  MigrationTable t(2011);
  t.set_count(J, OriginRef::interstate(A), DurationBin::LessThan1, 0);
  t.set_count(J, U, DurationBin::LessThan1, 3);
  CHECK_THROWS_AS(redistribute_unclassifiable(t), PreconditionError);
}

TEST_CASE("property: proportionality, absorption and conservation") {
  test::Gen g(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const MigrationTable t = synthesize_totals(test::random_table(g, {.entities = g.integer(3, 8)}));
    for (auto gran : {UnclassifiableGranularity::PerBin, UnclassifiableGranularity::RowTotal}) {
      const MigrationTable r = redistribute_unclassifiable(t, gran);
      CHECK(unclassifiable_mass(r) == 0);
      for (const auto& dest : t.destinations()) {
        // Classified inflow gains exactly U_j.
        double before = 0, after = 0, u = 0;
        for (const auto& [key, row] : t.rows()) {
          if (key.destination != dest) continue;
          (key.origin.is_classified() ? before : u) += row.sum();
        }
        for (const auto& [key, row] : r.rows())
          if (key.destination == dest && key.origin.is_classified()) after += row.sum();
        CHECK(after == doctest::Approx(before + u).epsilon(1e-12));
        CHECK(r.destination_total(dest) == doctest::Approx(t.destination_total(dest)).epsilon(1e-12));
      }
      // Cell ratios within a destination and bin are preserved.
      for (const auto& [key, row] : t.rows()) {
        if (!key.origin.is_classified()) continue;
        const Row* out = r.find(key.destination, key.origin);
        for (const auto& [key2, row2] : t.rows()) {
          if (key2.destination != key.destination || !key2.origin.is_classified() || key2 == key) continue;
          const Row* out2 = r.find(key2.destination, key2.origin);
          for (std::size_t b = 0; b < kStoredBins; ++b) {
            if (row.bins[b] > 0 && row2.bins[b] > 0) {
              const double lhs = out->bins[b] / out2->bins[b];
              const double rhs = row.bins[b] / row2.bins[b];
              CHECK(std::abs(lhs - rhs) <= 1e-9 * rhs);
            }
          }
          if (gran == UnclassifiableGranularity::RowTotal && row.sum() > 0 && row2.sum() > 0) {
            CHECK(std::abs(out->sum() / out2->sum() - row.sum() / row2.sum()) <= 1e-9 * (row.sum() / row2.sum()));
          }
        }
      }
      CHECK(redistribute_unclassifiable(r, gran) == r);
    }
  }
}

TEST_CASE("duration step adds w_b times the not-stated mass") {
  MigrationTable t(2011);
  const OriginRef o = OriginRef::interstate(A);
  t.set_count(J, o, DurationBin::NotStated, 100);
  const WeightVector w = build_weight_vector(0.4, WeightMode::PaperFixed);
  const MigrationTable r = redistribute_duration(synthesize_totals(t), w);
  const double expected[] = {35, 30, 20, 10, 5};
  for (std::size_t b = 0; b < kStatedBins; ++b) CHECK(r.count(J, o, bin_at(b)) == doctest::Approx(expected[b]));
  CHECK(r.count(J, o, DurationBin::NotStated) == 0);
  CHECK(*r.find(J, o)->total == doctest::Approx(100));

  MigrationTable none(2011);
  none.set_count(J, o, DurationBin::OneToFour, 9);
  CHECK(redistribute_duration(none, w) == none);
}

TEST_CASE("property: duration step conserves each row and zeroes not-stated") {
  test::Gen g(77);
  for (int trial = 0; trial < 60; ++trial) {
    const MigrationTable t = synthesize_totals(test::random_table(g));
    const double lambda = g.uniform(0, 2);
    for (auto mode : {WeightMode::PaperFixed, WeightMode::NormalizedExponential}) {
      const WeightVector w = build_weight_vector(lambda, mode);
      const MigrationTable r = redistribute_duration(t, w);
      for (const auto& [key, row] : t.rows()) {
        const Row* out = r.find(key.destination, key.origin);
        REQUIRE(out);
        CHECK(out->get(DurationBin::NotStated) == 0);
        double increments = 0;
        for (std::size_t b = 0; b < kStatedBins; ++b) increments += out->bins[b] - row.bins[b];
        CHECK(increments == doctest::Approx(row.get(DurationBin::NotStated)).epsilon(1e-9));
        CHECK(out->sum() == doctest::Approx(row.sum()).epsilon(1e-12));
      }
      CHECK(redistribute_duration(r, w) == r);
    }
  }
}

TEST_CASE("both orders conserve the grand total") {
  test::Gen g(99);
  const WeightVector w = build_weight_vector(0.4, WeightMode::PaperFixed);
  for (int trial = 0; trial < 30; ++trial) {
    const MigrationTable t = synthesize_totals(test::random_table(g));
    const MigrationTable ud = redistribute_duration(redistribute_unclassifiable(t), w);
    const MigrationTable du = redistribute_unclassifiable(redistribute_duration(t, w));
    CHECK(ud.grand_total() == doctest::Approx(du.grand_total()).epsilon(1e-12));
    CHECK(conservation_check(t, ud, ConservationLevel::PerDestination).pass);
    CHECK(conservation_check(t, du, ConservationLevel::PerDestination).pass);
    CHECK(conservation_check(t, du, ConservationLevel::Grand).pass);
  }
}

TEST_CASE("conservation check") {
  test::Gen g(5);
  const MigrationTable t = synthesize_totals(test::random_table(g));
  for (auto level : {ConservationLevel::Grand, ConservationLevel::PerDestination}) {
    const ConservationResult self = conservation_check(t, t, level, true);
    CHECK(self.pass);
    CHECK(self.max_residual == 0);
  }
  MigrationTable mutant = t;
  Row& row = mutant.mutable_rows().begin()->second;
  row.bins[0] += 1;
  row.refresh_total();
  for (auto level : {ConservationLevel::Grand, ConservationLevel::PerDestination}) {
    const ConservationResult res = conservation_check(t, mutant, level, true);
    CHECK_FALSE(res.pass);
    CHECK(res.max_residual == doctest::Approx(1));
  }
  // Relative tolerance: one person in a large destination passes only at a loose tolerance.
  CHECK_FALSE(conservation_check(t, mutant, ConservationLevel::PerDestination, false, 1e-6).pass);
  CHECK(conservation_check(t, mutant, ConservationLevel::PerDestination, false, 1.0).pass);

  // Moving mass between destinations conserves the grand total only.
  MigrationTable moved = t;
  Row* giver = nullptr;
  Row* taker = nullptr;
  for (auto& [key, r] : moved.mutable_rows()) {
    if (!taker) taker = &r;
    else if (key.destination != moved.rows().begin()->first.destination && r.bins[0] >= 2) {
      giver = &r;
      break;
    }
  }
  REQUIRE(giver);
  giver->bins[0] -= 2;
  taker->bins[0] += 2;
  giver->refresh_total();
  taker->refresh_total();
  CHECK(conservation_check(t, moved, ConservationLevel::Grand).pass);
  CHECK_FALSE(conservation_check(t, moved, ConservationLevel::PerDestination).pass);
}
