#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "migh/csv.hpp"
#include "migh/error.hpp"
#include "migh/indexing.hpp"
#include "migh/ingest.hpp"
#include "test_support.hpp"

using namespace migh;

namespace {

const EntityRegistry& reg() {
  static const EntityRegistry r = test::india_registry();
  return r;
}

const std::string kHeader = "decade,destination,origin_kind,origin_name,duration_bin,count\n";

MigrationTable parse(const std::string& body, ParseOptions o = {}) {
  std::istringstream in(kHeader + body);
  return parse_table(in, reg(), o);
}

const EntityId MH("MH"), UP("UP"), BR("BR");

}  // namespace

TEST_CASE("a long-layout row maps straight into the model") {
  const MigrationTable t = parse("2011,Maharashtra,interstate,Uttar Pradesh,1-4,123\n");
  CHECK(t.decade() == 2011);
  CHECK(t.count(MH, OriginRef::interstate(UP), DurationBin::OneToFour) == 123);
  CHECK(t.destinations() == std::set<EntityId>{MH});
  CHECK(t.record_count() == 1);
}

TEST_CASE("aliases and quoted fields are canonicalized") {
  const MigrationTable t = parse(
      "2011,\"Orissa\",interstate,Delhi,lt1,4\n"
      "2011, orissa ,international,,20plus,2\n");
  const EntityId od("OD");
  CHECK(t.count(od, OriginRef::interstate(EntityId("DL")), DurationBin::LessThan1) == 4);
  CHECK(t.count(od, OriginRef::pseudo(OriginKind::International), DurationBin::TwentyPlus) == 2);
}

TEST_CASE("malformed input is reported with its line") {
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Uttar Pradesh,1-4,-5\n"), NegativeCount);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Uttar Pradesh,1-4,abc\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Uttar Pradesh,2-3,1\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,elsewhere,,lt1,1\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,,lt1,1\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,international,Bihar,lt1,1\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Maharashtra,lt1,1\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Bihar,lt1\n"), ParseError);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Bihar,lt1,1\n2011,Maharashtra,interstate,Bihar,lt1,2\n"),
                  ParseError);
  CHECK_THROWS_AS(parse("2011,Atlantis,interstate,Bihar,lt1,1\n"), UnknownName);
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Bihar,lt1,1\n", {.decade = 2001}), ParseError);
  // Every destination needs positive inflow.
  CHECK_THROWS_AS(parse("2011,Maharashtra,interstate,Bihar,lt1,0\n"), ParseError);
  try {
    parse("2011,Maharashtra,interstate,Bihar,lt1,1\n2011,Bihar,interstate,Goa,lt1,-1\n");
    FAIL("expected NegativeCount");
  } catch (const NegativeCount& e) {
    CHECK(e.line() == 3);
    CHECK(e.code() == ExitCode::Parse);
  }
}

TEST_CASE("totals are synthesized from stated bins and not-stated") {
  MigrationTable t(2011);
  const OriginRef o = OriginRef::interstate(UP);
  const double v[] = {10, 20, 30, 40, 50};
  for (std::size_t b = 0; b < kStatedBins; ++b) t.set_count(MH, o, bin_at(b), v[b]);
  t.set_count(MH, o, DurationBin::NotStated, 0);
  const MigrationTable s = synthesize_totals(t);
  REQUIRE(s.find(MH, o)->total.has_value());
  CHECK(*s.find(MH, o)->total == 150);
  CHECK(s.has_totals());
  CHECK(synthesize_totals(s) == s);

  MigrationTable declared = t;
  declared.set_total(MH, o, 151);
  CHECK_THROWS_AS(synthesize_totals(declared), TotalMismatch);
  CHECK_NOTHROW(synthesize_totals(declared, 1.0));
  CHECK(*synthesize_totals(declared, 1.0).find(MH, o)->total == 151);
}

TEST_CASE("total synthesis adds one record per (destination, origin)") {
  test::Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MigrationTable t = test::random_table(g, {.entities = 5});
    const MigrationTable s = synthesize_totals(t);
    // Independent recount: number of distinct (destination, origin) keys.
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [key, _] : t.rows())
      keys.insert({key.destination.value, std::string(to_string(key.origin.kind)) + key.origin.entity.value});
    CHECK(s.record_count() == t.record_count() + keys.size());
    CHECK(synthesize_totals(s) == s);
  }
}

TEST_CASE("canonical CSV round-trips at full precision") {
  test::Gen g(11);
  const EntityRegistry sreg = synth_registry(6, {1991, 2001, 2011});
  for (int trial = 0; trial < 25; ++trial) {
    MigrationTable t = test::random_table(g, {.entities = 6});
    if (trial % 2) t = synthesize_totals(t);
    std::ostringstream out;
    write_table(out, t, sreg);
    std::istringstream in(out.str());
    const MigrationTable back = parse_table(in, sreg);
    CHECK(back == t);
    std::ostringstream again;
    write_table(again, back, sreg);
    CHECK(again.str() == out.str());
  }
}

TEST_CASE("wide layout converts to the same model") {
  std::istringstream wide(
      "decade,destination,origin_kind,origin_name,lt1,1-4,5-9,10-19,20plus,not_stated,total\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,1,2,3,4,5,6,21\n"
      "2011,Maharashtra,unclassifiable,,0,0,0,0,0,7,7\n");
  const MigrationTable w = parse_wide_table(wide, reg());
  const MigrationTable l = parse(
      "2011,Maharashtra,interstate,Uttar Pradesh,lt1,1\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,1-4,2\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,5-9,3\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,10-19,4\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,20plus,5\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,not_stated,6\n"
      "2011,Maharashtra,interstate,Uttar Pradesh,total,21\n"
      "2011,Maharashtra,unclassifiable,,lt1,0\n"
      "2011,Maharashtra,unclassifiable,,1-4,0\n"
      "2011,Maharashtra,unclassifiable,,5-9,0\n"
      "2011,Maharashtra,unclassifiable,,10-19,0\n"
      "2011,Maharashtra,unclassifiable,,20plus,0\n"
      "2011,Maharashtra,unclassifiable,,not_stated,7\n"
      "2011,Maharashtra,unclassifiable,,total,7\n");
  CHECK(w == l);

  test::TempDir dir("ingest");
  {
    std::ofstream f(dir / "wide.csv");
    f << "decade,destination,origin_kind,origin_name,lt1,1-4,5-9,10-19,20plus,not_stated\n"
         "2011,Maharashtra,interstate,Uttar Pradesh,1,2,3,4,5,6\n";
  }
  const MigrationTable auto_read = read_any_table(dir / "wide.csv", reg());
  CHECK(auto_read.count(MH, OriginRef::interstate(UP), DurationBin::NotStated) == 6);
  std::istringstream bad("decade,destination,origin_kind,origin_name,lt1,bogus\n");
  CHECK_THROWS_AS(parse_wide_table(bad, reg()), ParseError);
}

TEST_CASE("category and duration shares") {
  MigrationTable t(2011);
  t.set_count(MH, OriginRef::interstate(UP), DurationBin::LessThan1, 7);
  CHECK_THROWS_AS(category_shares(t), PreconditionError);
  t = synthesize_totals(t);
  const CategoryShares c = category_shares(t);
  CHECK(c.interstate == 1.0);
  CHECK(c.intrastate + c.international + c.unclassifiable == 0.0);
  const DurationShares d = duration_shares(t);
  CHECK(d.less_than_1 == 1.0);
  CHECK(d.one_to_twenty + d.over_twenty + d.not_stated == 0.0);

  test::Gen g(21);
  for (int trial = 0; trial < 30; ++trial) {
    const MigrationTable r = synthesize_totals(test::random_table(g));
    const CategoryShares cs = category_shares(r);
    const DurationShares ds = duration_shares(r);
    CHECK(cs.intrastate + cs.interstate + cs.international + cs.unclassifiable == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ds.less_than_1 + ds.one_to_twenty + ds.over_twenty + ds.not_stated == doctest::Approx(1.0).epsilon(1e-9));

    // Oracle: brute-force share of unclassifiable and not-stated mass.
    double total = 0, unclassifiable = 0, not_stated = 0;
    for (const auto& [key, row] : r.rows()) {
      for (double v : row.bins) total += v;
      if (key.origin.kind == OriginKind::Unclassifiable) unclassifiable += row.sum();
      not_stated += row.get(DurationBin::NotStated);
    }
    CHECK(cs.unclassifiable == doctest::Approx(unclassifiable / total).epsilon(1e-12));
    CHECK(ds.not_stated == doctest::Approx(not_stated / total).epsilon(1e-12));
  }
}

TEST_CASE("shares are invariant under index remapping") {
  MigrationTable t(1991);
  t.set_count(EntityId("AP"), OriginRef::interstate(EntityId("BR")), DurationBin::LessThan1, 4);
  t.set_count(EntityId("AP"), OriginRef::pseudo(OriginKind::Unclassifiable), DurationBin::NotStated, 1);
  t.set_count(EntityId("BR"), OriginRef::interstate(EntityId("AN")), DurationBin::TwentyPlus, 5);
  const IndexedTable enc = encode_indices(t, reg().index_map(1991));
  const RemapResult r = remap_indices(enc, reg().index_map(1991), reg().index_map(2001));
  const MigrationTable back = decode_indices(r.table, reg().index_map(2001));
  const CategoryShares a = category_shares(synthesize_totals(t));
  const CategoryShares b = category_shares(synthesize_totals(back));
  CHECK(a.unclassifiable == b.unclassifiable);
  CHECK(a.interstate == b.interstate);
  CHECK(duration_shares(synthesize_totals(t)).not_stated == duration_shares(synthesize_totals(back)).not_stated);
}

TEST_CASE("largest-remainder rounding preserves destination sums") {
  MigrationTable t(2011);
  t.set_count(MH, OriginRef::interstate(UP), DurationBin::LessThan1, 0.4);
  t.set_count(MH, OriginRef::interstate(UP), DurationBin::OneToFour, 0.4);
  t.set_count(MH, OriginRef::interstate(BR), DurationBin::LessThan1, 0.2);
  const MigrationTable r = round_largest_remainder(t);
  CHECK(r.destination_total(MH) == 1);
  // Equal remainders break toward the earlier cell in canonical order.
  CHECK(r.count(MH, OriginRef::interstate(BR), DurationBin::LessThan1) == 0);
  CHECK(r.count(MH, OriginRef::interstate(UP), DurationBin::LessThan1) == 1);
  CHECK(r.count(MH, OriginRef::interstate(UP), DurationBin::OneToFour) == 0);

  test::Gen g(3);
  for (int trial = 0; trial < 50; ++trial) {
    const MigrationTable x = synthesize_totals(test::random_table(g));
    const MigrationTable y = round_largest_remainder(x);
    for (const auto& dest : x.destinations()) {
      CHECK(y.destination_total(dest) == std::round(x.destination_total(dest)));
    }
    for (const auto& [key, row] : y.rows()) {
      const Row* orig = x.find(key.destination, key.origin);
      for (std::size_t b = 0; b < kStoredBins; ++b) {
        CHECK(row.bins[b] == std::floor(row.bins[b]));
        CHECK(std::abs(row.bins[b] - orig->bins[b]) < 1.0);
      }
      if (row.total) CHECK(*row.total == row.sum());
    }
  }
}

TEST_CASE("csv helpers") {
  CHECK(csv::split_line("a,\"b,c\",\"d\"\"e\",") == std::vector<std::string>{"a", "b,c", "d\"e", ""});
  CHECK(csv::escape("x,y") == "\"x,y\"");
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::format_double(0.1) == "0.1");
  CHECK(csv::format_double(0.0) == "0");
  CHECK(csv::format_double(2e6) == "2000000");
  CHECK(csv::format_double(1.5e-9) == "1.5e-09");
  CHECK(csv::format_fixed(1.5504, 3) == "1.550");
  CHECK(csv::parse_double(" 2.5 ") == 2.5);
  CHECK_FALSE(csv::parse_double("2.5x").has_value());
  CHECK(csv::parse_int("42") == 42);
  CHECK_FALSE(csv::parse_int("4.2").has_value());
  test::Gen g(1);
  for (int k = 0; k < 200; ++k) {
    const double v = std::ldexp(g.uniform(0, 1), g.integer(-30, 40));
    CHECK(csv::parse_double(csv::format_double(v)) == v);
  }
}
