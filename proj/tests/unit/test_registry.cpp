#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "migh/error.hpp"
#include "migh/indexing.hpp"
#include "migh/ingest.hpp"
#include "migh/registry.hpp"
#include "test_support.hpp"

using namespace migh;

namespace {

const EntityRegistry& reg() {
  static const EntityRegistry r = test::india_registry();
  return r;
}

}  // namespace

TEST_CASE("alias pairs resolve to one entity") {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"Orissa", "Odisha"},
      {"Delhi", "NCT of Delhi"},
      {"A&N Islands", "Andaman and Nicobar Islands"},
      {"Pondicherry", "Puducherry"},
      {"Uttaranchal", "Uttarakhand"},
  };
  for (const auto& [old_name, new_name] : pairs) {
    CAPTURE(old_name);
    const EntityId a = reg().canonicalize_name(old_name);
    const EntityId b = reg().canonicalize_name(new_name);
    CHECK(a == b);
    CHECK(reg().name_of(a) == new_name);
  }
  CHECK(reg().canonicalize_name("Odisha") == EntityId("OD"));
}

TEST_CASE("matching folds case, whitespace and ampersands") {
  CHECK(reg().canonicalize_name("  orissa ") == EntityId("OD"));
  CHECK(reg().canonicalize_name("A & N   ISLANDS") == EntityId("AN"));
  CHECK(reg().canonicalize_name("a and n islands") == EntityId("AN"));
  CHECK(reg().canonicalize_name("Jammu & Kashmir") == EntityId("JK"));
  CHECK(normalize_alias("  A&N\tIslands ") == "a and n islands");
}

TEST_CASE("unknown names are rejected") {
  CHECK_THROWS_AS(reg().canonicalize_name("Atlantis"), UnknownName);
  CHECK_FALSE(reg().try_canonicalize("Orisa").has_value());
  try {
    reg().canonicalize_name("Atlantis");
  } catch (const Error& e) {
    CHECK(e.code() == ExitCode::Registry);
  }
}

TEST_CASE("canonicalization is idempotent over every alias") {
  for (const Entity& e : reg().entities()) {
    CHECK(e.aliases.contains(e.canonical_name));
    for (const auto& alias : e.aliases) {
      const EntityId id = reg().canonicalize_name(alias);
      CHECK(id == e.id);
      CHECK(reg().canonicalize_name(reg().name_of(id)) == id);
    }
  }
}

TEST_CASE("decade index maps") {
  CHECK(reg().resolve_index(1, 1991) == reg().canonicalize_name("Andhra Pradesh"));
  CHECK(reg().resolve_index(1, 2001) == reg().canonicalize_name("Jammu and Kashmir"));
  CHECK(reg().resolve_index(1, 2011) == reg().canonicalize_name("Jammu and Kashmir"));
  CHECK(reg().index_map(1991).size() == 32);
  CHECK(reg().index_map(2001).size() == 35);
  CHECK_THROWS_AS(reg().resolve_index(99, 1991), UnknownIndex);
  CHECK_THROWS_AS(reg().resolve_index(1, 1981), RegistryError);

  for (Decade d : {1991, 2001, 2011}) {
    const IndexMap& m = reg().index_map(d);
    for (const auto& [idx, id] : m.pairs()) {
      CHECK(m.index(id) == idx);
      CHECK(reg().entity(id).valid_in(d));
    }
  }
}

TEST_CASE("later states are invalid in 1991 and carry parents") {
  for (const char* name : {"Uttarakhand", "Jharkhand", "Chhattisgarh"}) {
    CAPTURE(name);
    const Entity& e = reg().entity(reg().canonicalize_name(name));
    CHECK_FALSE(e.valid_in(1991));
    CHECK(e.valid_in(2001));
    REQUIRE(e.parent.has_value());
    CHECK(reg().entity(*e.parent).valid_in(1991));
  }
  CHECK(reg().valid_entities(1991).size() == 32);
  CHECK(reg().valid_entities(2011).size() == 35);
  const auto children = reg().children_of(reg().canonicalize_name("Bihar"));
  REQUIRE(children.size() == 1);
  CHECK(children[0] == reg().canonicalize_name("Jharkhand"));
}

TEST_CASE("registry construction rejects broken catalogues") {
  Entity a{EntityId("A"), "Alpha", {"Alpha", "Shared"}, {2001}, std::nullopt};
  Entity b{EntityId("B"), "Beta", {"Beta", "shared"}, {2001}, std::nullopt};
  CHECK_THROWS_AS(EntityRegistry({a, b}), RegistryError);

  Entity c{EntityId("C"), "Gamma", {"Gamma"}, {}, std::nullopt};
  CHECK_THROWS_AS(EntityRegistry({c}), RegistryError);

  Entity d{EntityId("D"), "Delta", {"Delta"}, {2011}, std::nullopt};
  IndexMap m(2001);
  m.bind(1, EntityId("D"));
  CHECK_THROWS_AS(EntityRegistry({d}, {m}), RegistryError);

  IndexMap dup(2011);
  dup.bind(1, EntityId("D"));
  CHECK_THROWS_AS(dup.bind(2, EntityId("D")), RegistryError);
  CHECK_THROWS_AS(dup.bind(1, EntityId("E")), RegistryError);
}

TEST_CASE("registry files round-trip through the writers") {
  std::ostringstream r, m;
  write_registry(r, reg());
  write_index_maps(m, reg());
  std::istringstream ri(r.str()), mi(m.str());
  const EntityRegistry back(read_registry_entities(ri), read_index_maps(mi));
  REQUIRE(back.entities().size() == reg().entities().size());
  for (std::size_t k = 0; k < back.entities().size(); ++k) {
    const Entity& x = back.entities()[k];
    const Entity& y = reg().entities()[k];
    CHECK(x.id == y.id);
    CHECK(x.aliases == y.aliases);
    CHECK(x.valid_decades == y.valid_decades);
    CHECK(x.parent == y.parent);
  }
  for (Decade d : {1991, 2001, 2011}) CHECK(back.index_map(d).pairs() == reg().index_map(d).pairs());
}

TEST_CASE("registry file parse errors") {
  std::istringstream short_row("canonical_id,canonical_name,alias,valid_decades\nX,Ex,Ex\n");
  CHECK_THROWS_AS(read_registry_entities(short_row), RegistryError);
  std::istringstream bad_decade("X,Ex,Ex,19x1\n");
  CHECK_THROWS_AS(read_registry_entities(bad_decade), RegistryError);
  std::istringstream conflict("X,Ex,Ex,2001\nX,Other,Ex2,2001\n");
  CHECK_THROWS_AS(read_registry_entities(conflict), RegistryError);
  std::istringstream bad_map("2001,one,X\n");
  CHECK_THROWS_AS(read_index_maps(bad_map), RegistryError);
  CHECK_THROWS_AS(load_registry("/nonexistent/registry.csv"), RegistryError);
}

namespace {

/// 1991-shaped table: every 1991 entity except J&K is a destination.
MigrationTable table_1991() {
  MigrationTable t(1991);
  const auto ids = reg().valid_entities(1991);
  int k = 0;
  for (const auto& dest : ids) {
    if (dest == EntityId("JK")) continue;
    for (const auto& origin : ids) {
      if (origin == dest) continue;
      t.set_count(dest, OriginRef::interstate(origin), DurationBin::OneToFour, ++k);
    }
    t.set_count(dest, OriginRef::pseudo(OriginKind::International), DurationBin::TwentyPlus, 3);
  }
  return t;
}

}  // namespace

TEST_CASE("remap 1991 alphabetical labels to the geographic scheme") {
  const MigrationTable t = table_1991();
  const IndexMap& alpha = reg().index_map(1991);
  const IndexMap& geo = reg().index_map(2001);
  const IndexedTable encoded = encode_indices(t, alpha);
  const RemapResult r = remap_indices(encoded, alpha, geo);

  CHECK(r.table.records.size() == encoded.records.size());
  CHECK(r.resolved_destinations == 31);
  // Oracle: 2001 entities never enumerated as a 1991 destination.
  std::vector<EntityId> expected;
  for (const auto& [_, id] : geo.pairs())
    if (!t.has_destination(id)) expected.push_back(id);
  std::sort(expected.begin(), expected.end());
  CHECK(r.absent == expected);
  CHECK(r.absent.size() == 4);

  // Counts and bins are untouched; only the encoding changes.
  for (std::size_t k = 0; k < encoded.records.size(); ++k) {
    const auto& a = encoded.records[k];
    const auto& b = r.table.records[k];
    CHECK(a.count == b.count);
    CHECK(a.bin == b.bin);
    CHECK(a.origin_kind == b.origin_kind);
    CHECK(alpha.entity(a.destination) == geo.entity(b.destination));
  }
  CHECK(decode_indices(r.table, geo) == t);

  const RemapResult back = remap_indices(r.table, geo, alpha);
  CHECK(back.table == encoded);
}

TEST_CASE("remap rejects entities missing from the target scheme") {
  MigrationTable t(2001);
  t.set_count(EntityId("UK"), OriginRef::interstate(EntityId("UP")), DurationBin::LessThan1, 5);
  const IndexedTable enc = encode_indices(t, reg().index_map(2001));
  CHECK_THROWS_AS(remap_indices(enc, reg().index_map(2001), reg().index_map(1991)), UnmappableEntity);
  IndexedTable bogus{1991, {{77, OriginKind::International, std::nullopt, DurationBin::LessThan1, 1}}};
  CHECK_THROWS_AS(remap_indices(bogus, reg().index_map(1991), reg().index_map(2001)), UnknownIndex);
}

TEST_CASE("numeric labels in a census file resolve through the decade map") {
  std::istringstream a(
      "decade,destination,origin_kind,origin_name,duration_bin,count\n"
      "1991,1,interstate,2,lt1,10\n");
  const MigrationTable t91 = parse_table(a, reg());
  CHECK(t91.interstate_flow(EntityId("AR"), EntityId("AP")) == 10);

  std::istringstream b(
      "decade,destination,origin_kind,origin_name,duration_bin,count\n"
      "2001,1,interstate,2,lt1,10\n");
  const MigrationTable t01 = parse_table(b, reg());
  CHECK(t01.has_destination(EntityId("JK")));

  std::istringstream mixed(
      "decade,destination,origin_kind,origin_name,duration_bin,count\n"
      "1991,1,interstate,2,lt1,10\n"
      "2001,1,interstate,2,lt1,10\n");
  CHECK_THROWS_AS(parse_table(mixed, reg()), ParseError);
}
