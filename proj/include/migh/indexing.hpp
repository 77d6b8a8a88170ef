#pragma once

#include <optional>
#include <vector>

#include "migh/registry.hpp"
#include "migh/table.hpp"

namespace migh {

/// A flow record whose places are encoded with a decade's numeric labels.
struct IndexedRecord {
  int destination = 0;
  OriginKind origin_kind = OriginKind::Interstate;
  std::optional<int> origin;  // set iff interstate
  DurationBin bin = DurationBin::LessThan1;
  double count = 0;
  auto operator<=>(const IndexedRecord&) const = default;
};

/// A census sheet as published: numeric place labels under one labelling scheme.
struct IndexedTable {
  Decade decade = 0;
  std::vector<IndexedRecord> records;
  bool operator==(const IndexedTable&) const = default;
};

struct RemapResult {
  IndexedTable table;
  std::size_t resolved_destinations = 0;
  /// Entities of the target map that never appear as a destination, in canonical order.
  std::vector<EntityId> absent;
};

/// Rewrites every label from the `from` scheme to the `to` scheme. Counts, bins and record
/// order are untouched. Throws UnknownIndex or UnmappableEntity.
RemapResult remap_indices(const IndexedTable& table, const IndexMap& from, const IndexMap& to);

/// Encodes a canonical table with the given labelling (UnmappableEntity on gaps).
IndexedTable encode_indices(const MigrationTable& table, const IndexMap& map);
/// Decodes an indexed table back to canonical identifiers (UnknownIndex on gaps).
MigrationTable decode_indices(const IndexedTable& table, const IndexMap& map);

}  // namespace migh
