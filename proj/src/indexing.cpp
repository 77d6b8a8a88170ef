#include "migh/indexing.hpp"

#include <algorithm>
#include <set>

#include "migh/error.hpp"

namespace migh {

namespace {

int relabel(int index, const IndexMap& from, const IndexMap& to) {
  auto id = from.entity(index);
  if (!id) throw UnknownIndex(index, from.decade());
  auto target = to.index(*id);
  if (!target) throw UnmappableEntity(id->value);
  return *target;
}

}  // namespace

RemapResult remap_indices(const IndexedTable& table, const IndexMap& from, const IndexMap& to) {
  RemapResult result;
  result.table.decade = table.decade;
  result.table.records.reserve(table.records.size());
  std::set<int> destinations;
  for (const auto& rec : table.records) {
    IndexedRecord out = rec;
    out.destination = relabel(rec.destination, from, to);
    if (rec.origin) out.origin = relabel(*rec.origin, from, to);
    destinations.insert(out.destination);
    result.table.records.push_back(out);
  }
  result.resolved_destinations = destinations.size();
  for (const auto& [idx, id] : to.pairs())
    if (!destinations.contains(idx)) result.absent.push_back(id);
  std::sort(result.absent.begin(), result.absent.end());
  return result;
}

IndexedTable encode_indices(const MigrationTable& table, const IndexMap& map) {
  auto index_of = [&](const EntityId& id) {
    auto idx = map.index(id);
    if (!idx) throw UnmappableEntity(id.value);
    return *idx;
  };
  IndexedTable out;
  out.decade = table.decade();
  for (const auto& [key, row] : table.rows()) {
    IndexedRecord rec;
    rec.destination = index_of(key.destination);
    rec.origin_kind = key.origin.kind;
    if (key.origin.is_interstate()) rec.origin = index_of(key.origin.entity);
    for (std::size_t b = 0; b < kStoredBins; ++b) {
      if (!row.has(bin_at(b))) continue;
      rec.bin = bin_at(b);
      rec.count = row.bins[b];
      out.records.push_back(rec);
    }
    if (row.total) {
      rec.bin = DurationBin::Total;
      rec.count = *row.total;
      out.records.push_back(rec);
    }
  }
  return out;
}

MigrationTable decode_indices(const IndexedTable& table, const IndexMap& map) {
  auto id_of = [&](int idx) {
    auto id = map.entity(idx);
    if (!id) throw UnknownIndex(idx, map.decade());
    return *id;
  };
  MigrationTable out(table.decade);
  for (const auto& rec : table.records) {
    const EntityId dest = id_of(rec.destination);
    const OriginRef origin = rec.origin ? OriginRef::interstate(id_of(*rec.origin))
                                        : OriginRef::pseudo(rec.origin_kind);
    out.set_count(dest, origin, rec.bin, rec.count);
  }
  return out;
}

}  // namespace migh
