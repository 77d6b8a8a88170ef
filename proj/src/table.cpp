#include "migh/table.hpp"

#include <bit>

#include "migh/error.hpp"

namespace migh {

namespace {
constexpr std::array<std::string_view, 7> kBinNames = {"lt1",   "1-4",        "5-9",  "10-19",
                                                       "20plus", "not_stated", "total"};
constexpr std::array<std::string_view, 5> kKindNames = {
    "interstate", "intrastate_district", "intrastate_other", "international", "unclassifiable"};
}  // namespace

std::string_view to_string(DurationBin b) { return kBinNames[static_cast<std::size_t>(b)]; }

std::optional<DurationBin> parse_bin(std::string_view s) {
  for (std::size_t k = 0; k < kBinNames.size(); ++k)
    if (kBinNames[k] == s) return static_cast<DurationBin>(k);
  return std::nullopt;
}

std::string_view to_string(OriginKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<OriginKind> parse_origin_kind(std::string_view s) {
  for (std::size_t k = 0; k < kKindNames.size(); ++k)
    if (kKindNames[k] == s) return static_cast<OriginKind>(k);
  return std::nullopt;
}

double Row::stated_sum() const {
  double s = 0;
  for (std::size_t b = 0; b < kStatedBins; ++b) s += bins[b];
  return s;
}

double Row::sum() const {
  double s = 0;
  for (std::size_t b = 0; b < kStoredBins; ++b) s += bins[b];
  return s;
}

std::size_t Row::record_count() const {
  return static_cast<std::size_t>(std::popcount(present)) + (total ? 1 : 0);
}

void MigrationTable::set_count(const EntityId& destination, const OriginRef& origin, DurationBin bin,
                               double count) {
  if (bin == DurationBin::Total) {
    set_total(destination, origin, count);
    return;
  }
  if (!(count >= 0)) throw PreconditionError("negative count at " + destination.value);
  row(destination, origin).set(bin, count);
}

void MigrationTable::set_total(const EntityId& destination, const OriginRef& origin, double total) {
  if (!(total >= 0)) throw PreconditionError("negative total at " + destination.value);
  row(destination, origin).total = total;
}

Row& MigrationTable::row(const EntityId& destination, const OriginRef& origin) {
  if (origin.is_interstate() && origin.entity == destination)
    throw PreconditionError("interstate origin equals destination " + destination.value);
  if (origin.is_interstate() && origin.entity.empty())
    throw PreconditionError("interstate origin without entity at " + destination.value);
  destinations_.insert(destination);
  return rows_[RowKey{destination, origin}];
}

void MigrationTable::erase_destination(const EntityId& destination) {
  destinations_.erase(destination);
  std::erase_if(rows_, [&](const auto& kv) { return kv.first.destination == destination; });
}

const Row* MigrationTable::find(const EntityId& destination, const OriginRef& origin) const {
  auto it = rows_.find(RowKey{destination, origin});
  return it == rows_.end() ? nullptr : &it->second;
}

double MigrationTable::count(const EntityId& destination, const OriginRef& origin,
                             DurationBin bin) const {
  const Row* r = find(destination, origin);
  if (!r) return 0.0;
  if (bin == DurationBin::Total) return r->total.value_or(r->sum());
  return r->get(bin);
}

std::set<EntityId> MigrationTable::interstate_origins() const {
  std::set<EntityId> out;
  for (const auto& [key, _] : rows_)
    if (key.origin.is_interstate()) out.insert(key.origin.entity);
  return out;
}

double MigrationTable::interstate_flow(const EntityId& origin, const EntityId& destination) const {
  const Row* r = find(destination, OriginRef::interstate(origin));
  return r ? r->sum() : 0.0;
}

double MigrationTable::grand_total() const {
  double s = 0;
  for (const auto& [_, r] : rows_) s += r.sum();
  return s;
}

double MigrationTable::destination_total(const EntityId& destination) const {
  double s = 0;
  auto it = rows_.lower_bound(RowKey{destination, OriginRef{}});
  for (; it != rows_.end() && it->first.destination == destination; ++it) s += it->second.sum();
  return s;
}

bool MigrationTable::has_totals() const {
  if (rows_.empty()) return false;
  for (const auto& [_, r] : rows_)
    if (!r.total) return false;
  return true;
}

std::size_t MigrationTable::record_count() const {
  std::size_t n = 0;
  for (const auto& [_, r] : rows_) n += r.record_count();
  return n;
}

}  // namespace migh
