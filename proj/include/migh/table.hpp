#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "migh/registry.hpp"

namespace migh {

/// Duration-of-stay bins. The five stated bins come first, in order.
enum class DurationBin : std::uint8_t {
  LessThan1 = 0,
  OneToFour,
  FiveToNine,
  TenToNineteen,
  TwentyPlus,
  NotStated,
  Total,
};

inline constexpr std::size_t kStatedBins = 5;
/// Stored bins: the stated ones plus NotStated.
inline constexpr std::size_t kStoredBins = 6;

constexpr std::size_t bin_slot(DurationBin b) { return static_cast<std::size_t>(b); }
constexpr DurationBin bin_at(std::size_t slot) { return static_cast<DurationBin>(slot); }

std::string_view to_string(DurationBin b);
std::optional<DurationBin> parse_bin(std::string_view s);

enum class OriginKind : std::uint8_t {
  Interstate = 0,
  IntrastateDistrict,
  IntrastateOther,
  International,
  Unclassifiable,
};

std::string_view to_string(OriginKind k);
std::optional<OriginKind> parse_origin_kind(std::string_view s);

struct OriginRef {
  OriginKind kind = OriginKind::Interstate;
  EntityId entity;  // empty unless interstate

  static OriginRef interstate(EntityId id) { return {OriginKind::Interstate, std::move(id)}; }
  static OriginRef pseudo(OriginKind k) { return {k, {}}; }

  bool is_interstate() const noexcept { return kind == OriginKind::Interstate; }
  bool is_classified() const noexcept { return kind != OriginKind::Unclassifiable; }
  auto operator<=>(const OriginRef&) const = default;
};

struct RowKey {
  EntityId destination;
  OriginRef origin;
  auto operator<=>(const RowKey&) const = default;
};

/// One (destination, origin) record group: stored bins plus an optional total.
struct Row {
  std::array<double, kStoredBins> bins{};
  std::uint8_t present = 0;  // bitmask of bins that appeared as records
  std::optional<double> total;

  double stated_sum() const;
  /// Sum over stated bins and NotStated, in bin order.
  double sum() const;
  bool has(DurationBin b) const { return (present >> bin_slot(b)) & 1u; }
  void set(DurationBin b, double v) {
    bins[bin_slot(b)] = v;
    present |= static_cast<std::uint8_t>(1u << bin_slot(b));
  }
  double get(DurationBin b) const { return bins[bin_slot(b)]; }
  std::size_t record_count() const;
  /// Re-derives the total from bins when one is carried.
  void refresh_total() {
    if (total) total = sum();
  }
  bool operator==(const Row&) const = default;
};

/// One decade's origin-destination flows keyed by (destination, origin, bin).
///
/// Counts are non-negative reals. Interstate origins never equal their destination.
class MigrationTable {
 public:
  MigrationTable() = default;
  explicit MigrationTable(Decade decade) : decade_(decade) {}

  Decade decade() const noexcept { return decade_; }
  void set_decade(Decade d) { decade_ = d; }

  /// Adds or overwrites a cell. Throws PreconditionError on negative counts or diagonal origin.
  void set_count(const EntityId& destination, const OriginRef& origin, DurationBin bin, double count);
  void set_total(const EntityId& destination, const OriginRef& origin, double total);
  void add_destination(const EntityId& destination) { destinations_.insert(destination); }
  /// Removes every row of `destination`.
  void erase_destination(const EntityId& destination);

  Row& row(const EntityId& destination, const OriginRef& origin);
  const Row* find(const EntityId& destination, const OriginRef& origin) const;
  double count(const EntityId& destination, const OriginRef& origin, DurationBin bin) const;

  const std::set<EntityId>& destinations() const noexcept { return destinations_; }
  bool has_destination(const EntityId& id) const { return destinations_.contains(id); }
  const std::map<RowKey, Row>& rows() const noexcept { return rows_; }
  std::map<RowKey, Row>& mutable_rows() noexcept { return rows_; }

  /// Interstate origins that appear in at least one row, in canonical order.
  std::set<EntityId> interstate_origins() const;
  /// Row sum of the interstate flow origin -> destination (0 when absent).
  double interstate_flow(const EntityId& origin, const EntityId& destination) const;

  double grand_total() const;
  double destination_total(const EntityId& destination) const;

  /// True when every row carries a total.
  bool has_totals() const;
  std::size_t record_count() const;

  bool operator==(const MigrationTable&) const = default;

 private:
  Decade decade_ = 0;
  std::set<EntityId> destinations_;
  std::map<RowKey, Row> rows_;
};

}  // namespace migh
