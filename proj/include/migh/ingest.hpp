#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "migh/registry.hpp"
#include "migh/table.hpp"

namespace migh {

struct ParseOptions {
  /// Expected decade; when unset the file's decade column is taken as-is.
  std::optional<Decade> decade;
  /// Numeric destination/origin fields are looked up in the decade's index map.
  bool resolve_numeric_labels = true;
};

/// Reads the canonical long layout:
/// decade,destination,origin_kind,origin_name,duration_bin,count
MigrationTable parse_table(std::istream& in, const EntityRegistry& registry,
                           const ParseOptions& options = {});
MigrationTable read_table(const std::filesystem::path& file, const EntityRegistry& registry,
                          const ParseOptions& options = {});

/// Reads the wide layout (one row per (destination, origin), one column per bin).
/// Column headers: decade,destination,origin_kind,origin_name,lt1,1-4,5-9,10-19,20plus,not_stated[,total]
MigrationTable parse_wide_table(std::istream& in, const EntityRegistry& registry,
                                const ParseOptions& options = {});

/// Auto-detects the layout from the header row.
MigrationTable read_any_table(const std::filesystem::path& file, const EntityRegistry& registry,
                              const ParseOptions& options = {});

struct WriteOptions {
  bool include_totals = true;
};

/// Writes the canonical long layout at full round-trip precision, in canonical order.
void write_table(std::ostream& out, const MigrationTable& table, const EntityRegistry& registry,
                 const WriteOptions& options = {});
void write_table(const std::filesystem::path& file, const MigrationTable& table,
                 const EntityRegistry& registry, const WriteOptions& options = {});

/// Structural checks: every destination has positive inflow, no interstate diagonal.
void validate_structure(const MigrationTable& table);

/// Adds TOTAL = sum of stated bins + NOT_STATED to rows lacking one; verifies declared totals
/// against the computed sum within `tolerance` (absolute) and throws TotalMismatch otherwise.
MigrationTable synthesize_totals(const MigrationTable& table, double tolerance = 0.0);

struct CategoryShares {
  double intrastate = 0;  // district + other
  double interstate = 0;
  double international = 0;
  double unclassifiable = 0;
};

struct DurationShares {
  double less_than_1 = 0;
  double one_to_twenty = 0;  // bins 1-4, 5-9, 10-19
  double over_twenty = 0;
  double not_stated = 0;
};

CategoryShares category_shares(const MigrationTable& table);
DurationShares duration_shares(const MigrationTable& table);

/// Integerizes every destination with largest-remainder rounding so that each destination's
/// sum equals its rounded real-valued sum exactly. Ties go to the earlier cell in canonical order.
MigrationTable round_largest_remainder(const MigrationTable& table);

}  // namespace migh
