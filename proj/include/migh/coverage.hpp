#pragma once

#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "migh/registry.hpp"
#include "migh/table.hpp"

namespace migh {

struct ClampBounds {
  double lo = 0.1;
  double hi = 10.0;

  static ClampBounds none() { return {0.0, std::numeric_limits<double>::infinity()}; }
};

enum class ExclusionReason {
  MissingOrigin,    // origin absent from at least one decade
  ZeroDenominator,  // zero out-flow in the middle or latest decade
  ZeroNumerator,    // zero out-flow in the earliest decade, ratio would not be positive
};

std::string_view to_string(ExclusionReason r);

struct OriginExclusion {
  EntityId origin;
  ExclusionReason reason;
};

struct TransferRatio {
  double r_early = 0;   // out-flow(t0) / out-flow(t1)
  double r_late = 0;    // out-flow(t1) / out-flow(t2)
  double smoothed = 0;  // geometric mean, after clamping
  bool clamped = false;
};

/// Per-origin backward ratios for one missing destination.
struct TransferRatioSet {
  Decade target_decade = 0;
  EntityId missing_destination;
  std::map<EntityId, TransferRatio> ratios;
  std::vector<OriginExclusion> exclusions;
  std::vector<std::string> warnings;
  /// Destinations the out-flow sums range over (common to all decades, minus the missing one).
  std::set<EntityId> destination_scope;
};

/// Computes r_early, r_late and their geometric mean for every interstate origin present in all
/// three decades. Out-flow sums run over the common destination set excluding `missing`.
/// Origins with zero reference out-flow are excluded and reported, not thrown.
TransferRatioSet compute_transfer_ratios(const MigrationTable& t0, const MigrationTable& t1,
                                         const MigrationTable& t2, const EntityId& missing,
                                         const ClampBounds& clamp = {});

enum class RatioChoice { Smoothed, EarlyOnly };

struct ImputeOptions {
  RatioChoice ratio = RatioChoice::Smoothed;
  /// When set, flows from origins absent in t0 are carried to their registered parent.
  const EntityRegistry* registry = nullptr;
};

struct Imputation {
  MigrationTable table;
  /// Imputed row total per interstate origin.
  std::map<EntityId, double> imputed;
  std::vector<std::string> warnings;
};

/// Extends t0 with destination `missing`: each origin's t1 in-flow to `missing` times its ratio,
/// split over duration bins like the t1 row (or the t1 destination aggregate when the row has no
/// stated-bin mass). Throws PreconditionError when `missing` is already in t0 or absent from t1.
Imputation impute_missing_destination(const MigrationTable& t0, const MigrationTable& t1,
                                      const TransferRatioSet& ratios, const EntityId& missing,
                                      const ImputeOptions& options = {});

struct ImputationReport {
  EntityId destination;
  /// Share of the destination in each decade's interstate in-flow.
  std::map<Decade, double> inflow_share;
  std::map<EntityId, double> imputed;
  /// Per-origin imputed values, ascending.
  std::vector<double> density_values;
};

/// Destination's share of total interstate in-flow (0 when the table has no flow).
double interstate_inflow_share(const MigrationTable& table, const EntityId& destination);

ImputationReport imputation_report(const MigrationTable& before, const MigrationTable& after,
                                   const EntityId& missing,
                                   const std::vector<const MigrationTable*>& other_decades = {});

/// CSV: origin,r_early,r_late,smoothed,imputed_count, then a TOTAL summary row.
/// Excluded origins appear with empty ratio columns.
void write_coverage_report(std::ostream& out, const TransferRatioSet& ratios,
                           const Imputation& imputation, const EntityRegistry& registry);

}  // namespace migh
