#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "migh/ingest.hpp"
#include "migh/registry.hpp"
#include "migh/table.hpp"

namespace migh {

enum class Axis { Inflow, Outflow };

std::string_view to_string(Axis a);

/// Summary statistics of per-entity interstate in- or out-flow.
/// std_dev is the sample deviation (n - 1); quartiles interpolate linearly between closest ranks.
struct DistributionSummary {
  double mean = 0;
  double std_dev = 0;
  double min = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double max = 0;
  std::size_t n = 0;
  Axis axis = Axis::Inflow;

  static constexpr std::array<std::string_view, 7> kNames = {"mean", "std_dev", "min", "q1",
                                                             "median", "q3", "max"};
  std::array<double, 7> values() const { return {mean, std_dev, min, q1, median, q3, max}; }
};

/// Quantile with linear interpolation between closest ranks (sorted input, p in [0, 1]).
double quantile_sorted(std::span<const double> sorted, double p);

DistributionSummary summarize_values(std::vector<double> values, Axis axis);

/// Per-entity interstate flow: inflow keys on destinations, outflow on origins.
std::map<EntityId, double> interstate_strengths(const MigrationTable& table, Axis axis);

DistributionSummary summarize_distribution(const MigrationTable& table, Axis axis);

struct StatisticDelta {
  std::string_view name;
  double before = 0;
  double after = 0;
  double absolute = 0;  // after - before
  double relative = 0;  // absolute / |before|, 0 when before is 0
};

struct SummaryComparison {
  Axis axis = Axis::Inflow;
  std::array<StatisticDelta, 7> deltas;
  /// Names of quartile statistics (q1, median, q3) whose change exceeds the tolerance.
  std::vector<std::string_view> flagged_quartiles;
};

/// Default tolerance is half a unit of the 3-decimal millions display.
SummaryComparison compare_summaries(const DistributionSummary& before,
                                    const DistributionSummary& after,
                                    double quartile_tolerance = 500.0);

struct PlotSelector {
  enum class Kind {
    EntityInflow,   // per-origin in-flow to `entity`
    EntityOutflow,  // per-destination out-flow from `entity`
    AllInflow,      // per-destination total interstate in-flow
    AllOutflow,     // per-origin total interstate out-flow
  };
  Kind kind = Kind::AllInflow;
  EntityId entity;
};

/// Long-format CSV (decade,entity,value_millions,value) ordered by decade then entity id.
/// Returns the number of data rows written.
std::size_t export_plot_data(std::ostream& out, std::span<const MigrationTable* const> tables,
                             const PlotSelector& selector, const EntityRegistry& registry);

/// Key-value text report with [section] headers.
class TextReport {
 public:
  void section(std::string_view name);
  void entry(std::string_view key, std::string_view value);
  void entry(std::string_view key, double value);
  void summary(std::string_view prefix, const DistributionSummary& s);
  void comparison(std::string_view prefix, const SummaryComparison& c);
  void category_shares(const CategoryShares& s);
  void duration_shares(const DurationShares& s);
  const std::string& str() const noexcept { return text_; }

 private:
  std::string text_;
};

/// Millions with three decimals, matching the published table formatting.
std::string millions(double persons);

}  // namespace migh
