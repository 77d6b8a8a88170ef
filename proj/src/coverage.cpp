#include "migh/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "migh/csv.hpp"
#include "migh/error.hpp"

namespace migh {

std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::MissingOrigin: return "missing_origin";
    case ExclusionReason::ZeroDenominator: return "zero_denominator";
    case ExclusionReason::ZeroNumerator: return "zero_numerator";
  }
  return "unknown";
}

namespace {

double outflow(const MigrationTable& t, const EntityId& origin, const std::set<EntityId>& scope) {
  double s = 0;
  for (const auto& dest : scope) s += t.interstate_flow(origin, dest);
  return s;
}

}  // namespace

TransferRatioSet compute_transfer_ratios(const MigrationTable& t0, const MigrationTable& t1,
                                         const MigrationTable& t2, const EntityId& missing,
                                         const ClampBounds& clamp) {
  if (!(clamp.lo > 0 || clamp.lo == 0) || !(clamp.hi >= clamp.lo))
    throw PreconditionError("invalid clamp bounds");
  TransferRatioSet set;
  set.target_decade = t0.decade();
  set.missing_destination = missing;
  for (const auto& d : t0.destinations())
    if (d != missing && t1.has_destination(d) && t2.has_destination(d)) set.destination_scope.insert(d);

  const auto o0 = t0.interstate_origins();
  const auto o1 = t1.interstate_origins();
  const auto o2 = t2.interstate_origins();
  std::set<EntityId> all = o0;
  all.insert(o1.begin(), o1.end());
  all.insert(o2.begin(), o2.end());

  for (const auto& origin : all) {
    if (!o0.contains(origin) || !o1.contains(origin) || !o2.contains(origin)) {
      set.exclusions.push_back({origin, ExclusionReason::MissingOrigin});
      set.warnings.push_back("origin " + origin.value + " absent from a decade; excluded");
      continue;
    }
    const double s0 = outflow(t0, origin, set.destination_scope);
    const double s1 = outflow(t1, origin, set.destination_scope);
    const double s2 = outflow(t2, origin, set.destination_scope);
    if (!(s1 > 0) || !(s2 > 0)) {
      set.exclusions.push_back({origin, ExclusionReason::ZeroDenominator});
      set.warnings.push_back("origin " + origin.value + " has zero reference out-flow; excluded");
      continue;
    }
    if (!(s0 > 0)) {
      set.exclusions.push_back({origin, ExclusionReason::ZeroNumerator});
      set.warnings.push_back("origin " + origin.value + " has zero out-flow in " +
                             std::to_string(t0.decade()) + "; excluded");
      continue;
    }
    TransferRatio r;
    r.r_early = s0 / s1;
    r.r_late = s1 / s2;
    const double gm = std::sqrt(r.r_early * r.r_late);
    r.smoothed = std::clamp(gm, clamp.lo, clamp.hi);
    r.clamped = r.smoothed != gm;
    if (r.clamped)
      set.warnings.push_back("origin " + origin.value + " smoothed ratio " + csv::format_double(gm) +
                             " clamped to " + csv::format_double(r.smoothed));
    set.ratios.emplace(origin, r);
  }
  return set;
}

Imputation impute_missing_destination(const MigrationTable& t0, const MigrationTable& t1,
                                      const TransferRatioSet& ratios, const EntityId& missing,
                                      const ImputeOptions& options) {
  if (t0.has_destination(missing))
    throw PreconditionError("destination " + missing.value + " already present in " +
                            std::to_string(t0.decade()));
  if (!t1.has_destination(missing))
    throw PreconditionError("destination " + missing.value + " absent from " + std::to_string(t1.decade()));
  if (ratios.missing_destination != missing)
    throw PreconditionError("ratio set was computed for " + ratios.missing_destination.value);

  // Aggregate duration profile of `missing` in t1, used when a row has no stated-bin mass.
  std::array<double, kStoredBins> aggregate{};
  double aggregate_sum = 0;
  for (const auto& [key, row] : t1.rows()) {
    if (key.destination != missing || !key.origin.is_interstate()) continue;
    for (std::size_t b = 0; b < kStoredBins; ++b) aggregate[b] += row.bins[b];
  }
  double aggregate_stated = 0;
  for (std::size_t b = 0; b < kStatedBins; ++b) aggregate_stated += aggregate[b];
  for (double v : aggregate) aggregate_sum += v;

  Imputation result{t0, {}, {}};
  const auto t0_origins = t0.interstate_origins();

  auto ratio_of = [&](const EntityId& origin) -> std::optional<double> {
    auto it = ratios.ratios.find(origin);
    if (it == ratios.ratios.end()) return std::nullopt;
    return options.ratio == RatioChoice::Smoothed ? it->second.smoothed : it->second.r_early;
  };

  std::map<EntityId, Row> imputed_rows;
  for (const auto& [key, row] : t1.rows()) {
    if (key.destination != missing || !key.origin.is_interstate()) continue;
    EntityId target = key.origin.entity;
    auto ratio = ratio_of(target);
    if (!ratio && !t0_origins.contains(target) && options.registry) {
      const Entity* e = options.registry->find(target);
      if (e && e->parent) {
        if (auto pr = ratio_of(*e->parent); pr && *e->parent != missing) {
          result.warnings.push_back("in-flow from " + target.value + " carried to parent " + e->parent->value);
          target = *e->parent;
          ratio = pr;
        }
      }
    }
    if (!ratio) {
      if (row.sum() > 0)
        result.warnings.push_back("origin " + target.value + " has no ratio; contributes zero");
      continue;
    }
    Row& out = imputed_rows[target];
    if (row.stated_sum() > 0) {
      for (std::size_t b = 0; b < kStoredBins; ++b) out.bins[b] += row.bins[b] * *ratio;
      out.present |= row.present;
    } else if (aggregate_stated > 0) {
      const double total = row.sum() * *ratio;
      for (std::size_t b = 0; b < kStoredBins; ++b) out.bins[b] += total * (aggregate[b] / aggregate_sum);
      out.present = static_cast<std::uint8_t>((1u << kStoredBins) - 1);
    } else {
      out.bins[bin_slot(DurationBin::NotStated)] += row.sum() * *ratio;
      out.present |= static_cast<std::uint8_t>(1u << bin_slot(DurationBin::NotStated));
    }
  }

  const bool totals = t0.has_totals();
  for (auto& [origin, row] : imputed_rows) {
    if (totals) row.total = row.sum();
    result.imputed[origin] = row.sum();
    result.table.row(missing, OriginRef::interstate(origin)) = row;
  }
  result.table.add_destination(missing);
  return result;
}

double interstate_inflow_share(const MigrationTable& table, const EntityId& destination) {
  double all = 0;
  double mine = 0;
  for (const auto& [key, row] : table.rows()) {
    if (!key.origin.is_interstate()) continue;
    const double v = row.sum();
    all += v;
    if (key.destination == destination) mine += v;
  }
  return all > 0 ? mine / all : 0.0;
}

ImputationReport imputation_report(const MigrationTable& before, const MigrationTable& after,
                                   const EntityId& missing,
                                   const std::vector<const MigrationTable*>& other_decades) {
  ImputationReport rep;
  rep.destination = missing;
  for (const auto& [key, row] : after.rows()) {
    if (key.destination != missing || !key.origin.is_interstate()) continue;
    if (before.find(key.destination, key.origin)) continue;
    rep.imputed[key.origin.entity] = row.sum();
    rep.density_values.push_back(row.sum());
  }
  std::sort(rep.density_values.begin(), rep.density_values.end());
  rep.inflow_share[after.decade()] = interstate_inflow_share(after, missing);
  for (const MigrationTable* t : other_decades)
    if (t) rep.inflow_share[t->decade()] = interstate_inflow_share(*t, missing);
  return rep;
}

void write_coverage_report(std::ostream& out, const TransferRatioSet& ratios,
                           const Imputation& imputation, const EntityRegistry& registry) {
  out << "origin,r_early,r_late,smoothed,imputed_count\n";
  double total = 0;
  for (const auto& [origin, r] : ratios.ratios) {
    auto it = imputation.imputed.find(origin);
    const double v = it == imputation.imputed.end() ? 0.0 : it->second;
    total += v;
    out << csv::escape(registry.name_of(origin)) << "," << csv::format_double(r.r_early) << ","
        << csv::format_double(r.r_late) << "," << csv::format_double(r.smoothed) << ","
        << csv::format_double(v) << "\n";
  }
  for (const auto& ex : ratios.exclusions) {
    auto it = imputation.imputed.find(ex.origin);
    const double v = it == imputation.imputed.end() ? 0.0 : it->second;
    out << csv::escape(registry.name_of(ex.origin)) << ",,,," << csv::format_double(v) << "\n";
  }
  out << "TOTAL,,,," << csv::format_double(total) << "\n";
}

}  // namespace migh
