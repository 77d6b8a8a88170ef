#include "migh/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "migh/csv.hpp"
#include "migh/error.hpp"

namespace migh {

std::string_view to_string(Axis a) { return a == Axis::Inflow ? "inflow" : "outflow"; }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw PreconditionError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DistributionSummary summarize_values(std::vector<double> values, Axis axis) {
  if (values.empty()) throw PreconditionError("cannot summarise an empty distribution");
  std::sort(values.begin(), values.end());
  DistributionSummary s;
  s.axis = axis;
  s.n = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  return s;
}

std::map<EntityId, double> interstate_strengths(const MigrationTable& table, Axis axis) {
  std::map<EntityId, double> out;
  if (axis == Axis::Inflow)
    for (const auto& d : table.destinations()) out[d] = 0.0;
  for (const auto& [key, row] : table.rows()) {
    if (!key.origin.is_interstate()) continue;
    out[axis == Axis::Inflow ? key.destination : key.origin.entity] += row.sum();
  }
  return out;
}

DistributionSummary summarize_distribution(const MigrationTable& table, Axis axis) {
  std::vector<double> values;
  for (const auto& [_, v] : interstate_strengths(table, axis)) values.push_back(v);
  return summarize_values(std::move(values), axis);
}

SummaryComparison compare_summaries(const DistributionSummary& before,
                                    const DistributionSummary& after, double quartile_tolerance) {
  if (before.axis != after.axis) throw PreconditionError("AxisMismatch: summaries are on different axes");
  if (before.n != after.n) throw PreconditionError("summaries cover different entity counts");
  SummaryComparison c;
  c.axis = before.axis;
  const auto b = before.values();
  const auto a = after.values();
  for (std::size_t k = 0; k < b.size(); ++k) {
    auto& d = c.deltas[k];
    d.name = DistributionSummary::kNames[k];
    d.before = b[k];
    d.after = a[k];
    d.absolute = a[k] - b[k];
    d.relative = b[k] != 0 ? d.absolute / std::abs(b[k]) : 0.0;
    if ((d.name == "q1" || d.name == "median" || d.name == "q3") &&
        std::abs(d.absolute) > quartile_tolerance)
      c.flagged_quartiles.push_back(d.name);
  }
  return c;
}

std::string millions(double persons) { return csv::format_fixed(persons / 1e6, 3); }

std::size_t export_plot_data(std::ostream& out, std::span<const MigrationTable* const> tables,
                             const PlotSelector& selector, const EntityRegistry& registry) {
  std::vector<const MigrationTable*> ordered(tables.begin(), tables.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const MigrationTable* a, const MigrationTable* b) { return a->decade() < b->decade(); });
  out << "decade,entity,value_millions,value\n";
  std::size_t rows = 0;
  for (const MigrationTable* t : ordered) {
    std::map<EntityId, double> values;
    using K = PlotSelector::Kind;
    switch (selector.kind) {
      case K::AllInflow: values = interstate_strengths(*t, Axis::Inflow); break;
      case K::AllOutflow: values = interstate_strengths(*t, Axis::Outflow); break;
      case K::EntityInflow:
        for (const auto& [key, row] : t->rows())
          if (key.destination == selector.entity && key.origin.is_interstate())
            values[key.origin.entity] += row.sum();
        break;
      case K::EntityOutflow:
        for (const auto& [key, row] : t->rows())
          if (key.origin.is_interstate() && key.origin.entity == selector.entity)
            values[key.destination] += row.sum();
        break;
    }
    for (const auto& [id, v] : values) {
      out << t->decade() << "," << csv::escape(registry.name_of(id)) << "," << millions(v) << ","
          << csv::format_double(v) << "\n";
      ++rows;
    }
  }
  return rows;
}

void TextReport::section(std::string_view name) {
  if (!text_.empty()) text_ += "\n";
  text_ += "[";
  text_ += name;
  text_ += "]\n";
}

void TextReport::entry(std::string_view key, std::string_view value) {
  text_ += key;
  text_ += " = ";
  text_ += value;
  text_ += "\n";
}

void TextReport::entry(std::string_view key, double value) { entry(key, csv::format_double(value)); }

void TextReport::summary(std::string_view prefix, const DistributionSummary& s) {
  const std::string p(prefix);
  entry(p + ".n", std::to_string(s.n));
  const auto v = s.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string key = p + "." + std::string(DistributionSummary::kNames[k]);
    entry(key + "_millions", millions(v[k]));
    entry(key, v[k]);
  }
}

void TextReport::comparison(std::string_view prefix, const SummaryComparison& c) {
  const std::string p(prefix);
  for (const auto& d : c.deltas) {
    entry(p + "." + std::string(d.name) + ".delta_millions", millions(d.absolute));
    entry(p + "." + std::string(d.name) + ".delta_relative", d.relative);
  }
  std::string flagged;
  for (auto f : c.flagged_quartiles) flagged += (flagged.empty() ? "" : ";") + std::string(f);
  entry(p + ".quartiles_changed", flagged.empty() ? "none" : flagged);
}

void TextReport::category_shares(const CategoryShares& s) {
  entry("share_pct.intrastate", csv::format_fixed(s.intrastate * 100, 3));
  entry("share_pct.interstate", csv::format_fixed(s.interstate * 100, 3));
  entry("share_pct.international", csv::format_fixed(s.international * 100, 3));
  entry("share_pct.unclassifiable", csv::format_fixed(s.unclassifiable * 100, 3));
}

void TextReport::duration_shares(const DurationShares& s) {
  entry("duration_pct.lt1", csv::format_fixed(s.less_than_1 * 100, 3));
  entry("duration_pct.1_to_20", csv::format_fixed(s.one_to_twenty * 100, 3));
  entry("duration_pct.over_20", csv::format_fixed(s.over_twenty * 100, 3));
  entry("duration_pct.not_stated", csv::format_fixed(s.not_stated * 100, 3));
}

}  // namespace migh
