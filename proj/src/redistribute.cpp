#include "migh/redistribute.hpp"

#include <cmath>
#include <optional>
#include <vector>

#include "migh/error.hpp"

namespace migh {

std::string_view to_string(WeightMode m) {
  return m == WeightMode::PaperFixed ? "paper" : "exp";
}

WeightVector build_weight_vector(double lambda, WeightMode mode) {
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw PreconditionError("InvalidLambda: decay rate must be finite and >= 0");
  WeightVector v;
  v.lambda = lambda;
  v.mode = mode;
  if (mode == WeightMode::PaperFixed) {
    v.w = {0.35, 0.30, 0.20, 0.10, 0.05};
    return v;
  }
  double norm = 0;
  for (std::size_t b = 0; b < kStatedBins; ++b) {
    v.w[b] = std::exp(-lambda * static_cast<double>(b));
    norm += v.w[b];
  }
  for (double& x : v.w) x /= norm;
  return v;
}

bool is_valid(const WeightVector& w) {
  double s = 0;
  for (std::size_t b = 0; b < kStatedBins; ++b) {
    if (!(w.w[b] >= 0)) return false;
    if (b > 0 && w.w[b] > w.w[b - 1]) return false;
    s += w.w[b];
  }
  return std::abs(s - 1.0) <= 1e-12 && w.w[kStatedBins - 1] > 0;
}

namespace {

using RowIt = std::map<RowKey, Row>::iterator;

/// Calls fn(dest, first, last, unclassifiable) (unclassifiable == last when absent) for each destination's contiguous row range.
template <typename Fn>
void for_each_destination(std::map<RowKey, Row>& rows, Fn&& fn) {
  auto it = rows.begin();
  while (it != rows.end()) {
    const EntityId dest = it->first.destination;
    RowIt first = it;
    std::optional<RowIt> unclassifiable;
    for (; it != rows.end() && it->first.destination == dest; ++it)
      if (it->first.origin.kind == OriginKind::Unclassifiable) unclassifiable = it;
    fn(dest, first, it, unclassifiable.value_or(it));
  }
}

}  // namespace

MigrationTable redistribute_unclassifiable(const MigrationTable& table,
                                           UnclassifiableGranularity granularity) {
  MigrationTable out = table;
  for_each_destination(out.mutable_rows(), [&](const EntityId& dest, RowIt first, RowIt last,
                                                RowIt unclassifiable) {
    if (unclassifiable == last) return;
    Row& u = unclassifiable->second;
    const double u_total = u.sum();
    if (u_total == 0) return;

    std::vector<Row*> classified;
    for (RowIt it = first; it != last; ++it)
      if (it != unclassifiable) classified.push_back(&it->second);

    std::vector<double> row_sums;
    row_sums.reserve(classified.size());
    double classified_total = 0;
    for (Row* r : classified) {
      row_sums.push_back(r->sum());
      classified_total += row_sums.back();
    }
    if (!(classified_total > 0))
      throw PreconditionError("EmptyDestination: " + dest.value +
                              " has unclassifiable migrants but no classified in-flow");

    if (granularity == UnclassifiableGranularity::RowTotal) {
      for (Row* r : classified)
        for (std::size_t b = 0; b < kStoredBins; ++b) r->bins[b] += u_total * r->bins[b] / classified_total;
    } else {
      for (std::size_t b = 0; b < kStoredBins; ++b) {
        const double ub = u.bins[b];
        if (ub == 0) continue;
        double cb = 0;
        for (Row* r : classified) cb += r->bins[b];
        if (cb > 0) {
          for (Row* r : classified) r->bins[b] += ub * r->bins[b] / cb;
        } else {
          // No classified mass in this bin: fall back to the row-total distribution.
          for (std::size_t k = 0; k < classified.size(); ++k) {
            if (row_sums[k] == 0) continue;
            classified[k]->set(bin_at(b), classified[k]->bins[b] + ub * row_sums[k] / classified_total);
          }
        }
      }
    }
    for (std::size_t b = 0; b < kStoredBins; ++b) u.bins[b] = 0;
    for (RowIt it = first; it != last; ++it) it->second.refresh_total();
  });
  return out;
}

MigrationTable redistribute_duration(const MigrationTable& table, const WeightVector& w) {
  if (!is_valid(w)) throw PreconditionError("invalid weight vector");
  MigrationTable out = table;
  constexpr std::size_t ns = bin_slot(DurationBin::NotStated);
  for (auto& [_, row] : out.mutable_rows()) {
    const double u = row.bins[ns];
    if (u == 0) continue;
    for (std::size_t b = 0; b < kStatedBins; ++b) row.set(bin_at(b), row.bins[b] + w.w[b] * u);
    row.bins[ns] = 0;
    row.refresh_total();
  }
  return out;
}

ConservationResult conservation_check(const MigrationTable& before, const MigrationTable& after,
                                      ConservationLevel level, bool exact, double relative_tolerance) {
  ConservationResult res;
  auto judge = [&](double b, double a) {
    const double r = std::abs(a - b);
    const double rel = b != 0 ? r / std::abs(b) : (r == 0 ? 0.0 : HUGE_VAL);
    res.max_residual = std::max(res.max_residual, r);
    res.max_relative_residual = std::max(res.max_relative_residual, rel);
    if (exact ? r != 0 : rel > relative_tolerance) res.pass = false;
    return r;
  };
  if (level == ConservationLevel::Grand) {
    judge(before.grand_total(), after.grand_total());
    return res;
  }
  std::set<EntityId> dests = before.destinations();
  dests.insert(after.destinations().begin(), after.destinations().end());
  for (const auto& d : dests)
    res.residuals[d] = judge(before.destination_total(d), after.destination_total(d));
  return res;
}

}  // namespace migh
