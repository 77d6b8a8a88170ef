#include "migh/synth.hpp"

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <set>

#include "migh/csv.hpp"
#include "migh/error.hpp"

namespace migh {

namespace {

// Portable draws: the mt19937_64 stream is standardised, the distribution adaptors are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() {
    double u1 = 0;
    do {
      u1 = uniform();
    } while (u1 <= 0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

constexpr std::array<double, kStatedBins> kRecentFirst = {0.35, 0.30, 0.20, 0.10, 0.05};

/// Splits `desired` amounts, capped per slot; in integer mode the grand amount is the rounded
/// desired sum and whole units go to the largest fractional parts first.
std::vector<double> allocate(const std::vector<double>& desired, const std::vector<double>& caps,
                             bool integer) {
  std::vector<double> out(desired.size());
  if (!integer) {
    for (std::size_t k = 0; k < desired.size(); ++k) out[k] = std::min(desired[k], caps[k]);
    return out;
  }
  double target = 0;
  for (double d : desired) target += d;
  target = std::round(target);
  double given = 0;
  std::vector<std::size_t> order(desired.size());
  for (std::size_t k = 0; k < desired.size(); ++k) {
    out[k] = std::min(std::floor(desired[k]), caps[k]);
    given += out[k];
    order[k] = k;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return desired[a] - std::floor(desired[a]) > desired[b] - std::floor(desired[b]);
  });
  for (std::size_t k : order) {
    if (given >= target) break;
    if (out[k] + 1 <= caps[k] && desired[k] > out[k]) {
      out[k] += 1;
      given += 1;
    }
  }
  return out;
}

}  // namespace

void validate(const SynthSpec& spec) {
  auto bad = [](const std::string& why) { throw PreconditionError("InvalidSpec: " + why); };
  if (spec.n_entities < 3) bad("n_entities must be >= 3");
  if (spec.n_entities > 99) bad("n_entities must be <= 99");
  if (!(spec.decades[0] < spec.decades[1] && spec.decades[1] < spec.decades[2])) bad("decades must increase");
  if (!(spec.base_flow_scale > 0)) bad("base_flow_scale must be positive");
  if (!spec.growth_factors.empty()) {
    if (spec.growth_factors.size() != static_cast<std::size_t>(spec.n_entities))
      bad("growth_factors must have one entry per entity");
    for (double g : spec.growth_factors)
      if (!(g > 0) || !std::isfinite(g)) bad("growth factors must be positive");
  }
  if (!(spec.unclassifiable_rate >= 0 && spec.unclassifiable_rate < 0.05)) bad("unclassifiable_rate outside [0, 0.05)");
  if (!(spec.notstated_rate >= 0 && spec.notstated_rate < 0.2)) bad("notstated_rate outside [0, 0.2)");
  if (!(spec.noise_sigma >= 0)) bad("noise_sigma must be >= 0");
  if (spec.planted_blocks < 1 || spec.planted_blocks > spec.n_entities) bad("planted_blocks out of range");
  if (!(spec.block_affinity > 0)) bad("block_affinity must be positive");
  if (spec.masked_destination) {
    bool known = false;
    for (int k = 1; k <= spec.n_entities; ++k) known = known || synth_entity(k) == *spec.masked_destination;
    if (!known) bad("masked destination is not a synthetic entity");
  }
}

EntityId synth_entity(int k) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "S%02d", k);
  return EntityId(buf);
}

EntityRegistry synth_registry(int n_entities, const std::array<Decade, 3>& decades) {
  std::vector<Entity> entities;
  for (int k = 1; k <= n_entities; ++k) {
    Entity e;
    e.id = synth_entity(k);
    char name[24];
    std::snprintf(name, sizeof name, "State %02d", k);
    e.canonical_name = name;
    e.aliases = {name, e.id.value};
    e.valid_decades = {decades.begin(), decades.end()};
    entities.push_back(std::move(e));
  }
  std::vector<IndexMap> maps;
  for (Decade d : decades) {
    IndexMap m(d);
    for (int k = 1; k <= n_entities; ++k) m.bind(k, synth_entity(k));
    maps.push_back(std::move(m));
  }
  return EntityRegistry(std::move(entities), std::move(maps));
}

std::string_view to_string(RemovalKind k) {
  switch (k) {
    case RemovalKind::Masked: return "masked";
    case RemovalKind::Unclassifiable: return "unclassifiable";
    case RemovalKind::NotStated: return "not_stated";
  }
  return "unknown";
}

SynthSystem generate(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.rng_seed);
  const int n = spec.n_entities;

  std::vector<double> growth = spec.growth_factors;
  if (growth.empty())
    for (int k = 0; k < n; ++k) growth.push_back(std::exp(rng.uniform(-0.4, 0.4)));

  SynthSystem sys;
  for (std::size_t t = 0; t < 3; ++t) sys.ground_truth[t] = MigrationTable(spec.decades[t]);

  constexpr std::array<OriginKind, 3> kPseudo = {OriginKind::IntrastateDistrict, OriginKind::IntrastateOther,
                                                 OriginKind::International};
  constexpr std::array<double, 3> kPseudoScale = {2.0, 1.5, 0.15};

  auto emit = [&](const EntityId& dest, const OriginRef& origin, double base, double g) {
    std::array<double, kStatedBins> shares{};
    double norm = 0;
    for (auto& s : shares) {
      s = rng.uniform(0.2, 1.0);
      norm += s;
    }
    for (auto& s : shares) s /= norm;
    std::array<double, 3> totals{};
    totals[0] = base;
    for (std::size_t t = 1; t < 3; ++t) totals[t] = totals[t - 1] / g * std::exp(spec.noise_sigma * rng.normal());
    for (std::size_t t = 0; t < 3; ++t) {
      Row& r = sys.ground_truth[t].row(dest, origin);
      for (std::size_t b = 0; b < kStatedBins; ++b) {
        const double v = totals[t] * shares[b];
        r.set(bin_at(b), spec.integer_counts ? std::round(v) : v);
      }
      r.set(DurationBin::NotStated, 0.0);
    }
  };

  for (int j = 1; j <= n; ++j) {
    const EntityId dest = synth_entity(j);
    for (int i = 1; i <= n; ++i) {
      if (i == j) continue;
      const bool same_block = (i % spec.planted_blocks) == (j % spec.planted_blocks);
      const double base = spec.base_flow_scale * std::exp(0.8 * rng.normal()) *
                          (same_block ? spec.block_affinity : 1.0);
      emit(dest, OriginRef::interstate(synth_entity(i)), base, growth[static_cast<std::size_t>(i - 1)]);
    }
    for (std::size_t k = 0; k < kPseudo.size(); ++k) {
      const double base = spec.base_flow_scale * n * kPseudoScale[k] * std::exp(0.3 * rng.normal());
      emit(dest, OriginRef::pseudo(kPseudo[k]), base, 1.0);
    }
  }

  sys.biased = sys.ground_truth;
  sys.sidecar.truth = sys.ground_truth;
  sys.sidecar.growth_factors = growth;
  auto& removed = sys.sidecar.removed;

  if (spec.masked_destination) {
    const EntityId& x = *spec.masked_destination;
    for (const auto& [key, row] : sys.ground_truth[0].rows()) {
      if (key.destination != x) continue;
      for (std::size_t b = 0; b < kStoredBins; ++b)
        removed.push_back({spec.decades[0], RemovalKind::Masked, x, key.origin, bin_at(b), row.bins[b]});
    }
    sys.biased[0].erase_destination(x);
  }

  for (std::size_t t = 0; t < 3; ++t) {
    MigrationTable& table = sys.biased[t];
    const Decade decade = spec.decades[t];
    if (spec.unclassifiable_rate > 0) {
      const auto destinations = table.destinations();
      for (const auto& dest : destinations) {
        std::vector<std::pair<RowKey, std::size_t>> cells;
        std::vector<double> desired, caps;
        for (auto& [key, row] : table.mutable_rows()) {
          if (key.destination != dest || !key.origin.is_classified()) continue;
          for (std::size_t b = 0; b < kStoredBins; ++b) {
            cells.emplace_back(key, b);
            desired.push_back(spec.unclassifiable_rate * row.bins[b]);
            caps.push_back(row.bins[b]);
          }
        }
        const auto take = allocate(desired, caps, spec.integer_counts);
        Row unclassifiable;
        for (std::size_t b = 0; b < kStoredBins; ++b) unclassifiable.set(bin_at(b), 0.0);
        for (std::size_t k = 0; k < cells.size(); ++k) {
          if (take[k] == 0) continue;
          const auto& [key, b] = cells[k];
          table.mutable_rows().at(key).bins[b] -= take[k];
          unclassifiable.bins[b] += take[k];
          removed.push_back({decade, RemovalKind::Unclassifiable, key.destination, key.origin, bin_at(b), take[k]});
        }
        table.row(dest, OriginRef::pseudo(OriginKind::Unclassifiable)) = unclassifiable;
      }
    }
    if (spec.notstated_rate > 0) {
      for (auto& [key, row] : table.mutable_rows()) {
        std::vector<double> desired(kStatedBins), caps(kStatedBins);
        const double amount = spec.notstated_rate * row.stated_sum();
        for (std::size_t b = 0; b < kStatedBins; ++b) {
          const double w = spec.invert_duration_mask ? kRecentFirst[kStatedBins - 1 - b] : kRecentFirst[b];
          desired[b] = w * amount;
          caps[b] = row.bins[b];
        }
        const auto take = allocate(desired, caps, spec.integer_counts);
        for (std::size_t b = 0; b < kStatedBins; ++b) {
          if (take[b] == 0) continue;
          row.bins[b] -= take[b];
          row.bins[bin_slot(DurationBin::NotStated)] += take[b];
          removed.push_back({decade, RemovalKind::NotStated, key.destination, key.origin, bin_at(b), take[b]});
        }
      }
    }
  }
  return sys;
}

namespace {

void accumulate(ClassScore& s, double recovered, double truth) {
  if (!(truth > 0)) return;
  const double rel = std::abs(recovered - truth) / truth;
  s.mape = (s.mape * static_cast<double>(s.cells) + rel) / static_cast<double>(s.cells + 1);
  s.max_relative_error = std::max(s.max_relative_error, rel);
  ++s.cells;
}

}  // namespace

RecoveryScore score_recovery(const MigrationTable& recovered, const TruthSidecar& sidecar) {
  const MigrationTable* truth = nullptr;
  for (const auto& t : sidecar.truth)
    if (t.decade() == recovered.decade()) truth = &t;
  if (!truth) throw PreconditionError("no ground truth for decade " + std::to_string(recovered.decade()));

  std::set<RowKey> masked_rows, ns_rows;
  std::set<EntityId> unclassifiable_dests, masked_dests;
  for (const auto& rec : sidecar.removed) {
    if (rec.decade != recovered.decade()) continue;
    switch (rec.kind) {
      case RemovalKind::Masked:
        if (rec.origin.is_interstate()) masked_rows.insert({rec.destination, rec.origin});
        masked_dests.insert(rec.destination);
        break;
      case RemovalKind::Unclassifiable: unclassifiable_dests.insert(rec.destination); break;
      case RemovalKind::NotStated: ns_rows.insert({rec.destination, rec.origin}); break;
    }
  }

  RecoveryScore score;
  for (const auto& key : masked_rows) {
    const Row* t = truth->find(key.destination, key.origin);
    const Row* r = recovered.find(key.destination, key.origin);
    accumulate(score.coverage, r ? r->sum() : 0.0, t ? t->sum() : 0.0);
  }
  for (const auto& [key, t] : truth->rows()) {
    if (!unclassifiable_dests.contains(key.destination) || masked_dests.contains(key.destination)) continue;
    if (!key.origin.is_classified()) continue;
    const Row* r = recovered.find(key.destination, key.origin);
    accumulate(score.unclassifiable, r ? r->sum() : 0.0, t.sum());
  }
  for (const auto& key : ns_rows) {
    if (masked_dests.contains(key.destination) || !key.origin.is_classified()) continue;
    const Row* t = truth->find(key.destination, key.origin);
    const Row* r = recovered.find(key.destination, key.origin);
    if (!t) continue;
    for (std::size_t b = 0; b < kStatedBins; ++b) accumulate(score.duration, r ? r->bins[b] : 0.0, t->bins[b]);
  }
  return score;
}

void write_sidecar(std::ostream& out, const TruthSidecar& sidecar, const EntityRegistry& registry) {
  out << "decade,kind,destination,origin_kind,origin_name,duration_bin,amount\n";
  for (const auto& r : sidecar.removed) {
    out << r.decade << "," << to_string(r.kind) << "," << csv::escape(registry.name_of(r.destination)) << ","
        << to_string(r.origin.kind) << ","
        << (r.origin.is_interstate() ? csv::escape(registry.name_of(r.origin.entity)) : "") << ","
        << to_string(r.bin) << "," << csv::format_double(r.amount) << "\n";
  }
}

}  // namespace migh
