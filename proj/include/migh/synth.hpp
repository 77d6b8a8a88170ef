#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "migh/registry.hpp"
#include "migh/table.hpp"

namespace migh {

struct SynthSpec {
  int n_entities = 12;
  std::array<Decade, 3> decades = {1991, 2001, 2011};
  double base_flow_scale = 5000;
  /// Per-origin decade-over-decade shrink factor g_i (f_{t+1} = f_t / g_i). Empty draws
  /// g_i = exp(U(-0.4, 0.4)) from the seed.
  std::vector<double> growth_factors;
  double unclassifiable_rate = 0;  // [0, 0.05)
  double notstated_rate = 0;       // [0, 0.2)
  std::optional<EntityId> masked_destination;  // deleted from the earliest decade
  std::uint64_t rng_seed = 1;
  /// Multiplicative log-normal noise per cell and decade (sigma of the log).
  double noise_sigma = 0;
  /// Round ground truth to whole persons and inject bias in whole persons.
  bool integer_counts = true;
  /// Not-stated mass is taken mostly from recent bins; inverting takes it mostly from old ones.
  bool invert_duration_mask = false;
  /// Planted community blocks; flows inside a block are multiplied by block_affinity.
  int planted_blocks = 1;
  double block_affinity = 1.0;
};

/// Throws PreconditionError (InvalidSpec) when a field is out of range.
void validate(const SynthSpec& spec);

EntityId synth_entity(int k);  // "S01", "S02", ...
/// Registry with n synthetic entities valid in the given decades.
EntityRegistry synth_registry(int n_entities, const std::array<Decade, 3>& decades);

enum class RemovalKind { Masked, Unclassifiable, NotStated };

std::string_view to_string(RemovalKind k);

struct SidecarRecord {
  Decade decade = 0;
  RemovalKind kind = RemovalKind::Masked;
  EntityId destination;
  OriginRef origin;
  DurationBin bin = DurationBin::LessThan1;
  double amount = 0;
};

struct TruthSidecar {
  std::array<MigrationTable, 3> truth;
  std::vector<SidecarRecord> removed;
  std::vector<double> growth_factors;
};

struct SynthSystem {
  std::array<MigrationTable, 3> ground_truth;
  std::array<MigrationTable, 3> biased;
  TruthSidecar sidecar;
};

/// Deterministic per spec (including rng_seed).
SynthSystem generate(const SynthSpec& spec);

struct ClassScore {
  double mape = 0;
  double max_relative_error = 0;
  std::size_t cells = 0;
};

struct RecoveryScore {
  ClassScore coverage;        // imputed (origin, masked destination) row totals
  ClassScore unclassifiable;  // classified row totals at destinations that lost mass
  ClassScore duration;        // stated-bin cells of rows that lost mass to not-stated
};

/// Compares a corrected table with the ground truth of the same decade.
RecoveryScore score_recovery(const MigrationTable& recovered, const TruthSidecar& sidecar);

/// CSV: decade,kind,destination,origin_kind,origin_name,duration_bin,amount
void write_sidecar(std::ostream& out, const TruthSidecar& sidecar, const EntityRegistry& registry);

}  // namespace migh
