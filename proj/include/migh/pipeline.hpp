#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "migh/coverage.hpp"
#include "migh/redistribute.hpp"

namespace migh {

/// 64-bit FNV-1a content digest as 16 hex digits.
std::string digest_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& file);

enum class RedistributionOrder { UnclassifiableFirst, DurationFirst };

struct PipelineConfig {
  std::map<Decade, std::filesystem::path> inputs;
  std::filesystem::path registry;
  std::optional<std::filesystem::path> index_maps;
  std::optional<std::string> missing_destination;  // any registered alias
  bool skip_coverage = false;
  WeightMode weight_mode = WeightMode::PaperFixed;
  double lambda = 0.4;
  ClampBounds clamp;
  std::size_t seeds = 50;
  std::uint64_t seed_base = 0;
  double resolution = 1.0;
  std::filesystem::path output_dir;
  bool round_exports = true;
  RedistributionOrder order = RedistributionOrder::UnclassifiableFirst;
  ConservationLevel check_level = ConservationLevel::PerDestination;
  double total_tolerance = 0.0;
  double conservation_tolerance = 1e-6;
};

/// Flat `key = value` text; '#' starts a comment. Keys:
/// input.<decade>, registry, index_maps, missing, skip_coverage, weights (paper|exp), lambda,
/// clamp (lo,hi), seeds, seed_base, resolution, out, round, order, check, total_tolerance,
/// conservation_tolerance. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
/// Applies one `key=value` override on top of an existing config.
void apply_config_entry(PipelineConfig& cfg, std::string_view key, std::string_view value,
                        const std::filesystem::path& base_dir = {});
/// Canonical text form; the manifest's config digest is taken over it.
std::string canonical_config(const PipelineConfig& cfg);
/// Throws PreconditionError when an invariant (output dir distinct from inputs, ...) fails.
void validate(const PipelineConfig& cfg);

struct StageRecord {
  Decade decade = 0;
  std::string stage;
  std::string checksum;  // digest of the table's canonical serialisation after the stage
  std::optional<ConservationResult> conservation;
};

struct RunManifest {
  std::string config_digest;
  std::vector<StageRecord> stages;
  std::map<std::string, std::string> artifacts;  // relative path -> digest
  bool ok = true;
  std::string failure;

  std::string render() const;
};

/// Runs the full harmonization flow: name/index fixes, total synthesis, coverage imputation,
/// unclassifiable and duration redistribution, diagnostics, network export. Writes artifacts and
/// manifest.txt under cfg.output_dir. A failed conservation check writes the manifest and
/// throws ConservationError before any harmonized table is written.
RunManifest run_pipeline(const PipelineConfig& cfg);

}  // namespace migh
