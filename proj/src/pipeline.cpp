#include "migh/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "migh/csv.hpp"
#include "migh/diagnostics.hpp"
#include "migh/error.hpp"
#include "migh/ingest.hpp"
#include "migh/network.hpp"

namespace migh {

namespace fs = std::filesystem;

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return digest_hex(ss.str());
}

namespace {

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw PreconditionError("config key '" + std::string(key) + "' expects a boolean");
}

double parse_number(std::string_view key, std::string_view v) {
  auto d = csv::parse_double(v);
  if (!d) throw PreconditionError("config key '" + std::string(key) + "' expects a number");
  return *d;
}

fs::path resolve(const fs::path& base, std::string_view v) {
  fs::path p{std::string(v)};
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

void apply_config_entry(PipelineConfig& cfg, std::string_view key, std::string_view value,
                        const fs::path& base_dir) {
  key = csv::trim(key);
  value = csv::trim(value);
  if (key.starts_with("input.")) {
    auto d = csv::parse_int(key.substr(6));
    if (!d) throw PreconditionError("bad decade in config key '" + std::string(key) + "'");
    cfg.inputs[static_cast<Decade>(*d)] = resolve(base_dir, value);
  } else if (key == "registry") {
    cfg.registry = resolve(base_dir, value);
  } else if (key == "index_maps") {
    if (value.empty()) cfg.index_maps.reset();
    else cfg.index_maps = resolve(base_dir, value);
  } else if (key == "missing") {
    if (value.empty()) cfg.missing_destination.reset();
    else cfg.missing_destination = std::string(value);
  } else if (key == "skip_coverage") {
    cfg.skip_coverage = parse_bool(key, value);
  } else if (key == "weights") {
    if (value == "paper") cfg.weight_mode = WeightMode::PaperFixed;
    else if (value == "exp") cfg.weight_mode = WeightMode::NormalizedExponential;
    else throw PreconditionError("weights must be paper or exp");
  } else if (key == "lambda") {
    cfg.lambda = parse_number(key, value);
  } else if (key == "clamp") {
    const auto parts = csv::split_line(value);
    if (parts.size() != 2) throw PreconditionError("clamp expects lo,hi");
    cfg.clamp.lo = parse_number(key, parts[0]);
    cfg.clamp.hi = parse_number(key, parts[1]);
  } else if (key == "seeds") {
    cfg.seeds = static_cast<std::size_t>(parse_number(key, value));
  } else if (key == "seed_base") {
    cfg.seed_base = static_cast<std::uint64_t>(parse_number(key, value));
  } else if (key == "resolution") {
    cfg.resolution = parse_number(key, value);
  } else if (key == "out") {
    cfg.output_dir = resolve(base_dir, value);
  } else if (key == "round") {
    cfg.round_exports = parse_bool(key, value);
  } else if (key == "order") {
    if (value == "unclassifiable-first") cfg.order = RedistributionOrder::UnclassifiableFirst;
    else if (value == "duration-first") cfg.order = RedistributionOrder::DurationFirst;
    else throw PreconditionError("order must be unclassifiable-first or duration-first");
  } else if (key == "check") {
    if (value == "grand") cfg.check_level = ConservationLevel::Grand;
    else if (value == "per-destination") cfg.check_level = ConservationLevel::PerDestination;
    else throw PreconditionError("check must be grand or per-destination");
  } else if (key == "total_tolerance") {
    cfg.total_tolerance = parse_number(key, value);
  } else if (key == "conservation_tolerance") {
    cfg.conservation_tolerance = parse_number(key, value);
  } else {
    throw PreconditionError("unknown config key '" + std::string(key) + "'");
  }
}

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir) {
  PipelineConfig cfg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw PreconditionError("config line " + std::to_string(n) + ": expected key = value");
    apply_config_entry(cfg, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1),
                       base_dir);
  }
  return cfg;
}

std::string canonical_config(const PipelineConfig& cfg) {
  std::ostringstream s;
  for (const auto& [d, p] : cfg.inputs) s << "input." << d << " = " << p.generic_string() << "\n";
  s << "registry = " << cfg.registry.generic_string() << "\n";
  s << "index_maps = " << (cfg.index_maps ? cfg.index_maps->generic_string() : "") << "\n";
  s << "missing = " << cfg.missing_destination.value_or("") << "\n";
  s << "skip_coverage = " << (cfg.skip_coverage ? "true" : "false") << "\n";
  s << "weights = " << to_string(cfg.weight_mode) << "\n";
  s << "lambda = " << csv::format_double(cfg.lambda) << "\n";
  s << "clamp = " << csv::format_double(cfg.clamp.lo) << "," << csv::format_double(cfg.clamp.hi) << "\n";
  s << "seeds = " << cfg.seeds << "\n";
  s << "seed_base = " << cfg.seed_base << "\n";
  s << "resolution = " << csv::format_double(cfg.resolution) << "\n";
  s << "out = " << cfg.output_dir.generic_string() << "\n";
  s << "round = " << (cfg.round_exports ? "true" : "false") << "\n";
  s << "order = " << (cfg.order == RedistributionOrder::UnclassifiableFirst ? "unclassifiable-first" : "duration-first") << "\n";
  s << "check = " << (cfg.check_level == ConservationLevel::Grand ? "grand" : "per-destination") << "\n";
  s << "total_tolerance = " << csv::format_double(cfg.total_tolerance) << "\n";
  s << "conservation_tolerance = " << csv::format_double(cfg.conservation_tolerance) << "\n";
  return s.str();
}

void validate(const PipelineConfig& cfg) {
  if (cfg.inputs.empty()) throw PreconditionError("pipeline needs at least one input");
  if (cfg.registry.empty()) throw PreconditionError("pipeline needs a registry file");
  if (cfg.output_dir.empty()) throw PreconditionError("pipeline needs an output directory");
  if (cfg.missing_destination && !cfg.skip_coverage && cfg.inputs.size() != 3)
    throw PreconditionError("coverage imputation needs exactly three decade inputs");
  if (cfg.seeds == 0) throw PreconditionError("seeds must be >= 1");
  if (!(cfg.conservation_tolerance >= 0)) throw PreconditionError("conservation_tolerance must be >= 0");
  if (!(cfg.total_tolerance >= 0)) throw PreconditionError("total_tolerance must be >= 0");
  if (!(cfg.resolution > 0)) throw PreconditionError("resolution must be positive");
  const fs::path out = fs::weakly_canonical(cfg.output_dir);
  for (const auto& [_, p] : cfg.inputs) {
    const fs::path in = fs::weakly_canonical(p);
    if (in.parent_path() == out || in == out)
      throw PreconditionError("output directory must differ from input location " + p.string());
  }
}

std::string RunManifest::render() const {
  std::ostringstream s;
  s << "[run]\n";
  s << "status = " << (ok ? "ok" : "failed") << "\n";
  if (!failure.empty()) s << "failure = " << failure << "\n";
  s << "config_digest = " << config_digest << "\n";
  s << "\n[stages]\n";
  for (const auto& st : stages) {
    const std::string key = std::to_string(st.decade) + "." + st.stage;
    s << key << ".checksum = " << st.checksum << "\n";
    if (st.conservation) {
      s << key << ".conservation = " << (st.conservation->pass ? "pass" : "fail") << "\n";
      s << key << ".max_residual = " << csv::format_double(st.conservation->max_residual) << "\n";
      s << key << ".max_relative_residual = " << csv::format_double(st.conservation->max_relative_residual) << "\n";
    }
  }
  s << "\n[artifacts]\n";
  for (const auto& [path, digest] : artifacts) s << path << " = " << digest << "\n";
  return s.str();
}

namespace {

class Run {
 public:
  Run(const PipelineConfig& cfg, const EntityRegistry& registry) : cfg_(cfg), registry_(registry) {}

  std::string serialise(const MigrationTable& t) const {
    std::ostringstream s;
    write_table(s, t, registry_);
    return s.str();
  }

  void record(Decade d, std::string stage, const MigrationTable& t,
              std::optional<ConservationResult> check = std::nullopt) {
    manifest.stages.push_back({d, std::move(stage), digest_hex(serialise(t)), std::move(check)});
  }

  void write(const std::string& relative, const std::string& content) {
    const fs::path p = cfg_.output_dir / relative;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw PreconditionError("cannot write " + p.string());
    out << content;
    manifest.artifacts[relative] = digest_hex(content);
  }

  [[noreturn]] void fail(const std::string& why) {
    manifest.ok = false;
    manifest.failure = why;
    write_manifest();
    throw ConservationError(why);
  }

  void check(Decade d, const std::string& stage, const MigrationTable& before, const MigrationTable& after,
             ConservationLevel level, bool exact = false) {
    auto res = conservation_check(before, after, level, exact, cfg_.conservation_tolerance);
    record(d, stage, after, res);
    if (!res.pass)
      fail("conservation check failed at " + std::to_string(d) + "." + stage + " (max residual " +
           csv::format_double(res.max_residual) + ")");
  }

  void write_manifest() {
    fs::create_directories(cfg_.output_dir);
    std::ofstream out(cfg_.output_dir / "manifest.txt", std::ios::binary);
    out << manifest.render();
  }

  RunManifest manifest;

 private:
  const PipelineConfig& cfg_;
  const EntityRegistry& registry_;
};

MigrationTable without(const MigrationTable& t, const EntityId& x) {
  MigrationTable out = t;
  out.erase_destination(x);
  return out;
}

void summary_rows(std::ostringstream& csvout, Decade d, std::string_view stage, const DistributionSummary& s) {
  const auto v = s.values();
  for (std::size_t k = 0; k < v.size(); ++k)
    csvout << d << "," << stage << "," << to_string(s.axis) << "," << DistributionSummary::kNames[k] << ","
           << millions(v[k]) << "," << csv::format_double(v[k]) << "\n";
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  const EntityRegistry registry = load_registry(cfg.registry, cfg.index_maps);
  const WeightVector weights = build_weight_vector(cfg.lambda, cfg.weight_mode);
  Run run(cfg, registry);
  run.manifest.config_digest = digest_hex(canonical_config(cfg));
  fs::create_directories(cfg.output_dir);

  // Nomenclature and index fixes happen during parsing; totals follow.
  std::map<Decade, MigrationTable> input;
  for (const auto& [d, path] : cfg.inputs) {
    ParseOptions po;
    po.decade = d;
    MigrationTable t = read_any_table(path, registry, po);
    run.record(d, "normalize", t);
    t = synthesize_totals(t, cfg.total_tolerance);
    run.record(d, "totals", t);
    input.emplace(d, std::move(t));
  }

  TextReport report;
  report.section("run");
  report.entry("config_digest", run.manifest.config_digest);
  report.entry("quantile_method", "linear interpolation between closest ranks (type 7)");
  report.entry("std_dev", "sample (n - 1)");
  report.entry("community_graph", "symmetrised weights w(u,v) + w(v,u), undirected modularity");
  report.entry("weights", std::string(to_string(weights.mode)));
  std::string wtxt;
  for (double w : weights.w) wtxt += (wtxt.empty() ? "" : ",") + csv::format_double(w);
  report.entry("weight_vector", wtxt);

  std::map<Decade, MigrationTable> tables = input;
  std::optional<EntityId> missing;
  if (cfg.missing_destination && !cfg.skip_coverage) {
    missing = registry.canonicalize_name(*cfg.missing_destination);
    auto it = tables.begin();
    MigrationTable& t0 = it->second;
    const MigrationTable& t1 = std::next(it)->second;
    const MigrationTable& t2 = std::next(it, 2)->second;
    const auto ratios = compute_transfer_ratios(t0, t1, t2, *missing, cfg.clamp);
    ImputeOptions io;
    io.registry = &registry;
    auto imputation = impute_missing_destination(t0, t1, ratios, *missing, io);
    run.check(t0.decade(), "coverage", t0, without(imputation.table, *missing), ConservationLevel::PerDestination);

    const auto rep = imputation_report(t0, imputation.table, *missing, {&t1, &t2});
    std::ostringstream cov;
    write_coverage_report(cov, ratios, imputation, registry);
    run.write("coverage_report.csv", cov.str());

    report.section("coverage");
    report.entry("missing_destination", registry.name_of(*missing));
    report.entry("target_decade", std::to_string(t0.decade()));
    for (const auto& [d, share] : rep.inflow_share)
      report.entry("inflow_share_pct." + std::to_string(d), csv::format_fixed(share * 100, 3));
    std::size_t clamped = 0;
    for (const auto& [_, r] : ratios.ratios) clamped += r.clamped ? 1 : 0;
    report.entry("origins_with_ratio", std::to_string(ratios.ratios.size()));
    report.entry("origins_clamped", std::to_string(clamped));
    report.entry("origins_excluded", std::to_string(ratios.exclusions.size()));
    for (const auto& w : ratios.warnings) report.entry("warning", w);
    for (const auto& w : imputation.warnings) report.entry("warning", w);
    t0 = std::move(imputation.table);
  }

  std::map<Decade, MigrationTable> harmonized;
  std::map<Decade, MigrationTable> exported;
  std::ostringstream summary_csv;
  summary_csv << "decade,stage,axis,statistic,value_millions,value\n";
  for (auto& [d, t] : tables) {
    const MigrationTable pre = t;
    MigrationTable cur = pre;
    MigrationTable after_unclassifiable;
    auto unclassifiable_step = [&] {
      MigrationTable next = redistribute_unclassifiable(cur);
      run.check(d, "unclassifiable", cur, next, cfg.check_level);
      cur = std::move(next);
      after_unclassifiable = cur;
    };
    auto duration_step = [&] {
      MigrationTable next = redistribute_duration(cur, weights);
      run.check(d, "duration", cur, next, cfg.check_level);
      cur = std::move(next);
    };
    if (cfg.order == RedistributionOrder::UnclassifiableFirst) {
      unclassifiable_step();
      duration_step();
    } else {
      duration_step();
      unclassifiable_step();
    }
    run.check(d, "redistribution", pre, cur, cfg.check_level);
    if (cfg.round_exports) {
      MigrationTable rounded = round_largest_remainder(cur);
      run.check(d, "export", round_largest_remainder(pre), rounded, ConservationLevel::PerDestination, true);
      exported.emplace(d, std::move(rounded));
    } else {
      exported.emplace(d, cur);
    }

    report.section("decade." + std::to_string(d) + ".input");
    report.category_shares(category_shares(input.at(d)));
    report.duration_shares(duration_shares(input.at(d)));
    report.section("decade." + std::to_string(d) + ".harmonized");
    report.category_shares(category_shares(cur));
    report.duration_shares(duration_shares(cur));
    for (Axis axis : {Axis::Inflow, Axis::Outflow}) {
      const auto before = summarize_distribution(pre, axis);
      const auto after = summarize_distribution(after_unclassifiable, axis);
      const std::string p = std::string(to_string(axis));
      report.summary(p + ".before", before);
      report.summary(p + ".after", after);
      report.comparison(p + ".delta", compare_summaries(before, after));
      summary_rows(summary_csv, d, "before", before);
      summary_rows(summary_csv, d, "after_unclassifiable", after);
    }
    harmonized.emplace(d, std::move(cur));
  }

  // Every conservation check passed; harmonized tables may now be written.
  for (const auto& [d, t] : exported) run.write("harmonized_" + std::to_string(d) + ".csv", run.serialise(t));
  run.write("summary.csv", summary_csv.str());

  std::vector<const MigrationTable*> ptrs;
  for (const auto& [_, t] : harmonized) ptrs.push_back(&t);
  {
    std::ostringstream s;
    export_plot_data(s, ptrs, {PlotSelector::Kind::AllInflow, {}}, registry);
    run.write("plots/inflow.csv", s.str());
  }
  {
    std::ostringstream s;
    export_plot_data(s, ptrs, {PlotSelector::Kind::AllOutflow, {}}, registry);
    run.write("plots/outflow.csv", s.str());
  }
  if (missing) {
    std::ostringstream s;
    export_plot_data(s, ptrs, {PlotSelector::Kind::EntityInflow, *missing}, registry);
    run.write("plots/missing_inflow.csv", s.str());
  }

  std::ostringstream metrics_csv;
  metrics_csv << "decade,nodes,edges,average_edge_weight,top_in_strength,top_out_strength,communities\n";
  std::map<Decade, std::map<EntityId, int>> partitions;
  for (const auto& [d, t] : harmonized) {
    const MigrationNetwork net = build_network(t);
    const NetworkMetrics m = network_metrics(net);
    int communities = 0;
    MigrationNetwork labelled = net;
    if (!net.nodes.empty()) {
      SeedSweep sweep = sweep_communities(net, cfg.resolution, cfg.seeds, cfg.seed_base);
      communities = sweep.modal_count;
      labelled = std::move(sweep.network);
      partitions[d] = *labelled.communities;
      report.section("network." + std::to_string(d));
      std::string counts;
      for (int c : sweep.counts) counts += (counts.empty() ? "" : ",") + std::to_string(c);
      report.entry("community_counts", counts);
      report.entry("representative_seed", std::to_string(sweep.representative_seed));
    } else {
      report.section("network." + std::to_string(d));
    }
    report.entry("nodes", std::to_string(m.nodes));
    report.entry("edges", std::to_string(m.edges));
    report.entry("average_edge_weight", m.average_edge_weight);
    report.entry("top_in_strength", m.top_in_strength.empty() ? "" : registry.name_of(m.top_in_strength));
    report.entry("top_out_strength", m.top_out_strength.empty() ? "" : registry.name_of(m.top_out_strength));
    report.entry("communities_modal", std::to_string(communities));
    metrics_csv << d << "," << m.nodes << "," << m.edges << "," << csv::format_double(m.average_edge_weight) << ","
                << csv::escape(m.top_in_strength.empty() ? "" : registry.name_of(m.top_in_strength)) << ","
                << csv::escape(m.top_out_strength.empty() ? "" : registry.name_of(m.top_out_strength)) << ","
                << communities << "\n";
    std::ostringstream edges;
    write_edge_list(edges, labelled, registry);
    run.write("network_" + std::to_string(d) + ".csv", edges.str());
  }
  run.write("networks.csv", metrics_csv.str());
  if (partitions.size() > 1) {
    report.section("network.stability");
    for (auto it = partitions.begin(); std::next(it) != partitions.end(); ++it) {
      const auto nx = std::next(it);
      const auto sim = compare_partitions(it->second, nx->second);
      report.entry("ari." + std::to_string(it->first) + "_" + std::to_string(nx->first), sim.score);
    }
  }
  run.write("report.txt", report.str());
  run.write_manifest();
  return run.manifest;
}

}  // namespace migh
