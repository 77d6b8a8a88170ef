// Command line front end: one subcommand per harmonization stage plus the full pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "migh/coverage.hpp"
#include "migh/csv.hpp"
#include "migh/diagnostics.hpp"
#include "migh/error.hpp"
#include "migh/ingest.hpp"
#include "migh/network.hpp"
#include "migh/pipeline.hpp"
#include "migh/redistribute.hpp"
#include "migh/registry.hpp"
#include "migh/synth.hpp"

namespace fs = std::filesystem;
using namespace migh;

namespace {

struct RegistryArgs {
  std::string registry = std::string(MIGH_DATA_DIR) + "/registry.csv";
  std::string index_maps = std::string(MIGH_DATA_DIR) + "/index_maps.csv";

  void attach(CLI::App* cmd) {
    cmd->add_option("--registry", registry, "Registry file")->capture_default_str();
    cmd->add_option("--index-maps", index_maps, "Index-map file (empty to skip)")->capture_default_str();
  }
  EntityRegistry load() const {
    std::optional<fs::path> idx;
    if (!index_maps.empty()) idx = index_maps;
    return load_registry(registry, idx);
  }
};

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + p.string());
  return out;
}

ClampBounds parse_clamp(const std::string& text) {
  if (text == "none") return ClampBounds::none();
  const auto parts = csv::split_line(text);
  auto lo = parts.size() == 2 ? csv::parse_double(parts[0]) : std::nullopt;
  auto hi = parts.size() == 2 ? csv::parse_double(parts[1]) : std::nullopt;
  if (!lo || !hi || *lo <= 0 || *hi < *lo) throw PreconditionError("--clamp expects lo,hi with 0 < lo <= hi");
  return {*lo, *hi};
}

WeightMode parse_weights(const std::string& s) {
  return s == "exp" ? WeightMode::NormalizedExponential : WeightMode::PaperFixed;
}

MigrationTable read_input(const std::string& path, const EntityRegistry& reg, double tolerance) {
  return synthesize_totals(read_any_table(path, reg), tolerance);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmonize multi-decade origin-destination migration tables"};
  app.require_subcommand(1);

  // normalize
  RegistryArgs norm_reg;
  std::string norm_in, norm_out;
  std::optional<int> norm_decade;
  double norm_tol = 0;
  bool norm_totals = true;
  auto* normalize = app.add_subcommand("normalize", "Canonicalize names and indices, synthesize totals");
  norm_reg.attach(normalize);
  normalize->add_option("--in", norm_in, "Input table (long or wide layout)")->required()->check(CLI::ExistingFile);
  normalize->add_option("--out", norm_out, "Output canonical CSV")->required();
  normalize->add_option("--decade", norm_decade, "Expected decade");
  normalize->add_option("--total-tolerance", norm_tol, "Absolute tolerance for declared totals");
  normalize->add_flag("!--no-totals", norm_totals, "Do not synthesize totals");

  // impute-coverage
  RegistryArgs cov_reg;
  std::string cov_t0, cov_t1, cov_t2, cov_missing, cov_out, cov_report, cov_clamp = "0.1,10";
  bool cov_early_only = false;
  auto* impute = app.add_subcommand("impute-coverage", "Backcast a destination missing from the earliest decade");
  cov_reg.attach(impute);
  impute->add_option("--t0", cov_t0, "Earliest decade (destination missing)")->required()->check(CLI::ExistingFile);
  impute->add_option("--t1", cov_t1, "Middle decade")->required()->check(CLI::ExistingFile);
  impute->add_option("--t2", cov_t2, "Latest decade")->required()->check(CLI::ExistingFile);
  impute->add_option("--missing", cov_missing, "Missing destination (any alias)")->required();
  impute->add_option("--clamp", cov_clamp, "Ratio clamp lo,hi or 'none'")->capture_default_str();
  impute->add_option("--out", cov_out, "Imputed t0 table")->required();
  impute->add_option("--report", cov_report, "Per-origin ratio report CSV");
  impute->add_flag("--early-only", cov_early_only, "Use the single t0/t1 ratio instead of the smoothed one");

  // redistribute
  RegistryArgs red_reg;
  std::string red_in, red_out, red_weights = "paper", red_order = "unclassifiable-first", red_check = "per-destination",
                              red_gran = "per-bin";
  double red_lambda = 0.4;
  bool red_round = true;
  auto* redistribute = app.add_subcommand("redistribute", "Reallocate unclassifiable and not-stated migrants");
  red_reg.attach(redistribute);
  redistribute->add_option("--in", red_in, "Input table")->required()->check(CLI::ExistingFile);
  redistribute->add_option("--out", red_out, "Output table")->required();
  redistribute->add_option("--weights", red_weights, "Duration weights")
      ->check(CLI::IsMember({"paper", "exp"}))->capture_default_str();
  redistribute->add_option("--lambda", red_lambda, "Decay rate for exp weights")->capture_default_str();
  redistribute->add_option("--order", red_order, "Step order")
      ->check(CLI::IsMember({"unclassifiable-first", "duration-first"}))->capture_default_str();
  redistribute->add_option("--check", red_check, "Conservation check level")
      ->check(CLI::IsMember({"grand", "per-destination"}))->capture_default_str();
  redistribute->add_option("--granularity", red_gran, "Unclassifiable split")
      ->check(CLI::IsMember({"per-bin", "row-total"}))->capture_default_str();
  redistribute->add_flag("!--no-round", red_round, "Keep fractional counts in the output");

  // report
  RegistryArgs rep_reg;
  std::vector<std::string> rep_in;
  bool rep_stats = false;
  std::string rep_plots, rep_out, rep_entity;
  auto* report = app.add_subcommand("report", "Shares, distribution summaries and plot-ready exports");
  rep_reg.attach(report);
  report->add_option("--in", rep_in, "One or more tables")->required()->check(CLI::ExistingFile);
  report->add_flag("--stats", rep_stats, "Include in/out-flow distribution summaries");
  report->add_option("--plots", rep_plots, "Directory for plot-ready CSVs");
  report->add_option("--entity", rep_entity, "Also export per-origin in-flow to this entity");
  report->add_option("--out", rep_out, "Report file (default stdout)");

  // network
  RegistryArgs net_reg;
  std::string net_in, net_out, net_bin;
  double net_res = 1.0;
  std::size_t net_seeds = 50;
  std::uint64_t net_base = 0;
  auto* network = app.add_subcommand("network", "Build the migration network and detect communities");
  net_reg.attach(network);
  network->add_option("--in", net_in, "Harmonized table")->required()->check(CLI::ExistingFile);
  network->add_option("--out", net_out, "Output directory")->required();
  network->add_option("--resolution", net_res, "Modularity resolution")->capture_default_str();
  network->add_option("--seeds", net_seeds, "Louvain seeds in the sweep")->capture_default_str();
  network->add_option("--seed-base", net_base, "First seed")->capture_default_str();
  network->add_option("--bin", net_bin, "Restrict edges to one duration bin (e.g. lt1)");

  // synth
  SynthSpec spec;
  std::string syn_out, syn_mask;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic three-decade system with ground truth");
  synth->add_option("--entities", spec.n_entities, "Number of entities")->capture_default_str();
  synth->add_option("--seed", spec.rng_seed, "RNG seed")->capture_default_str();
  synth->add_option("--mask", syn_mask, "Destination removed from the earliest decade");
  synth->add_option("--u-rate", spec.unclassifiable_rate, "Unclassifiable rate")->capture_default_str();
  synth->add_option("--ns-rate", spec.notstated_rate, "Not-stated rate")->capture_default_str();
  synth->add_option("--noise", spec.noise_sigma, "Log-normal noise sigma")->capture_default_str();
  synth->add_option("--scale", spec.base_flow_scale, "Base flow scale")->capture_default_str();
  synth->add_option("--blocks", spec.planted_blocks, "Planted community blocks")->capture_default_str();
  synth->add_option("--affinity", spec.block_affinity, "In-block flow multiplier")->capture_default_str();
  synth->add_flag("--invert-duration-mask", spec.invert_duration_mask, "Take not-stated mass mostly from old bins");
  synth->add_option("--out", syn_out, "Output directory")->required();

  // pipeline
  std::string pipe_config;
  std::vector<std::string> pipe_set;
  std::string pipe_out;
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a configuration file");
  pipeline->add_option("--config", pipe_config, "key = value configuration")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--set", pipe_set, "Override, key=value (repeatable)");
  pipeline->add_option("--out", pipe_out, "Output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*normalize) {
      const auto reg = norm_reg.load();
      ParseOptions po;
      if (norm_decade) po.decade = *norm_decade;
      MigrationTable t = read_any_table(norm_in, reg, po);
      if (norm_totals) t = synthesize_totals(t, norm_tol);
      write_table(fs::path(norm_out), t, reg);
      std::cout << "normalized " << t.destinations().size() << " destinations, " << t.record_count()
                << " records\n";
    } else if (*impute) {
      const auto reg = cov_reg.load();
      const auto t0 = read_input(cov_t0, reg, 0), t1 = read_input(cov_t1, reg, 0), t2 = read_input(cov_t2, reg, 0);
      const EntityId x = reg.canonicalize_name(cov_missing);
      const auto ratios = compute_transfer_ratios(t0, t1, t2, x, parse_clamp(cov_clamp));
      ImputeOptions io;
      io.registry = &reg;
      if (cov_early_only) io.ratio = RatioChoice::EarlyOnly;
      const auto imp = impute_missing_destination(t0, t1, ratios, x, io);
      write_table(fs::path(cov_out), imp.table, reg);
      if (!cov_report.empty()) {
        auto out = open_out(cov_report);
        write_coverage_report(out, ratios, imp, reg);
      }
      for (const auto& w : ratios.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& w : imp.warnings) std::cerr << "warning: " << w << "\n";
      const auto rep = imputation_report(t0, imp.table, x, {&t1, &t2});
      for (const auto& [d, share] : rep.inflow_share)
        std::cout << reg.name_of(x) << " inflow share " << d << ": " << csv::format_fixed(share * 100, 3) << "%\n";
    } else if (*redistribute) {
      const auto reg = red_reg.load();
      const MigrationTable before = read_input(red_in, reg, 0);
      const auto w = build_weight_vector(red_lambda, parse_weights(red_weights));
      const auto level = red_check == "grand" ? ConservationLevel::Grand : ConservationLevel::PerDestination;
      const auto gran = red_gran == "row-total" ? UnclassifiableGranularity::RowTotal : UnclassifiableGranularity::PerBin;
      MigrationTable t = before;
      auto step = [&](const std::string& name, MigrationTable next) {
        const auto res = conservation_check(t, next, level);
        std::cout << name << ": max residual " << csv::format_double(res.max_residual) << "\n";
        if (!res.pass) throw ConservationError(name + " step failed the conservation check");
        t = std::move(next);
      };
      if (red_order == "unclassifiable-first") {
        step("unclassifiable", redistribute_unclassifiable(t, gran));
        step("duration", redistribute_duration(t, w));
      } else {
        step("duration", redistribute_duration(t, w));
        step("unclassifiable", redistribute_unclassifiable(t, gran));
      }
      if (red_round) {
        const MigrationTable rounded = round_largest_remainder(t);
        const auto res = conservation_check(round_largest_remainder(before), rounded,
                                            ConservationLevel::PerDestination, true);
        if (!res.pass) throw ConservationError("rounded export changed a destination total");
        t = rounded;
      }
      write_table(fs::path(red_out), t, reg);
    } else if (*report) {
      const auto reg = rep_reg.load();
      std::vector<MigrationTable> tables;
      for (const auto& p : rep_in) tables.push_back(read_input(p, reg, 0));
      TextReport r;
      r.section("report");
      r.entry("quantile_method", "linear interpolation between closest ranks (type 7)");
      r.entry("std_dev", "sample (n - 1)");
      for (const auto& t : tables) {
        const std::string d = std::to_string(t.decade());
        r.section("decade." + d);
        r.entry("destinations", std::to_string(t.destinations().size()));
        r.entry("grand_total", t.grand_total());
        r.category_shares(category_shares(t));
        r.duration_shares(duration_shares(t));
        if (rep_stats) {
          r.summary("inflow", summarize_distribution(t, Axis::Inflow));
          r.summary("outflow", summarize_distribution(t, Axis::Outflow));
        }
      }
      if (rep_out.empty()) {
        std::cout << r.str();
      } else {
        auto out = open_out(rep_out);
        out << r.str();
      }
      if (!rep_plots.empty()) {
        std::vector<const MigrationTable*> ptrs;
        for (const auto& t : tables) ptrs.push_back(&t);
        auto emit = [&](const std::string& name, PlotSelector sel) {
          auto out = open_out(fs::path(rep_plots) / name);
          export_plot_data(out, ptrs, sel, reg);
        };
        emit("inflow.csv", {PlotSelector::Kind::AllInflow, {}});
        emit("outflow.csv", {PlotSelector::Kind::AllOutflow, {}});
        if (!rep_entity.empty())
          emit("entity_inflow.csv", {PlotSelector::Kind::EntityInflow, reg.canonicalize_name(rep_entity)});
      }
    } else if (*network) {
      const auto reg = net_reg.load();
      const MigrationTable t = read_input(net_in, reg, 0);
      std::optional<DurationBin> bin;
      if (!net_bin.empty()) {
        bin = parse_bin(net_bin);
        if (!bin || *bin == DurationBin::Total) throw PreconditionError("--bin expects a stored duration bin");
      }
      const MigrationNetwork net = build_network(t, bin);
      const auto m = network_metrics(net);
      fs::create_directories(net_out);
      MigrationNetwork labelled = net;
      int modal = 0;
      if (!net.nodes.empty()) {
        auto sweep = sweep_communities(net, net_res, net_seeds, net_base);
        modal = sweep.modal_count;
        labelled = std::move(sweep.network);
      }
      const std::string d = std::to_string(t.decade());
      {
        auto out = open_out(fs::path(net_out) / ("network_" + d + ".csv"));
        write_edge_list(out, labelled, reg);
      }
      TextReport r;
      r.section("network." + d);
      r.entry("community_graph", "symmetrised weights w(u,v) + w(v,u), undirected modularity");
      r.entry("nodes", std::to_string(m.nodes));
      r.entry("edges", std::to_string(m.edges));
      r.entry("average_edge_weight", m.average_edge_weight);
      r.entry("top_in_strength", m.top_in_strength.empty() ? "" : reg.name_of(m.top_in_strength));
      r.entry("top_out_strength", m.top_out_strength.empty() ? "" : reg.name_of(m.top_out_strength));
      r.entry("communities_modal", std::to_string(modal));
      r.entry("seeds", std::to_string(net_seeds));
      r.entry("resolution", net_res);
      auto out = open_out(fs::path(net_out) / ("metrics_" + d + ".txt"));
      out << r.str();
      std::cout << r.str();
    } else if (*synth) {
      const EntityRegistry reg = synth_registry(spec.n_entities, spec.decades);
      if (!syn_mask.empty()) spec.masked_destination = reg.canonicalize_name(syn_mask);
      const SynthSystem sys = generate(spec);
      const fs::path dir = syn_out;
      fs::create_directories(dir);
      {
        auto out = open_out(dir / "registry.csv");
        write_registry(out, reg);
      }
      {
        auto out = open_out(dir / "index_maps.csv");
        write_index_maps(out, reg);
      }
      for (std::size_t k = 0; k < 3; ++k) {
        const std::string d = std::to_string(spec.decades[k]);
        write_table(dir / ("input_" + d + ".csv"), sys.biased[k], reg, {.include_totals = false});
        write_table(dir / ("truth_" + d + ".csv"), sys.ground_truth[k], reg);
      }
      {
        auto out = open_out(dir / "sidecar.csv");
        write_sidecar(out, sys.sidecar, reg);
      }
      auto cfg = open_out(dir / "pipeline.cfg");
      for (Decade d : spec.decades) cfg << "input." << d << " = input_" << d << ".csv\n";
      cfg << "registry = registry.csv\nindex_maps = index_maps.csv\n";
      if (spec.masked_destination) cfg << "missing = " << spec.masked_destination->value << "\n";
      cfg << "out = harmonized\n";
      std::cout << "wrote synthetic system to " << dir.string() << "\n";
    } else if (*pipeline) {
      std::ifstream in(pipe_config);
      const fs::path base = fs::path(pipe_config).parent_path();
      PipelineConfig cfg = parse_config(in, base);
      for (const auto& kv : pipe_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw PreconditionError("--set expects key=value");
        apply_config_entry(cfg, std::string_view(kv).substr(0, eq), std::string_view(kv).substr(eq + 1));
      }
      if (!pipe_out.empty()) cfg.output_dir = pipe_out;
      const RunManifest m = run_pipeline(cfg);
      std::cout << "config " << m.config_digest << ", " << m.artifacts.size() << " artifacts written to "
                << cfg.output_dir.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
