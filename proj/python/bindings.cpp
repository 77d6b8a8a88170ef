#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "migh/coverage.hpp"
#include "migh/diagnostics.hpp"
#include "migh/error.hpp"
#include "migh/ingest.hpp"
#include "migh/network.hpp"
#include "migh/pipeline.hpp"
#include "migh/redistribute.hpp"
#include "migh/registry.hpp"
#include "migh/synth.hpp"

namespace py = pybind11;
using namespace migh;

namespace {

WeightMode weight_mode(const std::string& s) {
  if (s == "paper") return WeightMode::PaperFixed;
  if (s == "exp") return WeightMode::NormalizedExponential;
  throw PreconditionError("weights must be paper or exp");
}

Axis axis(const std::string& s) {
  if (s == "inflow") return Axis::Inflow;
  if (s == "outflow") return Axis::Outflow;
  throw PreconditionError("axis must be inflow or outflow");
}

py::dict summary_dict(const DistributionSummary& s) {
  py::dict d;
  const auto v = s.values();
  for (std::size_t k = 0; k < v.size(); ++k) d[py::str(std::string(DistributionSummary::kNames[k]))] = v[k];
  d["n"] = s.n;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Census migration table harmonization";

  // Carries the process exit code of the error class as `.code`.
  static PyObject* error_type = py::exception<Error>(m, "MighError").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type)(e.what());
      exc.attr("code") = static_cast<int>(e.code());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  py::class_<EntityRegistry>(m, "Registry")
      .def("canonicalize", [](const EntityRegistry& r, const std::string& name) { return r.canonicalize_name(name).value; })
      .def("name_of", [](const EntityRegistry& r, const std::string& id) { return r.name_of(EntityId(id)); })
      .def("ids", [](const EntityRegistry& r, Decade d) {
        std::vector<std::string> out;
        for (const auto& id : r.valid_entities(d)) out.push_back(id.value);
        return out;
      });

  m.def("load_registry", [](const std::filesystem::path& registry, std::optional<std::filesystem::path> index_maps) {
    return load_registry(registry, index_maps);
  }, py::arg("registry"), py::arg("index_maps") = py::none());
  m.def("write_registry", [](const std::filesystem::path& registry, const std::filesystem::path& index_maps,
                             const EntityRegistry& r) {
    std::ofstream a(registry), b(index_maps);
    if (!a || !b) throw PreconditionError("cannot write registry files");
    write_registry(a, r);
    write_index_maps(b, r);
  });
  m.def("synth_registry", [](int n) { return synth_registry(n, {1991, 2001, 2011}); }, py::arg("n_entities"));

  py::class_<MigrationTable>(m, "Table")
      .def_property_readonly("decade", &MigrationTable::decade)
      .def("destinations", [](const MigrationTable& t) {
        std::vector<std::string> out;
        for (const auto& id : t.destinations()) out.push_back(id.value);
        return out;
      })
      .def("grand_total", &MigrationTable::grand_total)
      .def("destination_total", [](const MigrationTable& t, const std::string& id) { return t.destination_total(EntityId(id)); })
      .def("interstate_flow", [](const MigrationTable& t, const std::string& o, const std::string& d) {
        return t.interstate_flow(EntityId(o), EntityId(d));
      })
      .def("record_count", &MigrationTable::record_count)
      .def("__eq__", [](const MigrationTable& a, const MigrationTable& b) { return a == b; })
      .def("to_csv", [](const MigrationTable& t, const EntityRegistry& r) {
        std::ostringstream s;
        write_table(s, t, r);
        return s.str();
      });

  m.def("read_table", [](const std::filesystem::path& p, const EntityRegistry& r) { return read_any_table(p, r); });
  m.def("write_table", [](const std::filesystem::path& p, const MigrationTable& t, const EntityRegistry& r, bool totals) {
    write_table(p, t, r, {.include_totals = totals});
  }, py::arg("path"), py::arg("table"), py::arg("registry"), py::arg("include_totals") = true);
  m.def("synthesize_totals", &synthesize_totals, py::arg("table"), py::arg("tolerance") = 0.0);
  m.def("round_largest_remainder", &round_largest_remainder);

  m.def("weight_vector", [](double lambda, const std::string& mode) {
    const auto w = build_weight_vector(lambda, weight_mode(mode)).w;
    return std::vector<double>(w.begin(), w.end());
  }, py::arg("lam") = 0.4, py::arg("mode") = "paper");
  m.def("redistribute_unclassifiable", [](const MigrationTable& t, const std::string& granularity) {
    if (granularity != "per-bin" && granularity != "row-total")
      throw PreconditionError("granularity must be per-bin or row-total");
    return redistribute_unclassifiable(
        t, granularity == "per-bin" ? UnclassifiableGranularity::PerBin : UnclassifiableGranularity::RowTotal);
  }, py::arg("table"), py::arg("granularity") = "per-bin");
  m.def("redistribute_duration", [](const MigrationTable& t, double lambda, const std::string& mode) {
    return redistribute_duration(t, build_weight_vector(lambda, weight_mode(mode)));
  }, py::arg("table"), py::arg("lam") = 0.4, py::arg("mode") = "paper");
  m.def("conservation_check", [](const MigrationTable& before, const MigrationTable& after, bool grand, double tol) {
    const auto r = conservation_check(before, after, grand ? ConservationLevel::Grand : ConservationLevel::PerDestination,
                                      false, tol);
    py::dict d;
    d["pass"] = r.pass;
    d["max_residual"] = r.max_residual;
    d["max_relative_residual"] = r.max_relative_residual;
    return d;
  }, py::arg("before"), py::arg("after"), py::arg("grand") = false, py::arg("tolerance") = 1e-6);

  m.def("impute_missing_destination", [](const MigrationTable& t0, const MigrationTable& t1, const MigrationTable& t2,
                                         const std::string& missing) {
    const EntityId x(missing);
    return impute_missing_destination(t0, t1, compute_transfer_ratios(t0, t1, t2, x), x).table;
  });
  m.def("inflow_share", [](const MigrationTable& t, const std::string& id) { return interstate_inflow_share(t, EntityId(id)); });
  m.def("summarize", [](const MigrationTable& t, const std::string& a) { return summary_dict(summarize_distribution(t, axis(a))); },
        py::arg("table"), py::arg("axis") = "inflow");

  m.def("network_metrics", [](const MigrationTable& t) {
    const auto n = network_metrics(build_network(t));
    py::dict d;
    d["nodes"] = n.nodes;
    d["edges"] = n.edges;
    d["total_weight"] = n.total_weight;
    d["average_edge_weight"] = n.average_edge_weight;
    d["top_in_strength"] = n.top_in_strength.value;
    d["top_out_strength"] = n.top_out_strength.value;
    return d;
  });
  m.def("communities", [](const MigrationTable& t, double resolution, std::size_t seeds, std::uint64_t base) {
    const auto s = sweep_communities(build_network(t), resolution, seeds, base);
    std::map<std::string, int> out;
    for (const auto& [id, c] : *s.network.communities) out[id.value] = c;
    return py::make_tuple(s.modal_count, out);
  }, py::arg("table"), py::arg("resolution") = 1.0, py::arg("seeds") = 50, py::arg("seed_base") = 0);

  m.def("generate", [](int n, std::uint64_t seed, double u_rate, double ns_rate, std::optional<std::string> mask) {
    SynthSpec spec;
    spec.n_entities = n;
    spec.rng_seed = seed;
    spec.unclassifiable_rate = u_rate;
    spec.notstated_rate = ns_rate;
    if (mask) spec.masked_destination = EntityId(*mask);
    const SynthSystem s = generate(spec);
    return py::make_tuple(std::vector<MigrationTable>(s.biased.begin(), s.biased.end()),
                          std::vector<MigrationTable>(s.ground_truth.begin(), s.ground_truth.end()));
  }, py::arg("n_entities") = 12, py::arg("seed") = 1, py::arg("u_rate") = 0.0, py::arg("ns_rate") = 0.0,
     py::arg("mask") = py::none());

  m.def("run_pipeline", [](const std::filesystem::path& config, const std::map<std::string, std::string>& overrides) {
    std::ifstream in(config);
    if (!in) throw PreconditionError("cannot read " + config.string());
    PipelineConfig cfg = parse_config(in, config.parent_path());
    for (const auto& [k, v] : overrides) apply_config_entry(cfg, k, v);
    const RunManifest r = run_pipeline(cfg);
    py::dict d;
    d["ok"] = r.ok;
    d["config_digest"] = r.config_digest;
    d["artifacts"] = r.artifacts;
    d["output_dir"] = cfg.output_dir;
    return d;
  }, py::arg("config"), py::arg("overrides") = std::map<std::string, std::string>{});
}
