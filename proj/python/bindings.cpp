#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "drisk/dp_effects.hpp"
#include "drisk/error.hpp"
#include "drisk/oracle.hpp"
#include "drisk/risk.hpp"
#include "drisk/run.hpp"
#include "drisk/samplers.hpp"
#include "drisk/synth.hpp"

namespace py = pybind11;
using namespace drisk;

namespace {

KeySchema make_schema(const std::vector<std::pair<std::string, std::uint32_t>>& vars) {
  std::vector<KeyVariable> v;
  for (const auto& [name, card] : vars) v.push_back({name, card});
  return KeySchema(std::move(v));
}

py::dict summary_dict(const Summary& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["sd"] = s.sd;
  py::dict p;
  for (std::size_t i = 0; i < kReportedPercentiles.size(); ++i)
    p[py::float_(kReportedPercentiles[i])] = s.percentiles[i];
  d["percentiles"] = p;
  return d;
}

py::dict report_dict(const RiskReport& r) {
  py::dict d;
  d["model"] = r.model.label();
  d["converged"] = r.converged();
  d["sample_size"] = r.sample_size;
  d["sample_uniques"] = r.star.cells.size();
  d["tau1_star"] = summary_dict(r.star.tau1);
  d["tau2_star"] = summary_dict(r.star.tau2);
  if (r.full) {
    d["tau1"] = summary_dict(r.full->tau1);
    d["tau2"] = summary_dict(r.full->tau2);
  }
  if (r.truth) d["truth"] = py::make_tuple(r.truth->tau1, r.truth->tau2);
  d["cells"] = r.star.cells;
  d["cell_tau1"] = r.star.cell_tau1;
  d["cell_tau2"] = r.star.cell_tau2;
  d["max_rhat"] = r.diagnostics.max_rhat;
  d["kv"] = format_report_kv(r);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Disclosure-risk estimation with Poisson log-linear models and DP random effects";

  // Translators run newest first, so the subclass goes last.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  py::class_<KeySchema>(m, "KeySchema")
      .def(py::init(&make_schema), py::arg("variables"),
           "variables: list of (name, cardinality)")
      .def_property_readonly("num_cells", &KeySchema::num_cells)
      .def("encode", [](const KeySchema& s, std::vector<std::uint32_t> codes) { return s.encode(codes); })
      .def("decode", py::overload_cast<CellId>(&KeySchema::decode, py::const_));

  py::class_<ContingencyTable>(m, "ContingencyTable")
      .def(py::init([](const KeySchema& schema, std::vector<std::pair<CellId, Count>> counts,
                       double pi, std::vector<CellId> zeros,
                       std::optional<std::vector<std::pair<CellId, Count>>> population) {
             return ContingencyTable(schema, std::move(counts), pi, std::move(zeros),
                                     std::move(population));
           }),
           py::arg("schema"), py::arg("counts"), py::arg("pi"),
           py::arg("structural_zeros") = std::vector<CellId>{}, py::arg("population") = py::none())
      .def_property_readonly("sample_size", &ContingencyTable::sample_size)
      .def_property_readonly("num_cells", &ContingencyTable::num_cells)
      .def_property_readonly("sampling_fraction", &ContingencyTable::sampling_fraction)
      .def("nonzero_counts", [](const ContingencyTable& t) {
        auto c = t.nonzero_counts();
        return std::vector<std::pair<CellId, Count>>(c.begin(), c.end());
      })
      .def("count", &ContingencyTable::count);

  m.def("ingest_microdata",
        [](const std::vector<std::vector<std::uint32_t>>& rows, const KeySchema& schema, double pi) {
          return ingest_microdata(rows, schema, pi);
        });
  m.def("sample_uniques", &sample_uniques);
  m.def("true_risks", [](const ContingencyTable& t) {
    const auto r = true_risks(t);
    return py::make_tuple(r.tau1, r.tau2);
  });

  m.def("cell_risk_closed_form", [](double lambda, double pi) {
    const auto r = cell_risk_closed_form(lambda, pi);
    return py::make_tuple(r.tau1, r.tau2);
  }, py::arg("lam"), py::arg("pi"));
  m.def("marginal_cell_loglik", &marginal_cell_loglik, py::arg("f"), py::arg("scaled_xi"),
        py::arg("shape"), py::arg("rate"));
  m.def("partition_log_prior", [](std::vector<std::size_t> sizes, double mass) {
    return partition_log_prior(sizes, mass);
  });

  m.def("ipf_fit", [](const ContingencyTable& t, const std::string& kind) {
    const auto r = ipf_fit(t, parse_design_kind(kind));
    py::dict d;
    d["cells"] = r.cells;
    d["fitted"] = r.fitted;
    d["iterations"] = r.iterations;
    d["max_margin_error"] = r.max_margin_error;
    d["converged"] = r.converged;
    return d;
  });

  auto o = m.def_submodule("oracle", "Brute-force references");
  o.def("bell_number", &oracle::bell_number);
  o.def("enumerate_partitions", &oracle::enumerate_partitions);
  o.def("exact_partition_posterior",
        [](std::vector<double> f, std::vector<double> s, double mass, double shape, double rate) {
          auto p = oracle::exact_partition_posterior(f, s, mass, shape, rate);
          return py::make_tuple(p.partitions, p.probability);
        });
  o.def("quadrature", &oracle::quadrature, py::arg("fn"), py::arg("lo"), py::arg("hi"),
        py::arg("tol") = 1e-10);

  m.def("run_config_hash", [](const std::string& text) { return RunConfig::from_json(text).hash(); });
  m.def("estimate",
        [](const std::string& config_json, const ContingencyTable& table,
           std::vector<std::string> overrides) {
          const auto config = RunConfig::from_json(config_json, {}, overrides);
          RiskReport r;
          {
            py::gil_scoped_release release;
            r = estimate(config, table);
          }
          return report_dict(r);
        },
        py::arg("config_json"), py::arg("table"), py::arg("overrides") = std::vector<std::string>{},
        "Estimate risks for an in-memory table; input paths in the config are ignored.");
  m.def("run", [](const std::filesystem::path& config_path, std::vector<std::string> overrides) {
    const auto config = RunConfig::load(config_path, overrides);
    RiskReport r;
    {
      py::gil_scoped_release release;
      r = run(config);
    }
    return report_dict(r);
  }, py::arg("config_path"), py::arg("overrides") = std::vector<std::string>{});

  m.def("synth_sample",
        [](const std::string& synth_json, std::size_t replicates) {
          const auto cfg = SynthConfig::from_json(synth_json);
          Rng rng(cfg.seed);
          const auto pop = synth_population(cfg, rng);
          py::list samples;
          for (std::size_t r = 0; r < replicates; ++r) {
            auto s = draw_sample(pop, cfg.pi, rng);
            samples.append(py::make_tuple(s.table, s.truth.tau1, s.truth.tau2));
          }
          return py::make_tuple(pop.lambda, samples);
        },
        py::arg("synth_json"), py::arg("replicates") = 1,
        "Returns (lambda per cell, [(table, true tau1, true tau2), ...]).");
}
