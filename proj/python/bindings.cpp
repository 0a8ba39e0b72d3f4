#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wonham/counterexample.hpp"
#include "wonham/filtering.hpp"
#include "wonham/harness.hpp"
#include "wonham/metrics.hpp"
#include "wonham/stability.hpp"

namespace py = pybind11;
using namespace wonham;

namespace {

ObservationModel model_of(const Vector& h, double sigma) { return ObservationModel::make(h, sigma); }

ObservationPath path_of(const std::vector<double>& increments, double dt) {
  ObservationPath obs;
  obs.dt = dt;
  obs.increments = increments;
  return obs;
}

Matrix stack(const std::vector<Vector>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = rows[k];
  return out;
}

py::dict estimate_dict(const LyapunovEstimate& est) {
  std::vector<double> means, errors, slopes;
  for (const auto& m : est.mean_distance) {
    means.push_back(m.mean);
    errors.push_back(m.std_error);
  }
  for (const auto& t : est.per_trial) slopes.push_back(t.slope);
  py::dict d;
  d["exponent"] = est.exponent;
  d["std_error"] = est.std_error;
  d["trials"] = est.trials;
  d["degenerate_trials"] = est.degenerate_trials;
  d["all_degenerate"] = est.all_degenerate;
  d["report_times"] = est.report_times;
  d["mean_distance"] = means;
  d["distance_std_error"] = errors;
  d["slopes"] = slopes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wonham filter stability lab";

  // Messages carry the error kind, e.g. "[RowSumNonZero] row 1 sums to 1".
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&] { return py::exception<Error>(m, "WonhamError", PyExc_ValueError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type.get_stored(),
                    ("[" + std::string(to_string(e.kind())) + "] " + e.what()).c_str());
    }
  });

  m.def("validate_generator", [](const Matrix& q) { return GeneratorMatrix::validate(q).rates(); },
        py::arg("q"), "Validated generator with its diagonal recomputed.");
  m.def("invariant_measure",
        [](const Matrix& q) { return invariant_measure(GeneratorMatrix::validate(q)).values(); },
        py::arg("q"));
  m.def("transition_matrix",
        [](const Matrix& q, double dt) { return transition_matrix(GeneratorMatrix::validate(q), dt); },
        py::arg("q"), py::arg("dt"));
  m.def("expm", &expm, py::arg("a"));
  m.def("decompose_classes",
        [](const Matrix& q) { return decompose_classes(GeneratorMatrix::validate(q)).classes; },
        py::arg("q"));

  m.def(
      "sample_path",
      [](const Matrix& q, const Vector& init, double horizon, std::uint64_t seed) {
        Rng rng(seed);
        const auto path = sample_path(GeneratorMatrix::validate(q), ProbabilityVector::from(init),
                                      horizon, rng);
        return py::make_tuple(path.jump_times, path.states);
      },
      py::arg("q"), py::arg("init"), py::arg("horizon"), py::arg("seed") = 0,
      "Exact path on [0, horizon]: (jump_times, states).");
  m.def(
      "simulate",
      [](const Matrix& q, const Vector& h, double sigma, const Vector& init, double horizon,
         double dt, std::uint64_t seed) {
        Rng rng(seed);
        const auto path = sample_path(GeneratorMatrix::validate(q), ProbabilityVector::from(init),
                                      horizon, rng);
        const auto obs = synthesize_observations(path, model_of(h, sigma), dt, rng);
        py::dict d;
        d["jump_times"] = path.jump_times;
        d["states"] = path.states;
        d["increments"] = obs.increments;
        d["dt"] = dt;
        return d;
      },
      py::arg("q"), py::arg("h"), py::arg("sigma"), py::arg("init"), py::arg("horizon"),
      py::arg("dt"), py::arg("seed") = 0, "Chain path and observation increments.");
  m.def(
      "run_filter",
      [](const Matrix& q, const Vector& h, double sigma, const Vector& init,
         const std::vector<double>& increments, double dt) {
        const auto traj = run_filter(ProbabilityVector::from(init), path_of(increments, dt),
                                     GeneratorMatrix::validate(q), model_of(h, sigma));
        return py::make_tuple(stack(traj.pis), traj.log_mass);
      },
      py::arg("q"), py::arg("h"), py::arg("sigma"), py::arg("init"), py::arg("increments"),
      py::arg("dt"), "Filter trajectory: (pis with one row per grid time, log_mass).");
  m.def(
      "run_smoother",
      [](const Matrix& q, const Vector& h, double sigma, const Vector& init,
         const std::vector<double>& increments, double dt) {
        const auto run = run_smoother(ProbabilityVector::from(init), path_of(increments, dt),
                                      GeneratorMatrix::validate(q), model_of(h, sigma));
        std::vector<Matrix> rhos;
        for (const auto& r : run.rhos) rhos.push_back(r.rho);
        return py::make_tuple(rhos, run.floor_dominates);
      },
      py::arg("q"), py::arg("h"), py::arg("sigma"), py::arg("init"), py::arg("increments"),
      py::arg("dt"));
  m.def(
      "zakai_propagator",
      [](const Matrix& q, const Vector& h, double sigma, const std::vector<double>& increments,
         double dt) {
        const auto j = zakai_propagator(path_of(increments, dt), GeneratorMatrix::validate(q),
                                        model_of(h, sigma));
        return py::make_tuple(j.matrix, j.log_scale);
      },
      py::arg("q"), py::arg("h"), py::arg("sigma"), py::arg("increments"), py::arg("dt"),
      "(matrix, log_scale) with J = matrix * exp(log_scale).");

  m.def("l1_distance", &l1_distance, py::arg("p"), py::arg("q"));
  m.def("hilbert_metric", [](const Vector& p, const Vector& q) { return hilbert_metric(p, q).value(); },
        py::arg("p"), py::arg("q"), "Hilbert projective metric; inf when supports differ.");
  m.def("birkhoff_psi", &birkhoff_psi, py::arg("a"));
  m.def("birkhoff_tau", &birkhoff_tau, py::arg("a"));

  m.def("bound_mu_row", [](const Matrix& q) { return bound_mu_row(GeneratorMatrix::validate(q)); },
        py::arg("q"));
  m.def("bound_geo", [](const Matrix& q) { return bound_geo(GeneratorMatrix::validate(q)); },
        py::arg("q"));
  m.def(
      "prefactors",
      [](const Vector& nu, const Vector& beta) {
        const auto p = prefactors(ProbabilityVector::from(nu), ProbabilityVector::from(beta));
        return py::make_tuple(p.a, p.b);
      },
      py::arg("nu"), py::arg("beta"));
  m.def(
      "lyapunov_estimate",
      [](const Matrix& q, const Vector& h, double sigma, const Vector& nu, const Vector& beta,
         double horizon, double dt, std::size_t trials, std::uint64_t seed, unsigned threads,
         const std::vector<double>& report_times) {
        MonteCarloOptions opt{horizon, dt, trials, seed, threads};
        py::gil_scoped_release release;
        const auto est = lyapunov_estimate(GeneratorMatrix::validate(q), model_of(h, sigma),
                                           ProbabilityVector::from(nu), ProbabilityVector::from(beta),
                                           opt, report_times);
        py::gil_scoped_acquire acquire;
        return estimate_dict(est);
      },
      py::arg("q"), py::arg("h"), py::arg("sigma"), py::arg("nu"), py::arg("beta"),
      py::arg("horizon") = 10.0, py::arg("dt") = 1e-3, py::arg("trials") = 100,
      py::arg("seed") = 0, py::arg("threads") = 1, py::arg("report_times") = std::vector<double>{});
  m.def(
      "d_moment",
      [](const Matrix& q, const Vector& h, double r) {
        return d_moment(GeneratorMatrix::validate(q), h, r);
      },
      py::arg("q"), py::arg("h"), py::arg("r"));
  m.def(
      "class_moment",
      [](const Matrix& q, const Vector& h, std::size_t power) {
        return class_moment(GeneratorMatrix::validate(q), h, power);
      },
      py::arg("q"), py::arg("h"), py::arg("power"));
  m.def(
      "check_identifiability",
      [](const Matrix& q, const Vector& h, double sigma,
         const std::optional<std::vector<std::size_t>>& classes) {
        const auto g = GeneratorMatrix::validate(q);
        const auto decomp = classes ? ClassDecomposition::from_labels(g, *classes) : decompose_classes(g);
        return check_identifiability(decomp, model_of(h, sigma)).satisfied();
      },
      py::arg("q"), py::arg("h"), py::arg("sigma") = 1.0, py::arg("classes") = py::none());

  m.def(
      "counterexample_tables",
      [](const Vector& nu, std::size_t intervals) {
        py::list out;
        for (int y0 : {1, 0})
          for (const auto& row : reproduce_table(ProbabilityVector::from(nu), y0, intervals)) {
            py::dict d;
            d["y0"] = y0;
            d["interval"] = row.interval;
            d["y"] = row.y;
            d["pi1"] = row.pi1;
            d["pi2"] = row.pi2;
            d["match"] = row.match;
            out.append(d);
          }
        return out;
      },
      py::arg("nu"), py::arg("intervals") = 12);
  m.def(
      "predicted_instability_gap",
      [](const Vector& nu, const Vector& beta) {
        return predicted_instability_gap(ProbabilityVector::from(nu), ProbabilityVector::from(beta));
      },
      py::arg("nu"), py::arg("beta"));

  m.def(
      "run_experiment",
      [](const std::string& config_text, std::optional<std::string> kind,
         std::optional<std::uint64_t> seed, std::optional<std::string> out_dir, unsigned threads) {
        RunOptions options;
        if (kind) {
          options.kind = parse_kind(*kind);
          if (!options.kind) throw Error(ErrorKind::ConfigInvalid, "unknown experiment kind " + *kind);
        }
        options.seed = seed;
        options.out_dir = out_dir;
        options.threads = threads;
        const auto config = validate_config(config_text);
        RunResult result;
        {
          py::gil_scoped_release release;
          result = run(config, options);
        }
        py::dict d;
        d["exit_code"] = result.exit_code;
        d["error_category"] = result.error_category;
        d["error_message"] = result.error_message;
        d["artifacts"] = result.artifacts;
        d["summary"] = result.summary;
        return d;
      },
      py::arg("config_text"), py::arg("kind") = py::none(), py::arg("seed") = py::none(),
      py::arg("out_dir") = py::none(), py::arg("threads") = 1,
      "Runs one experiment from config text; the CLI's behaviour without the process exit.");

  m.attr("__version__") = std::string(code_version());
}
