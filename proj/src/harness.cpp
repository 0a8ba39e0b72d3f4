#include "wonham/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "wonham/counterexample.hpp"
#include "wonham/csv.hpp"
#include "wonham/filtering.hpp"
#include "wonham/metrics.hpp"
#include "wonham/observation.hpp"
#include "wonham/stability.hpp"

#ifndef WONHAM_VERSION
#define WONHAM_VERSION "0.0.0"
#endif

namespace wonham {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Index = Eigen::Index;

std::string_view code_version() noexcept { return WONHAM_VERSION; }

namespace {

constexpr int kCsvSchemaVersion = 1;

const std::vector<std::pair<ExperimentKind, std::string_view>> kKindNames = {
    {ExperimentKind::FilterRun, "filter-run"},
    {ExperimentKind::Stability, "stability"},
    {ExperimentKind::Bounds, "bounds"},
    {ExperimentKind::Identify, "identify"},
    {ExperimentKind::Classify, "classify"},
    {ExperimentKind::Counterexample, "counterexample"},
    {ExperimentKind::SmootherCheck, "smoother-check"},
};

[[noreturn]] void config_error(std::size_t line, const std::string& what) {
  std::ostringstream msg;
  if (line > 0) msg << "line " << line << ": ";
  msg << what;
  throw Error(ErrorKind::ConfigInvalid, msg.str());
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

int bracket_balance(std::string_view s) {
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

json parse_value(const std::string& text, std::size_t line) {
  const bool bare = !text.empty() &&
                    std::all_of(text.begin(), text.end(), [](char c) {
                      return std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                             c == '/' || c == '.' || std::isdigit(static_cast<unsigned char>(c));
                    }) &&
                    std::isalpha(static_cast<unsigned char>(text.front())) && text != "true" &&
                    text != "false" && text != "null" && text != "inf" && text != "nan";
  if (bare) return json(text);
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    config_error(line, "cannot parse value '" + text + "'");
  }
}

double as_number(const json& v, std::size_t line, std::string_view key) {
  if (!v.is_number()) config_error(line, std::string(key) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(line, std::string(key) + " must be finite");
  return x;
}

std::size_t as_count(const json& v, std::size_t line, std::string_view key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    config_error(line, std::string(key) + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<double> as_numbers(const json& v, std::size_t line, std::string_view key) {
  if (!v.is_array()) config_error(line, std::string(key) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_number(x, line, key));
  return out;
}

Vector as_vector(const json& v, std::size_t line, std::string_view key) {
  const auto values = as_numbers(v, line, key);
  if (values.empty()) config_error(line, std::string(key) + " must not be empty");
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

Matrix as_matrix(const json& v, std::size_t line, std::string_view key) {
  if (!v.is_array() || v.empty()) config_error(line, std::string(key) + " must be a nested array");
  const std::size_t rows = v.size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = as_numbers(v[i], line, key);
    if (row.size() != rows) config_error(line, std::string(key) + " must be square");
    for (std::size_t j = 0; j < rows; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
  }
  return m;
}

struct Entry {
  std::string key;
  json value;
  std::size_t line;
};

std::vector<Entry> tokenize(std::string_view text) {
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(line_no, "expected 'key = value'");
    Entry e;
    e.key = trim(std::string_view(line).substr(0, eq));
    e.line = line_no;
    std::string value = trim(std::string_view(line).substr(eq + 1));
    while (bracket_balance(value) > 0 && std::getline(in, raw)) {
      ++line_no;
      value += ' ' + trim(strip_comment(raw));
    }
    if (bracket_balance(value) != 0) config_error(e.line, "unbalanced brackets in " + e.key);
    if (e.key.empty() || value.empty()) config_error(e.line, "expected 'key = value'");
    e.value = parse_value(value, e.line);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) noexcept {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> out;
    for (const auto& [k, name] : kKindNames) out.push_back(k);
    return out;
  }();
  return kinds;
}

ExperimentConfig validate_config(std::string_view text) {
  ExperimentConfig cfg;
  cfg.source = std::string(text);
  std::map<std::string, std::size_t> seen;
  std::size_t generator_line = 0;
  std::map<std::string, std::size_t> vector_lines;

  using Handler = std::function<void(const json&, std::size_t)>;
  const std::map<std::string, Handler> handlers = {
      {"kind",
       [&](const json& v, std::size_t line) {
         if (!v.is_string()) config_error(line, "kind must be a name");
         cfg.kind = parse_kind(v.get<std::string>());
         if (!cfg.kind) config_error(line, "unknown experiment kind '" + v.get<std::string>() + "'");
       }},
      {"generator",
       [&](const json& v, std::size_t line) {
         cfg.generator = as_matrix(v, line, "generator");
         generator_line = line;
       }},
      {"h", [&](const json& v, std::size_t line) { cfg.h = as_vector(v, line, "h"); }},
      {"sigma",
       [&](const json& v, std::size_t line) {
         cfg.sigma = as_number(v, line, "sigma");
         if (!(cfg.sigma > 0.0)) config_error(line, "sigma must be positive");
       }},
      {"classes",
       [&](const json& v, std::size_t line) {
         if (!v.is_array()) config_error(line, "classes must be an array of labels");
         for (const auto& x : v) cfg.classes.push_back(as_count(x, line, "classes"));
       }},
      {"nu", [&](const json& v, std::size_t line) { cfg.nu = as_vector(v, line, "nu"); }},
      {"beta", [&](const json& v, std::size_t line) { cfg.beta = as_vector(v, line, "beta"); }},
      {"T",
       [&](const json& v, std::size_t line) {
         cfg.horizon = as_number(v, line, "T");
         if (!(cfg.horizon > 0.0)) config_error(line, "T must be positive");
       }},
      {"dt",
       [&](const json& v, std::size_t line) {
         cfg.dt = as_number(v, line, "dt");
         if (!(cfg.dt > 0.0)) config_error(line, "dt must be positive");
       }},
      {"trials",
       [&](const json& v, std::size_t line) {
         cfg.trials = as_count(v, line, "trials");
         if (cfg.trials < 1) config_error(line, "trials must be >= 1");
       }},
      {"r_grid",
       [&](const json& v, std::size_t line) {
         cfg.r_grid = as_numbers(v, line, "r_grid");
         for (double r : cfg.r_grid)
           if (!(r > 0.0)) config_error(line, "r_grid entries must be positive");
       }},
      {"report_times",
       [&](const json& v, std::size_t line) {
         cfg.report_times = as_numbers(v, line, "report_times");
         for (double t : cfg.report_times)
           if (t < 0.0) config_error(line, "report_times must be >= 0");
       }},
      {"blocks",
       [&](const json& v, std::size_t line) {
         cfg.blocks = as_count(v, line, "blocks");
         if (cfg.blocks < 1) config_error(line, "blocks must be >= 1");
       }},
      {"min_blocks",
       [&](const json& v, std::size_t line) { cfg.min_blocks = as_count(v, line, "min_blocks"); }},
      {"seed",
       [&](const json& v, std::size_t line) {
         if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                        v.get<long long>() < 0)) {
           config_error(line, "seed must be a nonnegative 64-bit integer");
         }
         cfg.seed = v.get<std::uint64_t>();
       }},
      {"output",
       [&](const json& v, std::size_t line) {
         if (!v.is_string()) config_error(line, "output must be a path");
         cfg.output = v.get<std::string>();
       }},
  };

  for (const Entry& e : tokenize(text)) {
    const auto handler = handlers.find(e.key);
    if (handler == handlers.end()) config_error(e.line, "unknown key '" + e.key + "'");
    if (seen.count(e.key)) config_error(e.line, "duplicate key '" + e.key + "'");
    seen[e.key] = e.line;
    handler->second(e.value, e.line);
  }

  if (cfg.generator) {
    const auto n = cfg.generator->rows();
    auto check = [&](const std::optional<Vector>& v, const char* name) {
      if (v && v->size() != n) {
        std::ostringstream msg;
        msg << name << " has length " << v->size() << " but generator has " << n << " states";
        config_error(seen[name], msg.str());
      }
    };
    check(cfg.h, "h");
    check(cfg.nu, "nu");
    check(cfg.beta, "beta");
    if (!cfg.classes.empty() && static_cast<Index>(cfg.classes.size()) != n) {
      config_error(seen["classes"], "classes must label every state");
    }
    try {
      GeneratorMatrix::validate(*cfg.generator);
    } catch (const Error& e) {
      config_error(generator_line, std::string("generator: ") + e.what());
    }
  }
  for (const char* name : {"nu", "beta"}) {
    const auto& v = std::string(name) == "nu" ? cfg.nu : cfg.beta;
    if (!v) continue;
    try {
      ProbabilityVector::from(*v);
    } catch (const Error& e) {
      config_error(seen[name], std::string(name) + ": " + e.what());
    }
  }
  for (double t : cfg.report_times)
    if (t > cfg.horizon) config_error(seen["report_times"], "report_times must not exceed T");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return validate_config(text.str());
}

namespace {

/// Collects artifacts and summary lines for one run.
class Sink {
 public:
  Sink(fs::path dir, std::uint64_t seed) : dir_(std::move(dir)), seed_(seed) {
    fs::create_directories(dir_);
  }

  // Every CSV starts with one comment line carrying the schema version and seed.
  std::ofstream open(const std::string& name) {
    artifacts_.push_back(name);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::ExperimentFailed, "cannot write " + (dir_ / name).string());
    out << "# schema=" << kCsvSchemaVersion << " seed=" << seed_ << '\n';
    return out;
  }

  void line(const std::string& key, const std::string& value) {
    summary_ << key << " = " << value << '\n';
  }
  void line(const std::string& key, double value) { line(key, csv_number(value)); }

  const fs::path& dir() const { return dir_; }
  std::vector<std::string>& artifacts() { return artifacts_; }
  std::string summary() const { return summary_.str(); }

 private:
  fs::path dir_;
  std::uint64_t seed_;
  std::vector<std::string> artifacts_;
  std::ostringstream summary_;
};

struct Resolved {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  unsigned threads;
};

GeneratorMatrix require_generator(const ExperimentConfig& cfg) {
  if (!cfg.generator) config_error(0, "this experiment requires 'generator'");
  return GeneratorMatrix::validate(*cfg.generator);
}

ObservationModel require_model(const ExperimentConfig& cfg, std::size_t n) {
  if (!cfg.h) config_error(0, "this experiment requires 'h'");
  if (static_cast<std::size_t>(cfg.h->size()) != n) config_error(0, "h length must match n");
  return ObservationModel::make(*cfg.h, cfg.sigma);
}

ProbabilityVector law_or_uniform(const std::optional<Vector>& v, std::size_t n, const char* name) {
  if (!v) return ProbabilityVector::uniform(n);
  if (static_cast<std::size_t>(v->size()) != n) {
    config_error(0, std::string(name) + " length must match the state count");
  }
  return ProbabilityVector::from(*v);
}

std::vector<double> default_report_times(double horizon) {
  std::vector<double> out{0.0};
  for (double t = 1.0; t <= horizon + 1e-12; t *= 2.0) out.push_back(t);
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

void run_bounds(const Resolved& r, Sink& sink) {
  const GeneratorMatrix q = require_generator(r.cfg);
  const std::size_t n = q.size();
  const auto nu = law_or_uniform(r.cfg.nu, n, "nu");
  const auto beta = law_or_uniform(r.cfg.beta, n, "beta");
  const double mu_row = is_irreducible(q) ? bound_mu_row(q) : std::nan("");
  const double geo = bound_geo(q);
  Prefactors pre{std::nan(""), std::nan("")};
  std::string continuity = "ok";
  try {
    pre = prefactors(nu, beta);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotAbsolutelyContinuous) throw;
    continuity = "NotAbsolutelyContinuous";
  }
  auto out = sink.open("bounds.csv");
  out << "quantity,value\n"
      << "bound_mu_row," << csv_number(mu_row) << '\n'
      << "bound_geo," << csv_number(geo) << '\n'
      << "prefactor_a," << csv_number(pre.a) << '\n'
      << "prefactor_b," << csv_number(pre.b) << '\n';
  sink.line("bound_mu_row", mu_row);
  sink.line("bound_geo", geo);
  sink.line("prefactor_a", pre.a);
  sink.line("prefactor_b", pre.b);
  sink.line("absolute_continuity", continuity);
}

void run_filter_experiment(const Resolved& r, Sink& sink) {
  const GeneratorMatrix q = require_generator(r.cfg);
  const std::size_t n = q.size();
  const ObservationModel model = require_model(r.cfg, n);
  const auto nu = law_or_uniform(r.cfg.nu, n, "nu");
  const auto beta = law_or_uniform(r.cfg.beta, n, "beta");
  Rng rng = make_stream(r.seed, 0);
  const ChainPath path = sample_path(q, nu, r.cfg.horizon, rng);
  const ObservationPath obs = synthesize_observations(path, model, r.cfg.dt, rng);
  const FilterTrajectory right = run_filter(nu, obs, q, model);
  const FilterTrajectory wrong = run_filter(beta, obs, q, model);
  {
    auto out = sink.open("path.csv");
    out << "t,state\n0," << (path.states[0] + 1) << '\n';
    for (std::size_t k = 0; k < path.jump_count(); ++k)
      out << csv_number(path.jump_times[k]) << ',' << (path.states[k + 1] + 1) << '\n';
  }
  {
    auto out = sink.open("observations.csv");
    write_csv(out, obs);
  }
  {
    auto out = sink.open("filter_nu.csv");
    write_csv(out, right);
  }
  {
    auto out = sink.open("filter_beta.csv");
    write_csv(out, wrong);
  }
  sink.line("jumps", std::to_string(path.jump_count()));
  sink.line("steps", std::to_string(obs.count()));
  sink.line("final_l1_distance", l1_distance(right.pis.back(), wrong.pis.back()));
  sink.line("final_log_mass", right.log_mass.back());
}

void run_stability(const Resolved& r, Sink& sink, std::string& failure) {
  const GeneratorMatrix q = require_generator(r.cfg);
  const std::size_t n = q.size();
  const ObservationModel model = require_model(r.cfg, n);
  const auto nu = law_or_uniform(r.cfg.nu, n, "nu");
  const auto beta = law_or_uniform(r.cfg.beta, n, "beta");
  const bool irreducible = is_irreducible(q);
  const double mu_row = irreducible ? bound_mu_row(q) : std::nan("");
  const double geo = bound_geo(q);
  Prefactors pre{std::nan(""), std::nan("")};
  try {
    pre = prefactors(nu, beta);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotAbsolutelyContinuous) throw;
  }

  const auto times =
      r.cfg.report_times.empty() ? default_report_times(r.cfg.horizon) : r.cfg.report_times;
  MonteCarloOptions mc{r.cfg.horizon, r.cfg.dt, r.cfg.trials, r.seed, r.threads};
  const LyapunovEstimate lyap = lyapunov_estimate(q, model, nu, beta, mc, times);
  MeanEstimate contraction{std::nan(""), std::nan(""), 0};
  if (irreducible) contraction = contraction_rate(q, model, nu, r.cfg.dt, r.cfg.blocks, mix64(r.seed + 1));

  {
    auto out = sink.open("stability_trials.csv");
    out << "trial,slope,points,truncated,degenerate\n";
    for (std::size_t i = 0; i < lyap.per_trial.size(); ++i) {
      const auto& t = lyap.per_trial[i];
      out << i << ',' << csv_number(t.degenerate ? std::nan("") : t.slope) << ',' << t.points
          << ',' << bool_text(t.truncated) << ',' << bool_text(t.degenerate) << '\n';
    }
  }
  {
    auto out = sink.open("stability_distance.csv");
    out << "t,mean_l1,std_error,bound_a\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double bound = geo < 0.0 ? pre.a * std::exp(geo * times[k]) : std::nan("");
      out << csv_number(times[k]) << ',' << csv_number(lyap.mean_distance[k].mean) << ','
          << csv_number(lyap.mean_distance[k].std_error) << ',' << csv_number(bound) << '\n';
    }
  }
  {
    auto out = sink.open("stability_report.csv");
    out << "quantity,value\n"
        << "bound_mu_row," << csv_number(mu_row) << '\n'
        << "bound_geo," << csv_number(geo) << '\n'
        << "prefactor_a," << csv_number(pre.a) << '\n'
        << "prefactor_b," << csv_number(pre.b) << '\n'
        << "estimated_exponent," << csv_number(lyap.exponent) << '\n'
        << "exponent_std_error," << csv_number(lyap.std_error) << '\n'
        << "trials," << lyap.trials << '\n'
        << "degenerate_trials," << lyap.degenerate_trials << '\n'
        << "horizon," << csv_number(lyap.horizon) << '\n'
        << "contraction_estimate," << csv_number(contraction.mean) << '\n'
        << "contraction_std_error," << csv_number(contraction.std_error) << '\n';
  }
  sink.line("bound_mu_row", mu_row);
  sink.line("bound_geo", geo);
  sink.line("prefactor_a", pre.a);
  sink.line("prefactor_b", pre.b);
  sink.line("estimated_exponent", lyap.exponent);
  sink.line("exponent_std_error", lyap.std_error);
  sink.line("trials", std::to_string(lyap.trials));
  sink.line("degenerate_trials", std::to_string(lyap.degenerate_trials));
  sink.line("contraction_estimate", contraction.mean);
  sink.line("contraction_std_error", contraction.std_error);
  if (lyap.all_degenerate) failure = "AllTrialsDegenerate";
}

ClassDecomposition resolve_classes(const ExperimentConfig& cfg, const GeneratorMatrix& q) {
  return cfg.classes.empty() ? decompose_classes(q) : ClassDecomposition::from_labels(q, cfg.classes);
}

void run_identify(const Resolved& r, Sink& sink) {
  const GeneratorMatrix q = require_generator(r.cfg);
  const ObservationModel model = require_model(r.cfg, q.size());
  const ClassDecomposition decomp = resolve_classes(r.cfg, q);
  const IdentifiabilityReport report = check_identifiability(decomp, model);
  auto out = sink.open("identifiability.csv");
  out << "j,k,quantity,q,gap,pair_satisfied\n";
  for (const auto& p : report.pairs) {
    out << (p.j + 1) << ',' << (p.k + 1) << ",mean,," << csv_number(p.mean_sep) << ','
        << bool_text(p.satisfied) << '\n';
    for (std::size_t power = 0; power < p.moment_seps.size(); ++power)
      out << (p.j + 1) << ',' << (p.k + 1) << ",moment," << power << ','
          << csv_number(p.moment_seps[power]) << ',' << bool_text(p.satisfied) << '\n';
  }
  sink.line("classes", std::to_string(decomp.class_count()));
  sink.line("satisfied", bool_text(report.satisfied()));
}

void run_classify(const Resolved& r, Sink& sink) {
  const GeneratorMatrix q = require_generator(r.cfg);
  const std::size_t n = q.size();
  const ObservationModel model = require_model(r.cfg, n);
  const auto nu = law_or_uniform(r.cfg.nu, n, "nu");
  const ClassDecomposition decomp = resolve_classes(r.cfg, q);
  const ClassCentroids centroids = class_centroids(decomp, model, r.cfg.r_grid);
  const auto owner = decomp.class_of_states(n);

  std::vector<Classification> results(r.cfg.trials);
  std::vector<std::size_t> truth(r.cfg.trials);
  parallel_for(r.cfg.trials, r.threads, [&](std::size_t i) {
    Rng rng = make_stream(r.seed, i);
    const ChainPath path = sample_path(q, nu, r.cfg.horizon, rng);
    const ObservationPath obs = synthesize_observations(path, model, r.cfg.dt, rng);
    truth[i] = owner[path.states.front()];
    results[i] = classify_class(obs, centroids, r.cfg.min_blocks);
  });

  std::size_t correct = 0;
  auto out = sink.open("classify.csv");
  out << "trial,true_class,predicted_class,correct,mean_statistic";
  for (double rv : r.cfg.r_grid) out << ",z_" << csv_number(rv);
  out << '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    const bool ok = results[i].class_index == truth[i];
    correct += ok ? 1 : 0;
    out << i << ',' << (truth[i] + 1) << ',' << (results[i].class_index + 1) << ','
        << bool_text(ok);
    for (Index s = 0; s < results[i].statistics.size(); ++s)
      out << ',' << csv_number(results[i].statistics(s));
    out << '\n';
  }
  sink.line("classes", std::to_string(decomp.class_count()));
  sink.line("accuracy", static_cast<double>(correct) / static_cast<double>(results.size()));
}

void run_counterexample(const Resolved& r, Sink& sink) {
  if (r.cfg.generator) {
    config_error(0, "counterexample uses the fixed cyclic generator; remove 'generator'");
  }
  const CyclicModel cyclic = build_cyclic_model();
  const auto nu = law_or_uniform(r.cfg.nu, 4, "nu");
  const auto beta = law_or_uniform(r.cfg.beta, 4, "beta");
  Vector h(4);
  h << 1, 0, 1, 0;
  if (r.cfg.h) {
    if (r.cfg.h->size() != 4) config_error(0, "h must have 4 entries for counterexample");
    h = *r.cfg.h;
  }
  const ObservationModel model = ObservationModel::make(h, r.cfg.sigma);

  constexpr std::size_t kIntervals = 12;
  const auto table1 = reproduce_table(nu, 1, kIntervals);
  const auto table2 = reproduce_table(nu, 0, kIntervals);
  {
    auto out = sink.open("counterexample_tables.csv");
    write_tables_csv(out, table1, table2);
  }
  const bool all_match =
      std::all_of(table1.begin(), table1.end(), [](const auto& row) { return row.match; }) &&
      std::all_of(table2.begin(), table2.end(), [](const auto& row) { return row.match; });

  const auto times = r.cfg.report_times.empty() ? default_report_times(r.cfg.horizon)
                                                : r.cfg.report_times;
  const InstabilityReport demo =
      instability_demo(nu, beta, r.cfg.horizon, r.cfg.trials, r.seed, times, r.threads);
  MonteCarloOptions mc{r.cfg.horizon, r.cfg.dt, r.cfg.trials, mix64(r.seed + 1), r.threads};
  const LyapunovEstimate contrast =
      lyapunov_estimate(cyclic.generator, model, nu, beta, mc, times);
  {
    auto out = sink.open("counterexample_instability.csv");
    out << "t,noiseless_mean_l1,noiseless_std_error,predicted_gap,noisy_mean_l1,noisy_std_error\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
      out << csv_number(times[k]) << ',' << csv_number(demo.mean_distance[k].mean) << ','
          << csv_number(demo.mean_distance[k].std_error) << ',' << csv_number(demo.predicted_gap)
          << ',' << csv_number(contrast.mean_distance[k].mean) << ','
          << csv_number(contrast.mean_distance[k].std_error) << '\n';
    }
  }
  sink.line("tables_match", bool_text(all_match));
  sink.line("predicted_gap", demo.predicted_gap);
  sink.line("noiseless_mean_l1_at_T", demo.mean_distance.back().mean);
  sink.line("noisy_mean_l1_at_T", contrast.mean_distance.back().mean);
  sink.line("noisy_exponent", contrast.exponent);
  sink.line("noisy_exponent_std_error", contrast.std_error);
}

void run_smoother_check(const Resolved& r, Sink& sink) {
  const GeneratorMatrix q = require_generator(r.cfg);
  const std::size_t n = q.size();
  const ObservationModel model = require_model(r.cfg, n);
  const auto nu = law_or_uniform(r.cfg.nu, n, "nu");
  Rng rng = make_stream(r.seed, 0);
  const ChainPath path = sample_path(q, nu, r.cfg.horizon, rng);
  const ObservationPath obs = synthesize_observations(path, model, r.cfg.dt, rng);
  const SmootherRun smoother = run_smoother(nu, obs, q, model);
  const AugmentedTrajectory oracle = augmented_filter(nu, obs, q, model);
  const double geo = bound_geo(q);

  const std::size_t stride = std::max<std::size_t>(1, smoother.rhos.size() / 5000);
  double sup_error = 0.0;
  double worst_column = 0.0;
  double worst_increase = 0.0;
  auto out = sink.open("smoother.csv");
  out << "t,max_abs_error,spread,max_column_sum_deviation,geo_bound\n";
  for (std::size_t k = 0; k < smoother.rhos.size(); ++k) {
    const Matrix& rho = smoother.rhos[k].rho;
    const double err = (rho - oracle.initial_given_current(k)).cwiseAbs().maxCoeff();
    const double column = (rho.colwise().sum().array() - 1.0).abs().maxCoeff();
    const double spread = smoother.rhos[k].spread();
    sup_error = std::max(sup_error, err);
    worst_column = std::max(worst_column, column);
    if (k > 0) worst_increase = std::max(worst_increase, spread - smoother.rhos[k - 1].spread());
    if (k % stride == 0 || k + 1 == smoother.rhos.size()) {
      const double t = static_cast<double>(k) * r.cfg.dt;
      out << csv_number(t) << ',' << csv_number(err) << ',' << csv_number(spread) << ','
          << csv_number(column) << ',' << csv_number(geo < 0.0 ? std::exp(geo * t) : 1.0) << '\n';
    }
  }
  sink.line("sup_abs_error", sup_error);
  sink.line("max_column_sum_deviation", worst_column);
  sink.line("max_spread_increase", worst_increase);
  sink.line("floor_steps", std::to_string(smoother.floor_steps));
  sink.line("floor_dominates", bool_text(smoother.floor_dominates));
}

void write_manifest(const fs::path& dir, const json& manifest) {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

}  // namespace

void write_failure_manifest(const std::string& out_dir, std::string_view category,
                            std::string_view message) {
  json manifest;
  manifest["schema_version"] = 1;
  manifest["code_version"] = std::string(code_version());
  manifest["status"] = "error";
  manifest["error_category"] = std::string(category);
  manifest["error_message"] = std::string(message);
  write_manifest(out_dir, manifest);
}

RunResult run(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = options.out_dir ? *options.out_dir : config.output;
  const std::uint64_t seed = options.seed ? *options.seed : config.seed;
  const auto kind = options.kind ? options.kind : config.kind;

  RunResult result;
  std::string soft_failure;
  std::vector<std::string> artifacts;
  std::string summary;
  try {
    if (!kind) config_error(0, "no experiment kind given (config 'kind' or subcommand)");
    Sink sink(dir, seed);
    const Resolved resolved{config, seed, std::max(1u, options.threads)};
    sink.line("kind", std::string(to_string(*kind)));
    sink.line("seed", std::to_string(seed));
    switch (*kind) {
      case ExperimentKind::Bounds: run_bounds(resolved, sink); break;
      case ExperimentKind::FilterRun: run_filter_experiment(resolved, sink); break;
      case ExperimentKind::Stability: run_stability(resolved, sink, soft_failure); break;
      case ExperimentKind::Identify: run_identify(resolved, sink); break;
      case ExperimentKind::Classify: run_classify(resolved, sink); break;
      case ExperimentKind::Counterexample: run_counterexample(resolved, sink); break;
      case ExperimentKind::SmootherCheck: run_smoother_check(resolved, sink); break;
    }
    summary = sink.summary();
    artifacts = sink.artifacts();
    {
      std::ofstream out(dir / "summary.txt", std::ios::binary);
      out << summary;
    }
    artifacts.push_back("summary.txt");
    if (!soft_failure.empty()) {
      result.exit_code = kExitExperimentFailed;
      result.error_category = "ExperimentFailed/" + soft_failure;
      result.error_message = "every trial was degenerate; bounds were still reported";
    }
  } catch (const Error& e) {
    const bool config_problem = e.kind() == ErrorKind::ConfigInvalid;
    result.exit_code = config_problem ? kExitConfigInvalid : kExitExperimentFailed;
    result.error_category =
        config_problem ? "ConfigInvalid" : "ExperimentFailed/" + std::string(to_string(e.kind()));
    result.error_message = e.what();
  } catch (const std::exception& e) {
    result.exit_code = kExitExperimentFailed;
    result.error_category = "ExperimentFailed/Internal";
    result.error_message = e.what();
  }
  result.artifacts = artifacts;
  result.summary = summary;

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest;
  manifest["schema_version"] = 1;
  manifest["csv_schema_version"] = kCsvSchemaVersion;
  manifest["code_version"] = std::string(code_version());
  manifest["kind"] = kind ? std::string(to_string(*kind)) : std::string();
  manifest["seed"] = seed;
  manifest["threads"] = std::max(1u, options.threads);
  manifest["status"] = result.exit_code == kExitOk ? "ok" : "error";
  manifest["error_category"] = result.error_category;
  manifest["error_message"] = result.error_message;
  manifest["artifacts"] = artifacts;
  manifest["wall_time_seconds"] = wall;
  manifest["config"] = config.source;
  try {
    write_manifest(dir, manifest);
  } catch (const std::exception&) {
    // The run result still carries the category.
  }
  return result;
}

}  // namespace wonham
