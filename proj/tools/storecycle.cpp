#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "storecycle/calibration.hpp"
#include "storecycle/cashflow.hpp"
#include "storecycle/config.hpp"
#include "storecycle/equilibrium.hpp"
#include "storecycle/errors.hpp"
#include "storecycle/io.hpp"
#include "storecycle/spatial.hpp"

namespace sc = storecycle;
using nlohmann::json;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitDivergence = 3;

std::uint64_t env_seed() {
  const char* s = std::getenv("STORECYCLE_SEED");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw sc::InputError("STORECYCLE_SEED: '" + std::string(s) + "' is not an unsigned integer");
  return v;
}

json metrics_json(const sc::cashflow::CurveMetrics& m) {
  return {{"peak_time", m.peak_time},
          {"peak_value", m.peak_value},
          {"closing_time", m.closing_time},
          {"ramp_up", m.ramp_up},
          {"theoretical_lifespan", m.theoretical_lifespan},
          {"multi_peak", m.multi_peak}};
}

json params_json(const sc::cashflow::CashFlowParams& p) {
  json terms = json::array();
  for (const auto& t : p.curve.terms)
    terms.push_back({{"share", t.share}, {"beta0", t.beta0}, {"mu", t.mu}, {"nu", t.nu}});
  return {{"u", p.u_eff}, {"delta", p.delta}, {"k", p.k}, {"theta", p.theta}, {"curve", terms}};
}

/// nlohmann writes the shortest decimal that parses back to the same double.
std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void write_doc(const std::string& path, const json& doc) { sc::io::write_text(path, dump(doc)); }

sc::calibration::Frequency parse_frequency(const std::string& s) {
  if (s == "daily") return sc::calibration::Frequency::Daily;
  if (s == "weekly") return sc::calibration::Frequency::Weekly;
  if (s == "monthly") return sc::calibration::Frequency::Monthly;
  throw sc::InputError("--frequency: expected daily, weekly or monthly, got '" + s + "'");
}

sc::cashflow::SweepAxis parse_axis(const std::string& s) {
  if (s == "u") return sc::cashflow::SweepAxis::U;
  if (s == "nu") return sc::cashflow::SweepAxis::Nu;
  if (s == "k") return sc::cashflow::SweepAxis::K;
  throw sc::InputError("--axis: expected u, nu or k, got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(sc::io::parse_double(item, "--values"));
  if (out.empty()) throw sc::InputError("--values: empty list");
  return out;
}

struct SimulateArgs {
  std::string config;
  double t_max = 1000.0;
  double step = 1.0;
  std::string output = "-";
  std::string metrics;
};

int run_simulate(const SimulateArgs& a) {
  if (!(a.t_max > 0.0) || !(a.step > 0.0)) throw sc::InputError("--t-max and --step must be positive");
  const auto cfg = sc::config::load_scenario(a.config, env_seed());
  const auto p = sc::config::resolve_cash_flow(cfg);
  const auto metrics = sc::cashflow::curve_metrics(p);

  std::ostringstream csv;
  csv << "t,N_t,beta_t,CF_t\n";
  const auto steps = static_cast<long>(std::floor(a.t_max / a.step + 1e-9));
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * a.step;
    csv << sc::io::format_double(t) << ','
        << sc::io::format_double(sc::spatial::potential_customers_closed_form(p.u_eff, p.delta, p.k, t)) << ','
        << sc::io::format_double(sc::equilibrium::conversion_rate(p.curve, t, p.policy)) << ','
        << sc::io::format_double(sc::cashflow::cash_flow(p, t)) << '\n';
  }
  sc::io::write_text(a.output, csv.str());

  const json doc = {{"params", params_json(p)}, {"metrics", metrics_json(metrics)}};
  if (!a.metrics.empty())
    write_doc(a.metrics, doc);
  else if (a.output != "-")
    write_doc("-", doc);
  else
    std::cerr << dump(doc);
  return 0;
}

struct EquilibriumArgs {
  std::string config;
  std::string output = "-";
};

int run_equilibrium(const EquilibriumArgs& a) {
  const auto cfg = sc::config::load_scenario(a.config, env_seed());
  if (!cfg.market) throw sc::ConfigError("population: required for the equilibrium command");
  if (cfg.investments.empty()) throw sc::ConfigError("investments: required for the equilibrium command");
  try {
    const auto solution = sc::equilibrium::solve_equilibrium(*cfg.market, cfg.investments,
                                                             cfg.options.equilibrium);
    write_doc(a.output, solution.to_json());
  } catch (const sc::FixedPointDivergence& e) {
    std::cerr << "storecycle: equilibrium: FixedPointDivergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const sc::DominanceViolation& e) {
    std::cerr << "storecycle: equilibrium: DominanceViolation: " << e.what() << '\n';
    return kExitDivergence;
  }
  return 0;
}

struct UdensityArgs {
  std::string scene;
  std::string output = "-";
  bool mc = false;
  std::size_t samples = 1'000'000;
  std::optional<std::uint64_t> seed;
};

int run_udensity(const UdensityArgs& a) {
  const auto scene = sc::config::load_scene(a.scene);
  const double u_prime = sc::spatial::equivalent_density(scene);
  const double d2 = scene.delta * scene.delta;
  json doc = {{"u", scene.u},
              {"u_prime", u_prime},
              {"long_run_flow", 2.0 * std::numbers::pi * u_prime / d2}};
  if (a.mc) {
    sc::spatial::MonteCarloConfig mc;
    mc.samples = a.samples;
    mc.seed = a.seed ? *a.seed : env_seed();
    const double r = mc.radius(scene.delta);
    double t = 0.0;
    for (const auto& s : scene.stores())
      t = std::max(t, s.opening_time + (r + (s.location - scene.focal.location).norm()) / s.k);
    const auto est = sc::spatial::potential_customers_mc(scene, t, mc);
    doc["monte_carlo"] = {{"t", t}, {"flow", est.value}, {"std_error", est.std_error}, {"samples", est.samples}, {"seed", mc.seed}};
  }
  write_doc(a.output, doc);
  return 0;
}

struct FitArgs {
  std::string csv;
  double delta = 1.535;
  double u_prime = 0.0;
  double theta = 0.0;
  std::string frequency = "daily";
  int lags = 7;
  std::string output = "-";
  std::string fitted;
};

int run_fit(const FitArgs& a) {
  const sc::calibration::FixedInputs fixed{a.delta, a.u_prime, a.theta};
  fixed.validate();
  const auto raw = sc::io::read_cash_flow_csv_file(a.csv);
  auto series = sc::calibration::ingest(raw);
  const auto freq = parse_frequency(a.frequency);
  if (freq != sc::calibration::Frequency::Daily) series = sc::calibration::aggregate(series, freq);
  sc::calibration::FitOptions opts;
  opts.lags = a.lags;
  const auto r = sc::calibration::fit(series, fixed, opts);

  std::size_t interpolated = 0;
  for (const auto& o : series.observations) interpolated += !o.observed;
  json cov = json::array();
  for (int i = 0; i < 3; ++i) cov.push_back({r.covariance(i, 0), r.covariance(i, 1), r.covariance(i, 2)});
  const auto se = r.scaled_std_errors();
  const auto est = r.scaled_estimate();
  const json doc = {
      {"estimate", {{"k", r.estimate.k}, {"nu", r.estimate.nu}, {"beta0", r.estimate.beta0}}},
      {"std_errors", {{"k", r.std_errors[0]}, {"nu", r.std_errors[1]}, {"beta0", r.std_errors[2]}}},
      {"scaled",
       {{"k_x1e2", est[0]}, {"nu_x1e6", est[1]}, {"beta0_x1e2", est[2]},
        {"k_se_x1e2", se[0]}, {"nu_se_x1e6", se[1]}, {"beta0_se_x1e2", se[2]}}},
      {"covariance", cov},
      {"ssr", r.ssr},
      {"r2", r.r2},
      {"adj_r2", r.adj_r2},
      {"f_statistic", r.f_statistic},
      {"n_obs", r.n_obs},
      {"interpolated_days", interpolated},
      {"lifespan_days", r.lifespan_days},
      {"boundary_estimate", r.boundary_estimate},
      {"frequency", a.frequency},
      {"lags", a.lags},
      {"fixed", {{"delta", a.delta}, {"u_prime", a.u_prime}, {"theta", a.theta}}}};
  write_doc(a.output, doc);

  if (!a.fitted.empty()) {
    std::ostringstream csv;
    csv << "t,observed,fitted\n";
    for (const auto& o : series.observations)
      csv << sc::io::format_double(o.t) << ',' << sc::io::format_double(o.value) << ','
          << sc::io::format_double(sc::calibration::model_value(fixed, r.estimate, o.t)) << '\n';
    sc::io::write_text(a.fitted, csv.str());
  }
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string axis;
  std::string values;
  int samples = 201;
  std::optional<double> t_end;
  std::string output = "-";
  std::string metrics;
};

int run_sweep(const SweepArgs& a) {
  const auto cfg = sc::config::load_scenario(a.config, env_seed());
  const auto base = sc::config::resolve_cash_flow(cfg);
  sc::cashflow::SweepOptions opts;
  opts.samples = a.samples;
  opts.t_end = a.t_end;
  const auto rows = sc::cashflow::parameter_sweep(base, parse_axis(a.axis), parse_list(a.values), opts);

  std::ostringstream csv;
  csv << "value,t,cash_flow\n";
  json doc = json::array();
  for (const auto& row : rows) {
    for (const auto& pt : row.curve)
      csv << sc::io::format_double(row.value) << ',' << sc::io::format_double(pt.t) << ','
          << sc::io::format_double(pt.cash_flow) << '\n';
    json m = metrics_json(row.metrics);
    m["value"] = row.value;
    doc.push_back(m);
  }
  sc::io::write_text(a.output, csv.str());
  const json out = {{"axis", a.axis}, {"rows", doc}};
  if (!a.metrics.empty())
    write_doc(a.metrics, out);
  else if (a.output != "-")
    write_doc("-", out);
  else
    std::cerr << dump(out);
  return 0;
}

struct SynthesizeArgs {
  double delta = 1.535;
  double u_prime = 0.0;
  double theta = 0.0;
  double k = 0.0;
  double nu = 0.0;
  double beta0 = 0.0;
  int days = 600;
  double sigma = 0.0;
  std::optional<std::uint64_t> seed;
  std::string start = "2020-01-01";
  std::string output = "-";
};

int run_synthesize(const SynthesizeArgs& a) {
  const sc::calibration::FixedInputs fixed{a.delta, a.u_prime, a.theta};
  fixed.validate();
  const auto series = sc::calibration::simulate_series(
      fixed, {a.k, a.nu, a.beta0}, a.days, a.sigma, a.seed ? *a.seed : env_seed(),
      sc::calibration::parse_date(a.start));
  std::ostringstream csv;
  sc::io::write_cash_flow_csv(csv, series);
  sc::io::write_text(a.output, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Store cash-flow and life-cycle model"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Cash-flow curve and its metrics for a scenario");
  simulate->add_option("config", sim.config, "Scenario JSON")->required();
  simulate->add_option("--t-max", sim.t_max, "Last day of the curve")->capture_default_str();
  simulate->add_option("--step", sim.step, "Spacing of the time grid in days")->capture_default_str();
  simulate->add_option("-o,--output", sim.output, "CSV of t, N_t, beta_t, CF_t ('-' for stdout)")->capture_default_str();
  simulate->add_option("--metrics", sim.metrics, "Curve metrics JSON");

  EquilibriumArgs eq;
  auto* equilibrium = app.add_subcommand("equilibrium", "Solve the Nash equilibrium of a scenario");
  equilibrium->add_option("config", eq.config, "Scenario JSON")->required();
  equilibrium->add_option("-o,--output", eq.output, "Solution JSON")->capture_default_str();

  UdensityArgs ud;
  auto* udensity = app.add_subcommand("udensity", "Competing-equivalent foot traffic density of a scene");
  udensity->add_option("scene", ud.scene, "Scene JSON")->required();
  udensity->add_option("-o,--output", ud.output, "Result JSON")->capture_default_str();
  udensity->add_flag("--mc", ud.mc, "Also estimate the long-run flow by Monte Carlo");
  udensity->add_option("--samples", ud.samples, "Monte Carlo samples")->capture_default_str();
  udensity->add_option("--seed", ud.seed, "Monte Carlo seed (default: STORECYCLE_SEED or 0)");

  FitArgs fa;
  auto* fitcmd = app.add_subcommand("fit", "Nonlinear least-squares fit of a daily cash-flow series");
  fitcmd->add_option("csv", fa.csv, "CSV with header date,cash_flow")->required();
  fitcmd->add_option("--delta", fa.delta, "Distance attenuation coefficient")->capture_default_str();
  fitcmd->add_option("--u-prime", fa.u_prime, "Competing-equivalent foot traffic density")->required();
  fitcmd->add_option("--theta", fa.theta, "Average customer price")->required();
  fitcmd->add_option("--frequency", fa.frequency, "daily, weekly or monthly")->capture_default_str();
  fitcmd->add_option("--lags", fa.lags, "Newey-West lag window")->capture_default_str();
  fitcmd->add_option("-o,--output", fa.output, "Fit result JSON")->capture_default_str();
  fitcmd->add_option("--fitted", fa.fitted, "CSV of t, observed, fitted");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Curve metrics across values of u, nu or k");
  sweep->add_option("config", sw.config, "Scenario JSON")->required();
  sweep->add_option("--axis", sw.axis, "u, nu or k")->required();
  sweep->add_option("--values", sw.values, "Comma-separated values")->required();
  sweep->add_option("--samples", sw.samples, "Curve samples per value")->capture_default_str();
  sweep->add_option("--t-end", sw.t_end, "End of the common time grid");
  sweep->add_option("-o,--output", sw.output, "CSV of value, t, cash_flow")->capture_default_str();
  sweep->add_option("--metrics", sw.metrics, "Metrics JSON");

  SynthesizeArgs sy;
  auto* synth = app.add_subcommand("synthesize", "Noisy daily cash-flow CSV from known parameters");
  synth->add_option("--delta", sy.delta, "Distance attenuation coefficient")->capture_default_str();
  synth->add_option("--u-prime", sy.u_prime, "Competing-equivalent foot traffic density")->required();
  synth->add_option("--theta", sy.theta, "Average customer price")->required();
  synth->add_option("--k", sy.k, "Visibility broadening speed")->required();
  synth->add_option("--nu", sy.nu, "Decrease coefficient")->required();
  synth->add_option("--beta0", sy.beta0, "Initial conversion rate")->required();
  synth->add_option("--days", sy.days, "Number of days")->capture_default_str();
  synth->add_option("--sigma", sy.sigma, "Noise standard deviation")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Noise seed (default: STORECYCLE_SEED or 0)");
  synth->add_option("--start", sy.start, "First date")->capture_default_str();
  synth->add_option("-o,--output", sy.output, "Output CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*equilibrium) return run_equilibrium(eq);
    if (*udensity) return run_udensity(ud);
    if (*fitcmd) return run_fit(fa);
    if (*sweep) return run_sweep(sw);
    if (*synth) return run_synthesize(sy);
  } catch (const sc::InputError& e) {
    std::cerr << "storecycle: " << e.what() << '\n';
    return kExitInput;
  } catch (const sc::NumericalError& e) {
    std::cerr << "storecycle: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "storecycle: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
