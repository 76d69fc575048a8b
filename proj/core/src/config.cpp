#include "storecycle/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>

#include "storecycle/errors.hpp"
#include "storecycle/io.hpp"

namespace storecycle::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_keys(const json& node, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!node.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : node.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(path + "." + key, "unknown field");
  }
}

const json& require(const json& node, const std::string& path, const char* key) {
  if (!node.contains(key)) fail(path + "." + key, "missing required field");
  return node.at(key);
}

double number(const json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "expected a number");
  return node.get<double>();
}

double positive(const json& node, const std::string& path) {
  const double v = number(node, path);
  if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be positive");
  return v;
}

double field(const json& node, const std::string& path, const char* key, double fallback) {
  return node.contains(key) ? number(node.at(key), path + "." + key) : fallback;
}

double positive_field(const json& node, const std::string& path, const char* key, double fallback) {
  return node.contains(key) ? positive(node.at(key), path + "." + key) : fallback;
}

style::Vector vector(const json& node, const std::string& path) {
  if (!node.is_array() || node.empty()) fail(path, "expected a non-empty array of numbers");
  style::Vector v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = number(node[i], path + "[" + std::to_string(i) + "]");
  return v;
}

std::uint64_t unsigned_integer(const json& node, const std::string& path) {
  if (!node.is_number_unsigned() && !(node.is_number_integer() && node.get<std::int64_t>() >= 0))
    fail(path, "expected a nonnegative integer");
  return node.get<std::uint64_t>();
}

std::string text(const json& node, const std::string& path) {
  if (!node.is_string()) fail(path, "expected a string");
  return node.get<std::string>();
}

style::TransformSpec parse_transform(const json& node, const std::string& path) {
  check_keys(node, path, {"kind", "kappa", "alpha", "c_eps"});
  style::TransformSpec spec;
  const std::string kind = node.contains("kind") ? text(node.at("kind"), path + ".kind") : "exponential";
  if (kind == "exponential") {
    spec.kind = style::TransformKind::Exponential;
    spec.kappa = positive_field(node, path, "kappa", 1.0);
  } else if (kind == "inverse_power") {
    spec.kind = style::TransformKind::InversePower;
    spec.alpha = field(node, path, "alpha", 2.0);
    if (!(spec.alpha > 1.0)) fail(path + ".alpha", "must exceed 1");
    spec.c_eps = positive_field(node, path, "c_eps", 1.0);
  } else {
    fail(path + ".kind", "expected 'exponential' or 'inverse_power'");
  }
  return spec;
}

supply::InvestmentConstraint parse_constraint(const json& node, const std::string& path) {
  supply::InvestmentConstraint c;
  c.budget = positive(require(node, path, "budget"), path + ".budget");
  const std::string cost = node.contains("cost") ? text(node.at("cost"), path + ".cost") : "quadratic_norm";
  if (cost == "quadratic_norm") {
    c.kind = supply::CostKind::QuadraticNorm;
    if (node.contains("weights")) fail(path + ".weights", "only valid with cost 'weighted_quadratic'");
  } else if (cost == "weighted_quadratic") {
    c.kind = supply::CostKind::WeightedQuadratic;
    c.weights = vector(require(node, path, "weights"), path + ".weights");
    for (Eigen::Index i = 0; i < c.weights.size(); ++i)
      if (!(c.weights[i] > 0.0)) fail(path + ".weights[" + std::to_string(i) + "]", "must be positive");
  } else {
    fail(path + ".cost", "expected 'quadratic_norm' or 'weighted_quadratic'");
  }
  return c;
}

equilibrium::StyleUpdatePolicy parse_policy(const json& node, const std::string& path) {
  check_keys(node, path, {"budget", "efficiency", "slope", "cap", "rate"});
  equilibrium::StyleUpdatePolicy p;
  p.budget = field(node, path, "budget", 0.0);
  if (!(p.budget >= 0.0)) fail(path + ".budget", "must be nonnegative");
  const std::string kind =
      node.contains("efficiency") ? text(node.at("efficiency"), path + ".efficiency") : "linear";
  if (kind == "linear") {
    p.efficiency = equilibrium::Efficiency::Linear;
    p.slope = positive_field(node, path, "slope", 1.0);
  } else if (kind == "saturating") {
    p.efficiency = equilibrium::Efficiency::Saturating;
    p.cap = positive_field(node, path, "cap", 1.0);
    p.rate = positive_field(node, path, "rate", 1.0);
  } else {
    fail(path + ".efficiency", "expected 'linear' or 'saturating'");
  }
  return p;
}

CashFlowBlock parse_cash_flow(const json& node, const std::string& path) {
  check_keys(node, path, {"u", "delta", "k", "theta", "curve", "drift_norm", "policy", "investment"});
  CashFlowBlock b;
  if (node.contains("u")) b.u = positive(node.at("u"), path + ".u");
  if (node.contains("delta")) b.delta = positive(node.at("delta"), path + ".delta");
  b.k = positive(require(node, path, "k"), path + ".k");
  b.theta = positive(require(node, path, "theta"), path + ".theta");
  if (node.contains("curve")) {
    const auto& curve = node.at("curve");
    if (!curve.is_array() || curve.empty()) fail(path + ".curve", "expected a non-empty array");
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const std::string p = path + ".curve[" + std::to_string(i) + "]";
      check_keys(curve[i], p, {"share", "beta0", "mu", "nu"});
      equilibrium::CurveTerm term;
      term.share = positive_field(curve[i], p, "share", 1.0);
      term.beta0 = positive(require(curve[i], p, "beta0"), p + ".beta0");
      if (!(term.beta0 < 1.0)) fail(p + ".beta0", "must lie in (0, 1)");
      term.mu = field(curve[i], p, "mu", 0.0);
      term.nu = number(require(curve[i], p, "nu"), p + ".nu");
      if (!(term.nu >= 0.0)) fail(p + ".nu", "must be nonnegative");
      b.curve.push_back(term);
    }
  }
  if (node.contains("drift_norm")) {
    b.drift_norm = number(node.at("drift_norm"), path + ".drift_norm");
    if (!(*b.drift_norm >= 0.0)) fail(path + ".drift_norm", "must be nonnegative");
  }
  if (node.contains("policy")) b.policy = parse_policy(node.at("policy"), path + ".policy");
  if (node.contains("investment"))
    b.investment = unsigned_integer(node.at("investment"), path + ".investment");
  return b;
}

spatial::StoreSite parse_site(const json& node, const std::string& path, int index) {
  check_keys(node, path, {"x", "y", "t0", "k"});
  spatial::StoreSite s;
  s.location = {field(node, path, "x", 0.0), field(node, path, "y", 0.0)};
  s.opening_time = field(node, path, "t0", 0.0);
  s.k = positive_field(node, path, "k", 1.0);
  s.index = index;
  return s;
}

}  // namespace

spatial::SpatialScene parse_scene(const json& node, const std::string& path) {
  check_keys(node, path, {"delta", "u", "focal", "competitors"});
  spatial::SpatialScene scene;
  scene.delta = positive_field(node, path, "delta", 1.535);
  scene.u = positive(require(node, path, "u"), path + ".u");
  scene.focal = node.contains("focal") ? parse_site(node.at("focal"), path + ".focal", 0) : spatial::StoreSite{};
  if (node.contains("competitors")) {
    const auto& list = node.at("competitors");
    if (!list.is_array()) fail(path + ".competitors", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i)
      scene.competitors.push_back(parse_site(list[i], path + ".competitors[" + std::to_string(i) + "]",
                                             static_cast<int>(i) + 1));
  }
  try {
    scene.validate();
  } catch (const DomainError& e) {
    fail(path, e.what());
  }
  return scene;
}

json load_json(const std::string& path) {
  const std::string body = io::read_text(path);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

spatial::SpatialScene load_scene(const std::string& path) {
  const json doc = load_json(path);
  if (doc.is_object() && doc.contains("scene")) return parse_scene(doc.at("scene"), "scene");
  return parse_scene(doc, "scene");
}

ScenarioConfig parse_scenario(const json& doc, std::uint64_t default_seed) {
  check_keys(doc, "config",
             {"population", "traditional", "drift", "transform", "investments", "scene", "cash_flow",
              "options"});
  ScenarioConfig cfg;
  cfg.options.seed = default_seed;

  if (doc.contains("population")) {
    const auto& pop = doc.at("population");
    if (!pop.is_array() || pop.empty()) fail("population", "expected a non-empty array");
    std::vector<style::ConsumerType> types;
    for (std::size_t j = 0; j < pop.size(); ++j) {
      const std::string p = "population[" + std::to_string(j) + "]";
      check_keys(pop[j], p, {"a", "b", "lambda", "gamma", "share", "beta0"});
      style::ConsumerType c;
      c.a = vector(require(pop[j], p, "a"), p + ".a");
      c.b = vector(require(pop[j], p, "b"), p + ".b");
      c.lambda = positive_field(pop[j], p, "lambda", 1.0);
      c.gamma = positive_field(pop[j], p, "gamma", 1.0);
      c.share = positive(require(pop[j], p, "share"), p + ".share");
      if (c.share > 1.0) fail(p + ".share", "must lie in (0, 1]");
      types.push_back(c);
      if (pop[j].contains("beta0")) {
        const double b0 = positive(pop[j].at("beta0"), p + ".beta0");
        if (!(b0 < 1.0)) fail(p + ".beta0", "must lie in (0, 1)");
        cfg.beta0.push_back(b0);
      }
    }
    if (!cfg.beta0.empty() && cfg.beta0.size() != types.size())
      fail("population", "beta0 must be given for every type or for none");

    const auto& trad = require(doc, "config", "traditional");
    check_keys(trad, "traditional", {"x_bar0", "xi_bar0"});
    style::TraditionalStyle ts{vector(require(trad, "traditional", "x_bar0"), "traditional.x_bar0"),
                               vector(require(trad, "traditional", "xi_bar0"), "traditional.xi_bar0")};
    style::PreferenceDrift drift{vector(require(doc, "config", "drift"), "drift")};
    const auto spec = doc.contains("transform") ? parse_transform(doc.at("transform"), "transform")
                                                : style::TransformSpec{};
    for (std::size_t j = 0; j < types.size(); ++j) {
      const std::string p = "population[" + std::to_string(j) + "]";
      if (types[j].a.size() != ts.x_bar0.size()) fail(p + ".a", "dimension must equal traditional.x_bar0");
      if (types[j].b.size() != ts.xi_bar0.size()) fail(p + ".b", "dimension must equal traditional.xi_bar0");
    }
    if (drift.c.size() != ts.x_bar0.size()) fail("drift", "dimension must equal traditional.x_bar0");
    try {
      cfg.market.emplace(std::move(types), std::move(ts), std::move(drift), spec);
    } catch (const DomainError& e) {
      fail("population", e.what());
    }
  }

  if (doc.contains("investments")) {
    const auto& list = doc.at("investments");
    if (!list.is_array() || list.empty()) fail("investments", "expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string p = "investments[" + std::to_string(i) + "]";
      check_keys(list[i], p, {"budget", "cost", "weights", "weight", "threshold"});
      equilibrium::InvestmentLevel level;
      level.constraint = parse_constraint(list[i], p);
      level.weight = positive_field(list[i], p, "weight", 1.0);
      level.threshold = positive(require(list[i], p, "threshold"), p + ".threshold");
      if (cfg.market) {
        try {
          level.constraint.check_tight(*cfg.market);
        } catch (const DomainError& e) {
          fail(p, e.what());
        }
      }
      cfg.investments.push_back(std::move(level));
    }
  }

  if (doc.contains("scene")) cfg.scene = parse_scene(doc.at("scene"), "scene");
  if (doc.contains("cash_flow")) {
    cfg.cash_flow = parse_cash_flow(doc.at("cash_flow"), "cash_flow");
    if (cfg.cash_flow->curve.empty()) {
      if (!cfg.market || cfg.investments.empty() || cfg.beta0.empty())
        fail("cash_flow.curve",
             "missing; deriving the curve needs population (with beta0) and investments");
      if (cfg.cash_flow->investment >= cfg.investments.size())
        fail("cash_flow.investment", "index out of range");
    } else {
      equilibrium::ConversionCurveParams curve{cfg.cash_flow->curve, cfg.cash_flow->drift_norm};
      try {
        curve.validate();
      } catch (const DomainError& e) {
        fail("cash_flow.curve", e.what());
      }
    }
    if (cfg.cash_flow->policy && cfg.cash_flow->curve.size() && !cfg.cash_flow->drift_norm)
      fail("cash_flow.policy", "a style update policy needs cash_flow.drift_norm");
    if (!cfg.cash_flow->u && !cfg.scene) fail("cash_flow.u", "missing and no scene to derive u' from");
  }

  if (doc.contains("options")) {
    const auto& opt = doc.at("options");
    check_keys(opt, "options", {"seed", "mc_samples", "supply", "equilibrium"});
    if (opt.contains("seed")) cfg.options.seed = unsigned_integer(opt.at("seed"), "options.seed");
    if (opt.contains("mc_samples")) {
      cfg.options.mc_samples = unsigned_integer(opt.at("mc_samples"), "options.mc_samples");
      if (cfg.options.mc_samples < spatial::MonteCarloConfig::kMinSamples)
        fail("options.mc_samples", "must be at least " + std::to_string(spatial::MonteCarloConfig::kMinSamples));
    }
    if (opt.contains("supply")) {
      const auto& s = opt.at("supply");
      check_keys(s, "options.supply", {"theta_lo", "theta_hi", "restarts", "seed"});
      auto& so = cfg.options.supply;
      so.theta_lo = positive_field(s, "options.supply", "theta_lo", so.theta_lo);
      so.theta_hi = positive_field(s, "options.supply", "theta_hi", so.theta_hi);
      if (!(so.theta_hi > so.theta_lo)) fail("options.supply.theta_hi", "must exceed theta_lo");
      if (s.contains("restarts"))
        so.restarts = static_cast<int>(unsigned_integer(s.at("restarts"), "options.supply.restarts"));
      if (s.contains("seed")) so.seed = unsigned_integer(s.at("seed"), "options.supply.seed");
    }
    if (opt.contains("equilibrium")) {
      const auto& e = opt.at("equilibrium");
      check_keys(e, "options.equilibrium",
                 {"damping", "max_iter", "tolerance", "max_backward_sweeps", "time_nodes"});
      auto& eo = cfg.options.equilibrium;
      eo.damping = positive_field(e, "options.equilibrium", "damping", eo.damping);
      if (eo.damping > 1.0) fail("options.equilibrium.damping", "must lie in (0, 1]");
      if (e.contains("max_iter"))
        eo.max_iter = static_cast<int>(unsigned_integer(e.at("max_iter"), "options.equilibrium.max_iter"));
      eo.tolerance = positive_field(e, "options.equilibrium", "tolerance", eo.tolerance);
      if (e.contains("max_backward_sweeps"))
        eo.max_backward_sweeps = static_cast<int>(
            unsigned_integer(e.at("max_backward_sweeps"), "options.equilibrium.max_backward_sweeps"));
      if (e.contains("time_nodes")) {
        eo.time_nodes = static_cast<int>(unsigned_integer(e.at("time_nodes"), "options.equilibrium.time_nodes"));
        if (eo.time_nodes < 8) fail("options.equilibrium.time_nodes", "must be at least 8");
      }
    }
  }
  cfg.options.equilibrium.supply = cfg.options.supply;
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path, std::uint64_t default_seed) {
  const json doc = load_json(path);
  try {
    return parse_scenario(doc, default_seed);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

cashflow::CashFlowParams resolve_cash_flow(const ScenarioConfig& cfg) {
  if (!cfg.cash_flow) throw ConfigError("cash_flow: missing required block");
  const auto& b = *cfg.cash_flow;
  cashflow::CashFlowParams p;
  p.delta = b.delta ? *b.delta : (cfg.scene ? cfg.scene->delta : 1.535);
  p.u_eff = b.u ? *b.u : spatial::equivalent_density(*cfg.scene);
  p.k = b.k;
  p.theta = b.theta;
  p.policy = b.policy;
  if (!b.curve.empty()) {
    p.curve = {b.curve, b.drift_norm};
  } else {
    const auto solution = equilibrium::solve_equilibrium(*cfg.market, cfg.investments,
                                                         cfg.options.equilibrium);
    p.curve = equilibrium::conversion_curve(solution, *cfg.market, b.investment, cfg.beta0);
    if (b.drift_norm) p.curve.drift_norm = b.drift_norm;
  }
  p.validate();
  return p;
}

}  // namespace storecycle::config
