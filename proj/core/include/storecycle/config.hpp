#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "storecycle/cashflow.hpp"
#include "storecycle/equilibrium.hpp"
#include "storecycle/spatial.hpp"
#include "storecycle/style_space.hpp"

namespace storecycle::config {

/// Direct description of the cash-flow curve. When `curve` is empty the
/// curve is derived from the equilibrium of the scenario's population.
struct CashFlowBlock {
  std::optional<double> u;  // defaults to u' of the scene
  std::optional<double> delta;
  double k = 0.01;
  double theta = 1.0;
  std::vector<equilibrium::CurveTerm> curve;
  std::optional<double> drift_norm;
  std::optional<equilibrium::StyleUpdatePolicy> policy;
  std::size_t investment = 0;
};

struct RunOptions {
  std::uint64_t seed = 0;
  std::size_t mc_samples = 1'000'000;
  supply::SupplyOptions supply;
  equilibrium::EquilibriumOptions equilibrium;
};

struct ScenarioConfig {
  std::optional<style::Market> market;
  std::vector<double> beta0;  // one per consumer type, used to derive curves
  std::vector<equilibrium::InvestmentLevel> investments;
  std::optional<spatial::SpatialScene> scene;
  std::optional<CashFlowBlock> cash_flow;
  RunOptions options;
};

/// Parses and validates a scenario document. Every failure is a ConfigError
/// whose message starts with the offending field path.
ScenarioConfig parse_scenario(const nlohmann::json& doc, std::uint64_t default_seed = 0);
ScenarioConfig load_scenario(const std::string& path, std::uint64_t default_seed = 0);

spatial::SpatialScene parse_scene(const nlohmann::json& doc, const std::string& path = "scene");
spatial::SpatialScene load_scene(const std::string& path);

/// Reads a JSON document, reporting syntax errors with line and column.
nlohmann::json load_json(const std::string& path);

/// Cash-flow parameters of the scenario; solves the equilibrium when the
/// curve has to be derived from the population.
cashflow::CashFlowParams resolve_cash_flow(const ScenarioConfig& config);

}  // namespace storecycle::config
