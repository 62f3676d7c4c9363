#include "shaker/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <functional>
#include <map>

#include "shaker/error.hpp"
#include "shaker/text.hpp"

namespace shaker {

namespace pt = boost::property_tree;

AppConfig default_config(const std::filesystem::path& data_dir) {
  AppConfig c;
  c.recipes_dir = data_dir / "recipes";
  c.substitutions_path = data_dir / "substitutions.json";
  return c;
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kSchemaViolation, "expected a number for " + key, key);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::kSchemaViolation, "expected a boolean for " + key, key);
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw Error(ErrorCode::kSchemaViolation, "expected a non-negative integer for " + key, key);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

AppConfig load_config(const std::filesystem::path& path, AppConfig c) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kIo, std::string("cannot read config: ") + e.what(), path.string());
  }
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : dir / fp;
  };

  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const std::map<std::string, Setter> setters = {
      {"paths.recipes", [&](auto&, auto& v) { c.recipes_dir = resolve(v); }},
      {"paths.substitutions", [&](auto&, auto& v) { c.substitutions_path = v.empty() ? "" : resolve(v); }},
      {"perception.confidence_threshold",
       [&](auto& k, auto& v) { c.snapshot.confidence_threshold = to_double(k, v); }},
      {"perception.default_volume_ml", [&](auto& k, auto& v) { c.snapshot.default_volume_ml = to_double(k, v); }},
      {"reconciliation.suggestion_threshold",
       [&](auto& k, auto& v) { c.diff.suggestion_threshold = to_double(k, v); }},
      {"orchestrator.min_retrieval_score",
       [&](auto& k, auto& v) { c.orchestrator.min_retrieval_score = to_double(k, v); }},
      {"orchestrator.unattended", [&](auto& k, auto& v) { c.orchestrator.unattended = to_bool(k, v); }},
      {"orchestrator.progress_every_samples",
       [&](auto& k, auto& v) { c.orchestrator.progress_every_samples = to_count(k, v); }},
      {"sim.q_max_ml_per_s", [&](auto& k, auto& v) { c.sim.flow.q_max_ml_per_s = to_double(k, v); }},
      {"sim.theta_min_rad", [&](auto& k, auto& v) { c.sim.flow.theta_min_rad = to_double(k, v); }},
      {"sim.tare_g", [&](auto& k, auto& v) { c.sim.sensor.tare_g = to_double(k, v); }},
      {"sim.noise_sigma_g", [&](auto& k, auto& v) { c.sim.sensor.noise_sigma_g = to_double(k, v); }},
      {"sim.sample_period_s", [&](auto& k, auto& v) { c.sim.sensor.sample_period_s = to_double(k, v); }},
      {"sim.latency_samples",
       [&](auto& k, auto& v) { c.sim.sensor.latency_samples = static_cast<int>(to_count(k, v)); }},
      {"sim.take_glass_s", [&](auto& k, auto& v) { c.sim.durations.take_glass_s = to_double(k, v); }},
      {"sim.take_bottle_s", [&](auto& k, auto& v) { c.sim.durations.take_bottle_s = to_double(k, v); }},
      {"sim.left_bottle_s", [&](auto& k, auto& v) { c.sim.durations.left_bottle_s = to_double(k, v); }},
      {"sim.give_user_s", [&](auto& k, auto& v) { c.sim.durations.give_user_s = to_double(k, v); }},
      {"sim.timeout_s", [&](auto& k, auto& v) { c.sim.controller.timeout_s = to_double(k, v); }},
      {"sim.filter_window", [&](auto& k, auto& v) { c.sim.controller.filter_window = to_count(k, v); }},
      {"service.bind", [&](auto&, auto& v) { c.bind = v; }},
  };

  for (const auto& [section, body] : tree) {
    if (section == "volumes") {
      for (const auto& [label, value] : body) {
        const std::string key = "volumes." + label;
        c.snapshot.volume_by_label[normalize_text(label)] = to_double(key, value.data());
      }
      continue;
    }
    if (body.empty()) {
      throw Error(ErrorCode::kSchemaViolation, "top-level key outside a section: " + section, section);
    }
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      const auto it = setters.find(key);
      if (it == setters.end()) throw Error(ErrorCode::kSchemaViolation, "unknown config key " + key, key);
      it->second(key, value.data());
    }
  }
  c.sim.validate();
  return c;
}

SubstitutionTable load_rules(const AppConfig& config) {
  if (config.substitutions_path.empty()) return default_substitution_table();
  return load_substitution_table(config.substitutions_path.string());
}

}  // namespace shaker
