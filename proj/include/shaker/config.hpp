#pragma once

#include <filesystem>
#include <string>

#include "shaker/perception.hpp"
#include "shaker/reconciliation.hpp"
#include "shaker/session.hpp"
#include "shaker/sim.hpp"

namespace shaker {

struct AppConfig {
  std::filesystem::path recipes_dir;
  std::filesystem::path substitutions_path;  // empty: built-in sugar -> honey
  SnapshotConfig snapshot;
  DiffOptions diff;
  OrchestratorConfig orchestrator;
  sim::SimConfig sim;
  std::string bind = "127.0.0.1:8080";
};

// Defaults rooted at a data directory holding recipes/ and substitutions.json.
AppConfig default_config(const std::filesystem::path& data_dir);

// Reads an INI file over `base`. Relative paths resolve against the file's
// directory. Unknown keys are rejected. Errors: kIo, kSchemaViolation
// (detail is "section.key").
AppConfig load_config(const std::filesystem::path& path, AppConfig base);

SubstitutionTable load_rules(const AppConfig& config);

}  // namespace shaker
