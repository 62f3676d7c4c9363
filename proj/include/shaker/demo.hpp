#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "shaker/config.hpp"
#include "shaker/session.hpp"

namespace shaker {

struct DemoOrder {
  std::string text;
  std::string scene;  // file name under <data>/scenes
  // anomaly_id -> choice, applied whenever the session asks.
  std::map<std::string, std::string> answers;
};

// Seven fully stocked orders and three that need sugar swapped for honey.
std::vector<DemoOrder> default_demo_script();

struct DemoResult {
  std::string text;
  std::string session_id;
  SessionState state = SessionState::kOrdered;
  std::string failure;
  std::size_t pours = 0;
  bool all_pours_within_tolerance = false;
  double glass_mass_g = 0.0;
  double conservation_drift_g = 0.0;
  std::vector<std::string> prompts;  // every prompt text the session spoke
};

// Runs each order as its own session; order i uses seed + i. Progress lines go
// to `log` when given. Errors: kIo / kSchemaViolation from loading data.
std::vector<DemoResult> run_demo(const AppConfig& config, const std::filesystem::path& scenes_dir,
                                 const std::vector<DemoOrder>& script, std::uint64_t seed,
                                 std::ostream* log = nullptr);

}  // namespace shaker
