#include "shaker/demo.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "shaker/error.hpp"

namespace shaker {

std::vector<DemoOrder> default_demo_script() {
  const std::map<std::string, std::string> honey = {{"missing:sugar", "honey"}};
  return {
      {"Make me a Mojito", "bar-full.json", {}},
      {"make a margarita", "bar-full.json", {}},
      {"Make me a Gin and Tonic", "bar-full.json", {}},
      {"make me a cosmopolitan", "bar-full.json", {}},
      {"Make me a Screwdriver", "bar-full.json", {}},
      {"Make me a Cuba Libre", "bar-full.json", {}},
      {"Make me a Long Island Iced Tea", "bar-full.json", {}},
      {"Make me a Daiquiri", "bar-no-sugar.json", honey},
      {"Make me a Caipirinha", "bar-no-sugar.json", honey},
      {"make me a whiskey sour", "bar-no-sugar.json", honey},
  };
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<DemoResult> run_demo(const AppConfig& config, const std::filesystem::path& scenes_dir,
                                 const std::vector<DemoOrder>& script, std::uint64_t seed, std::ostream* log) {
  auto index = std::make_shared<RecipeIndex>();
  index->reload(load_recipe_directory(config.recipes_dir));
  const SubstitutionTable rules = load_rules(config);

  std::map<std::string, std::shared_ptr<const InventorySnapshot>> scenes;
  std::vector<DemoResult> results;
  for (std::size_t i = 0; i < script.size(); ++i) {
    const DemoOrder& order = script[i];
    auto& snapshot = scenes[order.scene];
    if (!snapshot) {
      snapshot = std::make_shared<const InventorySnapshot>(
          build_snapshot(parse_detection_document(read_file(scenes_dir / order.scene)), config.snapshot));
    }

    SessionContext ctx;
    ctx.index = index;
    ctx.snapshot = snapshot;
    ctx.rules = rules;
    ctx.diff_options = config.diff;
    ctx.sim = config.sim;
    ctx.orchestrator = config.orchestrator;
    ctx.seed = seed + i;

    char id[32];
    std::snprintf(id, sizeof id, "demo-%02zu", i + 1);
    Session session(id, order.text, std::move(ctx));
    DemoResult r;
    r.text = order.text;
    r.session_id = id;

    session.run_until_blocked();
    while (session.state() == SessionState::kAwaitingUser) {
      const auto prompts = session.outstanding_prompts();
      const UserPrompt* chosen = nullptr;
      std::string choice;
      for (const auto& p : prompts) {
        r.prompts.push_back(p.text);
        if (const auto it = order.answers.find(p.anomaly_id); it != order.answers.end() && !chosen) {
          chosen = &p;
          choice = it->second;
        }
      }
      if (!chosen) {
        session.advance(Stimulus::answer(prompts.front().anomaly_id, std::string(kAbortOption)));
        break;
      }
      if (log) *log << "  [" << id << "] " << chosen->text << " -> " << choice << "\n";
      session.advance(Stimulus::answer(chosen->anomaly_id, choice));
      session.run_until_blocked();
    }

    r.state = session.state();
    r.failure = session.failure();
    if (const auto& report = session.report()) {
      r.pours = report->traces.size();
      r.all_pours_within_tolerance = report->all_pours_within_tolerance();
      r.glass_mass_g = report->final_state.glass_arm.glass_mass_g;
      r.conservation_drift_g = report->conservation_drift_g();
    }
    if (log) {
      *log << id << "  " << order.text << "  -> " << to_string(r.state);
      if (session.recipe_id()) *log << " (" << *session.recipe_id() << ")";
      *log << "  pours=" << r.pours << " glass=" << r.glass_mass_g << " g";
      if (!r.failure.empty()) *log << "  failure: " << r.failure;
      *log << "\n";
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace shaker
