// Command-line front end. Each subcommand wraps one library operation; results
// go to stdout as JSON, errors to stderr as {"error", "message", "detail"}.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "shaker/config.hpp"
#include "shaker/demo.hpp"
#include "shaker/error.hpp"
#include "shaker/plan.hpp"
#include "shaker/recipe_corpus.hpp"
#include "shaker/reconciliation.hpp"
#include "shaker/service.hpp"
#include "shaker/sim.hpp"

#ifndef SHAKER_DATA_DIR
#define SHAKER_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shaker;

namespace {

struct Globals {
  std::string config_path;
  std::string data_dir = SHAKER_DATA_DIR;
  std::string recipes_dir;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorCode::kIo, "cannot write " + path, path);
}

AppConfig make_config(const Globals& g) {
  AppConfig c = default_config(g.data_dir);
  if (!g.config_path.empty()) {
    c = load_config(g.config_path, c);
  } else if (const fs::path ini = fs::path(g.data_dir) / "shaker.ini"; fs::exists(ini)) {
    c = load_config(ini, c);
  }
  if (!g.recipes_dir.empty()) c.recipes_dir = g.recipes_dir;
  return c;
}

std::shared_ptr<RecipeIndex> load_index(const AppConfig& c) {
  auto index = std::make_shared<RecipeIndex>();
  index->reload(load_recipe_directory(c.recipes_dir));
  return index;
}

InventorySnapshot load_snapshot(const std::string& path, const AppConfig& c) {
  return build_snapshot(parse_detection_document(read_file(path)), c.snapshot);
}

Recipe require_recipe(const RecipeIndex& index, const std::string& id) {
  auto r = index.find(id);
  if (!r) throw Error(ErrorCode::kUnknownId, "no recipe " + id, id);
  return *r;
}

std::map<std::string, std::string> parse_answers(const std::vector<std::string>& raw) {
  std::map<std::string, std::string> answers;
  for (const auto& a : raw) {
    const auto eq = a.rfind('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
      throw Error(ErrorCode::kInvalidArgument, "--answer expects anomaly_id=choice", a);
    }
    answers[a.substr(0, eq)] = a.substr(eq + 1);
  }
  return answers;
}

// Applies answers as their anomalies come up, so a chain of answers can walk
// several rounds of reconciliation.
Resolution reconcile_with(const Recipe& recipe, const InventorySnapshot& snapshot, const AppConfig& c,
                          bool unattended, std::map<std::string, std::string> answers) {
  Reconciler rec(recipe, snapshot, load_rules(c), c.diff);
  for (bool progress = true; progress && !rec.resolved();) {
    progress = false;
    for (const auto& a : std::vector<Anomaly>(rec.anomalies())) {
      const auto it = answers.find(a.anomaly_id);
      if (it == answers.end()) continue;
      const std::string choice = it->second;
      answers.erase(it);
      if (!rec.answer(a.anomaly_id, choice)) return Aborted{a.anomaly_id};
      progress = true;
      break;
    }
  }
  if (!answers.empty()) {
    throw Error(ErrorCode::kUnknownAnomalyId, "no outstanding anomaly " + answers.begin()->first,
                answers.begin()->first);
  }
  if (!rec.resolved() && unattended) rec.resolve_unattended();
  if (!rec.resolved()) return Pending{rec.anomalies()};
  return rec.result();
}

json resolution_json(const Resolution& r) {
  if (const auto* done = std::get_if<ResolvedRecipe>(&r)) return {{"status", "resolved"}, {"resolved", to_json(*done)}};
  if (const auto* ab = std::get_if<Aborted>(&r)) return {{"status", "aborted"}, {"anomaly_id", ab->anomaly_id}};
  const auto& pending = std::get<Pending>(r);
  json anomalies = json::array();
  json prompts = json::array();
  for (const auto& a : pending.anomalies) {
    anomalies.push_back(to_json(a));
    prompts.push_back(to_json(propose_prompt(a)));
  }
  return {{"status", "pending"}, {"anomalies", anomalies}, {"prompts", prompts}};
}

int report_error(const Error& e) {
  json err = {{"error", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    json list = json::array();
    for (const auto& violation : v->violations()) list.push_back(to_json(violation));
    err["violations"] = list;
  }
  std::cerr << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cocktail robot pipeline: recipes, inventory, planning, simulation and service"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file");
  app.add_option("--data", g.data_dir, "Data directory (recipes/, scenes/, substitutions.json)");
  app.add_option("--recipes", g.recipes_dir, "Recipe directory (overrides config)");

  std::string dir, query, detections, recipe_id, program_path, output;
  std::size_t k = 5;
  bool unattended = false;
  std::vector<std::string> answers;
  std::uint64_t seed = 0;
  std::optional<std::string> bind;
  std::string serve_inventory;

  auto* ingest = app.add_subcommand("ingest", "Load and validate a recipe directory");
  ingest->add_option("recipes-dir", dir)->required();

  auto* retrieve = app.add_subcommand("retrieve", "Top-k recipes for a query");
  retrieve->add_option("query", query)->required();
  retrieve->add_option("-k", k, "Number of hits")->check(CLI::PositiveNumber);

  auto* inventory = app.add_subcommand("inventory", "Build an inventory snapshot from detections");
  inventory->add_option("detections", detections)->required();

  auto* reconcile = app.add_subcommand("reconcile", "Diff a recipe against an inventory");
  auto* compile_cmd = app.add_subcommand("compile", "Compile a resolved recipe to an action program");
  for (auto* sub : {reconcile, compile_cmd}) {
    sub->add_option("recipe-id", recipe_id)->required();
    sub->add_option("detections", detections)->required();
    sub->add_flag("--unattended", unattended, "Resolve anomalies by substitution rules");
    sub->add_option("--answer", answers, "anomaly_id=choice (repeatable)");
  }
  compile_cmd->add_option("-o,--output", output, "Program file (default stdout)");

  auto* simulate = app.add_subcommand("simulate", "Execute a program in the simulated cell");
  simulate->add_option("program", program_path)->required();
  simulate->add_option("detections", detections)->required();
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("-o,--output", output, "Report file (default stdout)");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--bind", bind, "host:port (default: $SHAKER_BIND or config)");
  serve_cmd->add_option("--inventory", serve_inventory, "Initial detection document");

  auto* demo = app.add_subcommand("demo", "Scripted end-to-end sessions");
  demo->add_option("--seed", seed, "Base seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const AppConfig config = make_config(g);

    if (*ingest) {
      const auto recipes = load_recipe_directory(dir);
      RecipeIndex index;
      index.reload(recipes);
      json ids = json::array();
      for (const auto& r : recipes) ids.push_back(r.id);
      std::cout << json{{"ingested", index.size()}, {"ids", ids}}.dump(2) << "\n";
    } else if (*retrieve) {
      json hits = json::array();
      for (const auto& h : load_index(config)->retrieve(query, k)) {
        hits.push_back({{"rank", h.rank}, {"recipe_id", h.recipe_id}, {"score", h.score}});
      }
      std::cout << hits.dump(2) << "\n";
    } else if (*inventory) {
      std::cout << to_json(load_snapshot(detections, config)).dump(2) << "\n";
    } else if (*reconcile || *compile_cmd) {
      const auto index = load_index(config);
      const Recipe recipe = require_recipe(*index, recipe_id);
      const InventorySnapshot snapshot = load_snapshot(detections, config);
      const Resolution r = reconcile_with(recipe, snapshot, config, unattended, parse_answers(answers));
      if (*reconcile) {
        std::cout << resolution_json(r).dump(2) << "\n";
      } else {
        const auto* done = std::get_if<ResolvedRecipe>(&r);
        if (!done) {
          std::cerr << resolution_json(r).dump() << "\n";
          throw Error(ErrorCode::kUnresolvedRecipe, "recipe has unresolved anomalies", recipe_id);
        }
        write_output(output, serialize(compile(*done, snapshot)));
      }
    } else if (*simulate) {
      const ActionProgram program = deserialize(read_file(program_path));
      const InventorySnapshot snapshot = load_snapshot(detections, config);
      const auto report = sim::execute(program, snapshot, config.sim, seed);
      write_output(output, to_json(report).dump(2) + "\n");
      if (!report.ok) {
        std::cerr << json{{"error", report.error_code}, {"message", report.error_message}}.dump() << "\n";
        return 1;
      }
    } else if (*serve_cmd) {
      Service service(load_index(config), load_rules(config), config);
      if (!serve_inventory.empty()) service.put_inventory(read_file(serve_inventory));
      const std::string address = resolve_bind(bind, config);
      std::cerr << "listening on " << address << "\n";
      if (!serve(service, address)) throw Error(ErrorCode::kIo, "cannot bind " + address, address);
    } else if (*demo) {
      const auto results =
          run_demo(config, fs::path(g.data_dir) / "scenes", default_demo_script(), seed, &std::cout);
      std::size_t served = 0;
      for (const auto& r : results) served += r.state == SessionState::kServed && r.all_pours_within_tolerance;
      std::cout << served << "/" << results.size() << " sessions served\n";
      return served == results.size() ? 0 : 1;
    }
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
