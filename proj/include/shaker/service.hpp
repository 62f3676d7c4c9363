#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "shaker/config.hpp"
#include "shaker/perception.hpp"
#include "shaker/recipe_corpus.hpp"
#include "shaker/session.hpp"

namespace httplib {
class Server;
}

namespace shaker {

// An HTTP-independent facade over sessions, the recipe index and the
// inventory. Handlers and tests both go through it.
class Service {
 public:
  Service(std::shared_ptr<RecipeIndex> index, SubstitutionTable rules, AppConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // {"text", "unattended"?, "seed"?}. Returns {"session_id"} and drives the
  // new session on a worker, or {"intent": "list_recipes", ...} for a listing
  // request. Errors: kSchemaViolation.
  nlohmann::json place_order(const nlohmann::json& body);

  // Errors: kNotFound.
  nlohmann::json session_snapshot(const std::string& id) const;

  // Applies the answer and drives the session on to its next blocking point.
  // Errors: kNotFound, kSchemaViolation, kIllegalStimulus, kIllegalOption.
  nlohmann::json answer(const std::string& id, const nlohmann::json& body);

  // Events with seq > since; waits up to `wait` for one to appear.
  std::vector<SessionEvent> events(const std::string& id, std::uint64_t since,
                                   std::chrono::milliseconds wait) const;

  nlohmann::json list_recipes() const;
  nlohmann::json add_recipe(const nlohmann::json& body);
  void remove_recipe(const std::string& id);

  nlohmann::json put_inventory(std::string_view detection_document);
  nlohmann::json inventory() const;

  // Blocks until no session driver is running.
  void wait_idle();

  void mount(httplib::Server& server);

 private:
  struct Handle;
  std::shared_ptr<Handle> find(const std::string& id) const;
  void drive(const std::shared_ptr<Handle>& handle);

  std::shared_ptr<RecipeIndex> index_;
  SubstitutionTable rules_;
  AppConfig config_;
  InventoryStore inventory_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Handle>> sessions_;
  std::uint64_t next_session_ = 1;

  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

// "host:port" or ":port". Errors: kInvalidArgument.
std::pair<std::string, int> parse_bind(std::string_view bind);

// The address to bind: `flag` if set, else SHAKER_BIND, else the config value.
std::string resolve_bind(const std::optional<std::string>& flag, const AppConfig& config);

// Serves until the server is stopped. Returns false if binding failed.
bool serve(Service& service, const std::string& bind);

int http_status_for(ErrorCode code);

}  // namespace shaker
