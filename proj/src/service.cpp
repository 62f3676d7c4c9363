#include "shaker/service.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json_util.hpp"
#include "shaker/error.hpp"

namespace shaker {

using nlohmann::json;

struct Service::Handle {
  explicit Handle(Session s) : session(std::move(s)), log(session.event_log()) {}
  mutable std::mutex mutex;
  Session session;
  std::shared_ptr<const EventLog> log;
};

Service::Service(std::shared_ptr<RecipeIndex> index, SubstitutionTable rules, AppConfig config)
    : index_(std::move(index)), rules_(std::move(rules)), config_(std::move(config)) {
  if (!index_) throw Error(ErrorCode::kInvalidArgument, "service needs a recipe index");
}

Service::~Service() { wait_idle(); }

void Service::wait_idle() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

std::shared_ptr<Service::Handle> Service::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "no session " + id, id);
  return it->second;
}

void Service::drive(const std::shared_ptr<Handle>& handle) {
  // One stimulus per lock so snapshots stay responsive during a long run.
  for (;;) {
    std::lock_guard lock(handle->mutex);
    const auto next = automatic_stimulus(handle->session.state());
    if (!next) return;
    handle->session.advance(Stimulus::of(*next));
  }
}

json Service::place_order(const json& body) {
  const auto& text = detail::require_string(body, "text", "");
  const Intent intent = parse_order(text);
  if (intent.kind == Intent::Kind::kListRecipes) return {{"intent", "list_recipes"}, {"recipes", list_recipes()["recipes"]}};

  SessionContext ctx;
  ctx.index = index_;
  ctx.snapshot = inventory_.current();
  ctx.rules = rules_;
  ctx.diff_options = config_.diff;
  ctx.sim = config_.sim;
  ctx.orchestrator = config_.orchestrator;
  if (body.contains("unattended")) {
    if (!body["unattended"].is_boolean()) detail::schema_violation("unattended", "must be a boolean");
    ctx.orchestrator.unattended = body["unattended"].get<bool>();
  }

  std::shared_ptr<Handle> handle;
  {
    std::lock_guard lock(sessions_mutex_);
    const std::uint64_t n = next_session_++;
    ctx.seed = n;
    if (body.contains("seed")) {
      if (!body["seed"].is_number_unsigned()) detail::schema_violation("seed", "must be a non-negative integer");
      ctx.seed = body["seed"].get<std::uint64_t>();
    }
    char id[32];
    std::snprintf(id, sizeof id, "s-%06llu", static_cast<unsigned long long>(n));
    handle = std::make_shared<Handle>(Session(id, text, std::move(ctx)));
    sessions_.emplace(id, handle);
  }
  {
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, handle] { drive(handle); });
  }
  return {{"session_id", handle->session.id()}};
}

json Service::session_snapshot(const std::string& id) const {
  const auto handle = find(id);
  std::lock_guard lock(handle->mutex);
  return handle->session.snapshot_json();
}

json Service::answer(const std::string& id, const json& body) {
  const auto handle = find(id);
  const auto& anomaly_id = detail::require_string(body, "anomaly_id", "");
  const auto& choice = detail::require_string(body, "choice", "");
  {
    std::lock_guard lock(handle->mutex);
    handle->session.advance(Stimulus::answer(anomaly_id, choice));
  }
  drive(handle);
  return session_snapshot(id);
}

std::vector<SessionEvent> Service::events(const std::string& id, std::uint64_t since,
                                          std::chrono::milliseconds wait) const {
  const auto handle = find(id);
  if (wait.count() <= 0) return handle->log->after(since);
  return handle->log->wait_after(since, wait);
}

json Service::list_recipes() const {
  json list = json::array();
  for (const auto& r : index_->recipes()) list.push_back(to_json(r));
  return {{"recipes", list}};
}

json Service::add_recipe(const json& body) {
  Recipe recipe = recipe_from_json(body);
  const std::string id = recipe.id;
  index_->add(std::move(recipe));
  return {{"id", id}};
}

void Service::remove_recipe(const std::string& id) { index_->remove(id); }

json Service::put_inventory(std::string_view detection_document) {
  InventorySnapshot snapshot = build_snapshot(parse_detection_document(detection_document), config_.snapshot);
  json j = to_json(snapshot);
  inventory_.publish(std::move(snapshot));
  return j;
}

json Service::inventory() const { return to_json(*inventory_.current()); }

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownId:
      return 404;
    case ErrorCode::kDuplicateId:
    case ErrorCode::kIllegalStimulus:
      return 409;
    case ErrorCode::kIo:
      return 500;
    default:
      return 400;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json body_json(const httplib::Request& req) { return detail::parse_json(req.body, ErrorCode::kMalformedJson); }

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_json(res, http_status_for(e.code()),
                {{"error", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  };
}

std::uint64_t query_u64(const httplib::Request& req, const char* name, std::uint64_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used == v.size() && v.front() != '-') return n;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidArgument, std::string("query parameter ") + name + " must be a non-negative integer",
              name);
}

}  // namespace

void Service::mount(httplib::Server& server) {
  server.Post("/v1/orders", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json out = place_order(body_json(req));
    send_json(res, out.contains("session_id") ? 201 : 200, out);
  }));
  server.Get(R"(/v1/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, session_snapshot(req.matches[1]));
  }));
  server.Post(R"(/v1/sessions/([^/]+)/answers)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, answer(req.matches[1], body_json(req)));
              }));
  server.Get(R"(/v1/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto since = query_u64(req, "since", 0);
    const auto wait = std::min<std::uint64_t>(query_u64(req, "wait_ms", 0), 30000);
    std::string out;
    for (const auto& e : events(req.matches[1], since, std::chrono::milliseconds(wait))) {
      out += to_json(e).dump();
      out += '\n';
    }
    res.status = 200;
    res.set_content(out, "application/x-ndjson");
  }));
  server.Get("/v1/recipes", guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, list_recipes());
  }));
  server.Post("/v1/recipes", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 201, add_recipe(body_json(req)));
  }));
  server.Delete(R"(/v1/recipes/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    remove_recipe(req.matches[1]);
    res.status = 204;
  }));
  server.Put("/v1/inventory", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, put_inventory(req.body));
  }));
  server.Get("/v1/inventory", guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, inventory());
  }));
}

std::pair<std::string, int> parse_bind(std::string_view bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "bind address must be host:port", std::string(bind));
  }
  std::string host(bind.substr(0, colon));
  const std::string port_text(bind.substr(colon + 1));
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) {
    throw Error(ErrorCode::kInvalidArgument, "bad port in bind address", std::string(bind));
  }
  if (host.empty()) host = "0.0.0.0";
  return {host, port};
}

std::string resolve_bind(const std::optional<std::string>& flag, const AppConfig& config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SHAKER_BIND"); env && *env) return env;
  return config.bind;
}

bool serve(Service& service, const std::string& bind) {
  const auto [host, port] = parse_bind(bind);
  httplib::Server server;
  service.mount(server);
  return server.listen(host, port);
}

}  // namespace shaker
