#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include "shaker/error.hpp"
#include "shaker/service.hpp"
#include "support.hpp"

// After Eigen: <resolv.h> defines a _res macro that clashes with it.
#include "httplib.h"

using namespace shaker;
using nlohmann::json;

namespace {

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    auto index = std::make_shared<RecipeIndex>();
    index->reload(load_recipe_directory(support::kDataDir / "recipes"));
    service_ = std::make_unique<Service>(index, default_substitution_table(), default_config(support::kDataDir));
    service_->mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(40, 0);
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
    service_->wait_idle();
  }

  void stock(const std::string& scene) {
    const auto res = client_->Put("/v1/inventory", support::read_file(support::kDataDir / "scenes" / scene),
                                  "application/json");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
  }

  std::string order(const json& body) {
    const auto res = client_->Post("/v1/orders", body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body).at("session_id").get<std::string>();
  }

  json snapshot(const std::string& id) {
    const auto res = client_->Get("/v1/sessions/" + id);
    EXPECT_EQ(res->status, 200);
    return json::parse(res->body);
  }

  // Reads the event stream until the session reaches one of `states`.
  std::vector<json> events_until(const std::string& id, std::initializer_list<const char*> states) {
    std::vector<json> all;
    std::uint64_t since = 0;
    for (int polls = 0; polls < 200; ++polls) {
      const auto res = client_->Get("/v1/sessions/" + id + "/events?since=" + std::to_string(since) + "&wait_ms=500");
      EXPECT_EQ(res->status, 200);
      EXPECT_EQ(res->get_header_value("Content-Type"), "application/x-ndjson");
      std::istringstream lines(res->body);
      for (std::string line; std::getline(lines, line);) {
        all.push_back(json::parse(line));
        since = all.back().at("seq").get<std::uint64_t>();
        if (all.back()["kind"] == "state") {
          for (const char* s : states) {
            if (all.back()["payload"]["to"] == s) return all;
          }
        }
      }
    }
    ADD_FAILURE() << "session " << id << " never reached the expected state";
    return all;
  }

  httplib::Server server_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

void expect_gap_free(const std::vector<json>& events) {
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i]["seq"], i + 1);
}

}  // namespace

TEST_F(Http, OrderIsServedAndStreamed) {
  stock("bar-full.json");
  const auto id = order({{"text", "Make me a Mojito"}, {"seed", 3}});
  const auto events = events_until(id, {"Served", "Failed", "Aborted"});
  expect_gap_free(events);
  EXPECT_EQ(events.back()["payload"]["to"], "Served");

  service_->wait_idle();
  const auto snap = snapshot(id);
  EXPECT_EQ(snap["state"], "Served");
  EXPECT_EQ(snap["recipe_id"], "mojito");
  EXPECT_TRUE(snap["execution"]["ok"].get<bool>());

  // Resuming from the middle returns exactly the tail.
  const auto res = client_->Get("/v1/sessions/" + id + "/events?since=5");
  std::istringstream lines(res->body);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(json::parse(line)["seq"], 6);
}

TEST_F(Http, AnswerFlow) {
  stock("bar-no-sugar.json");
  const auto id = order({{"text", "Make me a Daiquiri"}});
  auto events = events_until(id, {"AwaitingUser", "Served", "Failed"});
  ASSERT_EQ(events.back()["payload"]["to"], "AwaitingUser");
  service_->wait_idle();
  const auto snap = snapshot(id);
  ASSERT_EQ(snap["prompts"].size(), 1u);
  EXPECT_EQ(snap["prompts"][0]["anomaly_id"], "missing:sugar");

  auto res = client_->Post("/v1/sessions/" + id + "/answers", json{{"anomaly_id", "missing:sugar"}, {"choice", "gin"}}.dump(),
                           "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "illegal-option");

  res = client_->Post("/v1/sessions/" + id + "/answers", json{{"anomaly_id", "missing:sugar"}, {"choice", "honey"}}.dump(),
                      "application/json");
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(json::parse(res->body)["state"], "Served");

  res = client_->Post("/v1/sessions/" + id + "/answers", json{{"anomaly_id", "missing:sugar"}, {"choice", "honey"}}.dump(),
                      "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["error"], "illegal-stimulus");

  events = events_until(id, {"Served"});
  expect_gap_free(events);
}

TEST_F(Http, ErrorStatuses) {
  auto res = client_->Get("/v1/sessions/s-999999");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "not-found");
  res = client_->Get("/v1/sessions/s-999999/events");
  EXPECT_EQ(res->status, 404);
  res = client_->Post("/v1/orders", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "malformed-json");
  res = client_->Post("/v1/orders", R"({"txt": "make me a mojito"})", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["detail"], "text");
  res = client_->Put("/v1/inventory", R"({"detections": 3})", "application/json");
  EXPECT_EQ(res->status, 400);
  res = client_->Delete("/v1/recipes/no-such-drink");
  EXPECT_EQ(res->status, 404);

  stock("bar-full.json");
  const auto id = order({{"text", "make me a mojito"}});
  res = client_->Get("/v1/sessions/" + id + "/events?since=abc");
  EXPECT_EQ(res->status, 400);
}

TEST_F(Http, RecipesCrud) {
  auto res = client_->Get("/v1/recipes");
  ASSERT_EQ(res->status, 200);
  const auto before = json::parse(res->body)["recipes"].size();
  EXPECT_EQ(before, 20u);

  const json recipe = {{"id", "vodka-soda"},
                       {"name", "Vodka Soda"},
                       {"ingredients", {{{"label", "vodka"}, {"quantity_ml", 50}}, {{"label", "soda water"}, {"quantity_ml", 100}}}}};
  res = client_->Post("/v1/recipes", recipe.dump(), "application/json");
  EXPECT_EQ(res->status, 201) << res->body;
  res = client_->Post("/v1/recipes", recipe.dump(), "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(client_->Get("/v1/recipes")->body)["recipes"].size(), before + 1);

  json bad = recipe;
  bad["id"] = "bad";
  bad["ingredients"][0]["quantity_ml"] = -1;
  res = client_->Post("/v1/recipes", bad.dump(), "application/json");
  EXPECT_EQ(res->status, 400);

  stock("bar-full.json");
  const auto id = order({{"text", "make me a vodka soda"}});
  service_->wait_idle();
  EXPECT_EQ(snapshot(id)["recipe_id"], "vodka-soda");

  res = client_->Delete("/v1/recipes/vodka-soda");
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(json::parse(client_->Get("/v1/recipes")->body)["recipes"].size(), before);
}

TEST_F(Http, ListRecipesIntent) {
  const auto res = client_->Post("/v1/orders", R"({"text": "List recipes"})", "application/json");
  ASSERT_EQ(res->status, 200);
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["intent"], "list_recipes");
  EXPECT_EQ(body["recipes"].size(), 20u);
}

TEST_F(Http, InventoryRoundTrip) {
  auto res = client_->Get("/v1/inventory");
  EXPECT_TRUE(json::parse(res->body)["items"].empty());
  stock("bar-unreadable.json");
  res = client_->Get("/v1/inventory");
  const auto items = json::parse(res->body)["items"];
  ASSERT_FALSE(items.empty());
  bool saw_unreadable = false;
  for (const auto& item : items) saw_unreadable |= !item["readable"].get<bool>();
  EXPECT_TRUE(saw_unreadable);
}

TEST_F(Http, ConcurrentOrdersGetDistinctSessions) {
  stock("bar-full.json");
  std::vector<std::string> ids(6);
  std::vector<std::thread> clients;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    clients.emplace_back([this, &ids, i] {
      httplib::Client c("127.0.0.1", port_);
      const auto res = c.Post("/v1/orders", json{{"text", "make me a margarita"}}.dump(), "application/json");
      ids[i] = json::parse(res->body)["session_id"];
    });
  }
  for (auto& t : clients) t.join();
  service_->wait_idle();
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
  for (const auto& id : ids) EXPECT_EQ(snapshot(id)["state"], "Served");
}

TEST(Bind, Parse) {
  EXPECT_EQ(parse_bind("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(parse_bind(":9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
  for (const char* bad : {"8080", "host:", "host:99999", "host:12x", "host:-1"}) {
    try {
      parse_bind(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
  }
}

TEST(Bind, Precedence) {
  AppConfig config;
  config.bind = "127.0.0.1:1111";
  ::unsetenv("SHAKER_BIND");
  EXPECT_EQ(resolve_bind(std::nullopt, config), "127.0.0.1:1111");
  ::setenv("SHAKER_BIND", "0.0.0.0:2222", 1);
  EXPECT_EQ(resolve_bind(std::nullopt, config), "0.0.0.0:2222");
  EXPECT_EQ(resolve_bind(std::string("127.0.0.1:3333"), config), "127.0.0.1:3333");
  ::unsetenv("SHAKER_BIND");
}

TEST(Status, Mapping) {
  EXPECT_EQ(http_status_for(ErrorCode::kNotFound), 404);
  EXPECT_EQ(http_status_for(ErrorCode::kDuplicateId), 409);
  EXPECT_EQ(http_status_for(ErrorCode::kIllegalStimulus), 409);
  EXPECT_EQ(http_status_for(ErrorCode::kSchemaViolation), 400);
  EXPECT_EQ(http_status_for(ErrorCode::kIo), 500);
}
