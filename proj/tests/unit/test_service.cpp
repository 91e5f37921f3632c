#include <doctest.h>

#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "proxgate/errors.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/service.hpp"
#include "proxgate/signal.hpp"
#include "test_util.hpp"

using namespace proxgate;
using namespace proxgate::service;
using nlohmann::json;

namespace {

const std::string kSecret(64, 'b');

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::filesystem::path write_model(const testutil::TempDir& tmp) {
  signal::PathLossParams params;
  params.shadowing_sigma_db = 0.0;
  params.rng_seed = 404;
  auto ds =
      signal::synth_dataset(1500, signal::default_distance_grid(), 2.0, params);
  auto model = ml::train_logistic(ds);
  auto path = tmp.file("model.json");
  write_text(path, ml::to_json(model));
  return path;
}

ServiceConfig test_config(const testutil::TempDir& tmp) {
  ServiceConfig config;
  config.listen_host = "127.0.0.1";
  config.listen_port = 0;
  config.database_path = tmp.file("service.db");
  config.registry_secret_hex = kSecret;
  config.model_path = write_model(tmp);
  config.policy.data_sensitivity = protocol::DataSensitivity::Insensitive;
  return config;
}

json post(httplib::Client& client, const std::string& path, const json& body,
          int expected_status) {
  auto res = client.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expected_status);
  return json::parse(res->body);
}

json register_device(httplib::Client& client, const std::string& name,
                     const std::string& uuid, const std::string& group) {
  json body{{"display_name", name},
            {"group", group},
            {"identifiers", {{"uuid", uuid}, {"imei", "imei-" + uuid}}}};
  return post(client, "/devices", body, 201);
}

json report_batch(const std::string& requester, const std::string& owner,
                  double rssi, UtcMillis ts) {
  json samples = json::array();
  for (int i = 0; i < 3; ++i) {
    samples.push_back(json{{"measurer", requester},
                           {"target", owner},
                           {"rssi_dbm", rssi + 0.1 * i},
                           {"timestamp_ms", ts + i}});
    samples.push_back(json{{"measurer", owner},
                           {"target", requester},
                           {"rssi_dbm", rssi - 0.1 * i},
                           {"timestamp_ms", ts + i}});
  }
  return json{{"samples", samples}};
}

}  // namespace

TEST_CASE("service config parsing and validation") {
  auto config = ServiceConfig::from_json_text(R"({
    "listen_address": "0.0.0.0:9090",
    "database_path": "/tmp/x.db",
    "registry_secret_hex": ")" + kSecret + R"(",
    "model_path": "/tmp/m.json",
    "policy": {"session_ttl_s": 60, "data_sensitivity": "insensitive"},
    "tau_m": 1.5,
    "seed": 7
  })");
  CHECK(config.listen_host == "0.0.0.0");
  CHECK(config.listen_port == 9090);
  CHECK(config.policy.session_ttl_s == 60.0);
  CHECK(config.policy.data_sensitivity ==
        protocol::DataSensitivity::Insensitive);
  CHECK(config.tau_m == 1.5);
  CHECK_NOTHROW(config.validate());

  auto round = ServiceConfig::from_json_text(config.to_json_text());
  CHECK(round.to_json_text() == config.to_json_text());

  config.registry_secret_hex = "tooshort";
  CHECK_THROWS_AS(config.validate(), Error);

  CHECK_THROWS_AS(ServiceConfig::from_json_text("{nope"), Error);
}

TEST_CASE("daemon serves the full protocol over http") {
  testutil::TempDir tmp;
  Daemon daemon(test_config(tmp));
  daemon.start_background();

  httplib::Client client("127.0.0.1", daemon.port());
  client.set_connection_timeout(5);

  SUBCASE("health reports the active model") {
    auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto body = json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["model_id"] == daemon.model_id());
  }

  SUBCASE("device registration and its error paths") {
    auto profile = register_device(client, "Alice's watch", "u-alice", "two");
    CHECK(profile["signed_in"] == false);
    CHECK(profile["group"] == "two");
    CHECK(profile["signature"].get<std::string>().size() == 64);

    json dup{{"display_name", "clone"},
             {"group", "two"},
             {"identifiers", {{"uuid", "u-alice"}, {"imei", "imei-u-alice"}}}};
    auto err = post(client, "/devices", dup, 409);
    CHECK(err["error"]["code"] == "AlreadyRegistered");

    json invalid{{"display_name", "x"},
                 {"group", "one"},
                 {"identifiers", {{"uuid", "only"}}}};
    auto err2 = post(client, "/devices", invalid, 400);
    CHECK(err2["error"]["code"] == "InvalidIdentifiers");
  }

  SUBCASE("sessions with unknown devices come back 404") {
    json body{{"requester", std::string(64, '0')},
              {"owner", std::string(64, '1')}};
    auto err = post(client, "/sessions", body, 404);
    CHECK(err["error"]["code"] == "NotFound");
  }

  SUBCASE("scripted grant and deny runs") {
    auto requester = register_device(client, "watch B", "u-b", "two");
    auto owner = register_device(client, "sensor A", "u-a", "one");
    std::string rsig = requester["signature"];
    std::string osig = owner["signature"];

    // not signed in yet: request denied up front
    auto denied =
        post(client, "/sessions", json{{"requester", rsig}, {"owner", osig}},
             403);
    CHECK(denied["error"]["code"] == "NotSignedIn");

    auto signed_in = post(client, "/devices/" + rsig + "/sign-in",
                          json{{"signed_in", true}}, 200);
    CHECK(signed_in["signed_in"] == true);

    auto run_session = [&](double rssi) {
      auto session =
          post(client, "/sessions", json{{"requester", rsig}, {"owner", osig}},
               201);
      std::string id = session["session_id"];
      CHECK(session["state"] == "Requested");

      auto triggered = post(client, "/sessions/" + id + "/trigger", json{}, 200);
      CHECK(triggered["instruction"]["mode"] == "non-connectable");
      CHECK(triggered["instruction"]["requester"] == rsig);

      auto reported = post(client, "/sessions/" + id + "/reports",
                           report_batch(rsig, osig, rssi, now_utc_millis()),
                           200);
      CHECK(reported["accepted"] == 6);

      return post(client, "/sessions/" + id + "/decision",
                  json{{"action_confirmed", false}}, 200);
    };

    auto granted = run_session(-53.0);  // half a metre
    CHECK(granted["granted"] == true);
    CHECK(granted["reason"] == "Proximate");
    CHECK(granted["model_id"] == daemon.model_id());

    auto deny = run_session(-73.0);  // five metres
    CHECK(deny["granted"] == false);
    CHECK(deny["reason"] == "NotProximate");

    // session state is visible and terminal
    auto session =
        post(client, "/sessions", json{{"requester", rsig}, {"owner", osig}},
             201);
    std::string id = session["session_id"];
    auto view = client.Get("/sessions/" + id);
    REQUIRE(view);
    CHECK(json::parse(view->body)["state"] == "Requested");

    auto missing = client.Get("/sessions/" + std::string(32, 'e'));
    REQUIRE(missing);
    CHECK(missing->status == 404);

    // double trigger surfaces InvalidTransition with a 409
    post(client, "/sessions/" + id + "/trigger", json{}, 200);
    auto again = post(client, "/sessions/" + id + "/trigger", json{}, 409);
    CHECK(again["error"]["code"] == "InvalidTransition");

    // decision without reports is an incomplete session
    auto s2 =
        post(client, "/sessions", json{{"requester", rsig}, {"owner", osig}},
             201);
    std::string id2 = s2["session_id"];
    post(client, "/sessions/" + id2 + "/trigger", json{}, 200);
    auto premature = post(client, "/sessions/" + id2 + "/decision",
                          json{{"action_confirmed", true}}, 409);
    CHECK(premature["error"]["code"] == "InvalidTransition");
  }
}

TEST_CASE("state survives a daemon restart") {
  testutil::TempDir tmp;
  auto config = test_config(tmp);
  std::string session_id, rsig, osig;

  {
    Daemon daemon(config);
    daemon.start_background();
    httplib::Client client("127.0.0.1", daemon.port());

    auto requester = register_device(client, "watch B", "u-b", "two");
    auto owner = register_device(client, "sensor A", "u-a", "one");
    rsig = requester["signature"];
    osig = owner["signature"];
    post(client, "/devices/" + rsig + "/sign-in", json{{"signed_in", true}},
         200);

    auto session =
        post(client, "/sessions", json{{"requester", rsig}, {"owner", osig}},
             201);
    session_id = session["session_id"];
    post(client, "/sessions/" + session_id + "/trigger", json{}, 200);
    post(client, "/sessions/" + session_id + "/reports",
         report_batch(rsig, osig, -53.0, now_utc_millis()), 200);
    auto decision = post(client, "/sessions/" + session_id + "/decision",
                         json{{"action_confirmed", false}}, 200);
    CHECK(decision["granted"] == true);
    daemon.stop();
  }

  {
    Daemon daemon(config);
    daemon.start_background();
    httplib::Client client("127.0.0.1", daemon.port());

    auto view = client.Get("/sessions/" + session_id);
    REQUIRE(view);
    auto body = json::parse(view->body);
    CHECK(body["state"] == "Decided");
    CHECK(body["decision"]["granted"] == true);
    CHECK(body["reports"]["requester_to_owner"] == 3);

    // the registry is durable too
    auto dup = post(client, "/devices",
                    json{{"display_name", "clone"},
                         {"group", "two"},
                         {"identifiers",
                          {{"uuid", "u-b"}, {"imei", "imei-u-b"}}}},
                    409);
    CHECK(dup["error"]["code"] == "AlreadyRegistered");
  }
}

TEST_CASE("expired sessions are swept on restart") {
  testutil::TempDir tmp;
  auto config = test_config(tmp);
  config.policy.session_ttl_s = 0.05;  // expire almost immediately
  std::string session_id;

  {
    Daemon daemon(config);
    daemon.start_background();
    httplib::Client client("127.0.0.1", daemon.port());
    auto requester = register_device(client, "watch B", "u-b", "two");
    auto owner = register_device(client, "sensor A", "u-a", "one");
    std::string rsig = requester["signature"];
    post(client, "/devices/" + rsig + "/sign-in", json{{"signed_in", true}},
         200);
    auto session = post(
        client, "/sessions",
        json{{"requester", rsig}, {"owner", owner["signature"]}}, 201);
    session_id = session["session_id"];
    daemon.stop();
  }

  std::this_thread::sleep_for(std::chrono::milliseconds(80));

  {
    Daemon daemon(config);
    daemon.start_background();
    httplib::Client client("127.0.0.1", daemon.port());
    auto view = client.Get("/sessions/" + session_id);
    REQUIRE(view);
    CHECK(json::parse(view->body)["state"] == "Expired");
  }
}
