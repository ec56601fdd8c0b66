#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <thread>

#include "labrig/backends.hpp"

using namespace labrig;

namespace {

CompletionRequest sample_request() {
  CompletionRequest req;
  req.system = "You are a planner.";
  req.user = "Goal: move the cuboid.";
  req.attachments = {"gripper: held=none\n"};
  req.tag = "reasoner.decompose";
  return req;
}

std::string temp_path(const std::string& stem) {
  auto dir = std::filesystem::temp_directory_path();
  return (dir / (stem + "_" + std::to_string(::getpid()) + ".jsonl")).string();
}

}  // namespace

TEST_CASE("request hash is stable and sensitive to content") {
  CompletionRequest req = sample_request();
  std::string h = request_hash(req);
  REQUIRE(h.size() == 16);
  REQUIRE(request_hash(req) == h);

  auto differs = [&](CompletionRequest changed) { return request_hash(changed) != h; };

  CompletionRequest c = req;
  c.system += "!";
  REQUIRE(differs(c));
  c = req;
  c.user += "!";
  REQUIRE(differs(c));
  c = req;
  c.attachments.push_back("beaker: class=beaker station=- contents=-\n");
  REQUIRE(differs(c));
  c = req;
  c.temperature = 0.7;
  REQUIRE(differs(c));

  // retrieval keys ignore knobs that do not change the conversation content
  c = req;
  c.max_tokens = 9;
  REQUIRE(request_hash(c) == h);
  c = req;
  c.tag = "grounder.ground";
  REQUIRE(request_hash(c) == h);
}

TEST_CASE("request hash separates field boundaries") {
  CompletionRequest a, b;
  a.system = "xy";
  a.user = "z";
  b.system = "x";
  b.user = "yz";
  REQUIRE(request_hash(a) != request_hash(b));

  CompletionRequest c, d;
  c.attachments = {"ab"};
  d.attachments = {"a", "b"};
  REQUIRE(request_hash(c) != request_hash(d));
}

TEST_CASE("function backend runs the function and tracks latency by module") {
  FunctionBackend be("echo", [](const CompletionRequest& r) { return "echo: " + r.user; });
  REQUIRE(be.id() == "echo");

  CompletionRequest req = sample_request();
  REQUIRE(be.complete(req) == "echo: Goal: move the cuboid.");

  req.tag = "controller.act";
  be.complete(req);
  req.tag = "predictor.predict";
  be.complete(req);

  auto records = be.drain_latencies();
  REQUIRE(records.size() == 3);
  REQUIRE(records[0].module == "LLM");
  REQUIRE_FALSE(records[0].online);
  REQUIRE(records[1].module == "RL");
  REQUIRE(records[1].online);
  REQUIRE(records[2].module == "MP");
  for (const auto& r : records) REQUIRE(r.ms >= 0.0);

  REQUIRE(be.drain_latencies().empty());
}

TEST_CASE("tag to module mapping") {
  REQUIRE(module_for_tag("reasoner.interpret") == "LLM");
  REQUIRE(module_for_tag("grounder.repair") == "VLM");
  REQUIRE(module_for_tag("predictor.train") == "MP");
  REQUIRE(module_for_tag("controller.act") == "RL");
  REQUIRE(module_online("RL"));
  REQUIRE_FALSE(module_online("LLM"));
  REQUIRE_FALSE(module_online("VLM"));
  REQUIRE_FALSE(module_online("MP"));
}

TEST_CASE("latency report aggregates per module") {
  std::vector<LatencyRecord> records = {
      {"LLM", 10.0, false}, {"LLM", 20.0, false}, {"LLM", 60.0, false},
      {"RL", 1.0, true},    {"RL", 3.0, true},
  };
  LatencyReport report = latency_report(records);
  REQUIRE(report.modules.size() == 2);
  REQUIRE(report.modules[0].module == "LLM");
  REQUIRE(report.modules[0].count == 3);
  REQUIRE(report.modules[0].mean_ms == Catch::Approx(30.0));
  REQUIRE(report.modules[0].median_ms == Catch::Approx(20.0));
  REQUIRE(report.modules[0].max_ms == Catch::Approx(60.0));
  REQUIRE_FALSE(report.modules[0].online);
  REQUIRE(report.modules[1].module == "RL");
  REQUIRE(report.modules[1].mean_ms == Catch::Approx(2.0));
  REQUIRE(report.modules[1].median_ms == Catch::Approx(2.0));
  REQUIRE(report.modules[1].online);
  REQUIRE(report.online_total_ms == Catch::Approx(2.0));
}

TEST_CASE("online total counts only modules flagged online") {
  std::vector<LatencyRecord> records = {
      {"LLM", 3024.0, false},
      {"MP", 5714.0, false},
      {"VLM", 3441.0, false},
      {"RL", 15.0, true},
  };
  LatencyReport report = latency_report(records);
  REQUIRE(report.online_total_ms == Catch::Approx(15.0));

  std::string csv = latency_report_csv(report);
  auto lines = split_lines(csv);
  REQUIRE(lines.front() == "module,count,mean_ms,median_ms,max_ms,online");
  REQUIRE(lines.back() == "online-total,,15.000,,,");
  REQUIRE(lines.size() == 2 + report.modules.size());
}

TEST_CASE("latency report over no records is empty") {
  LatencyReport report = latency_report({});
  REQUIRE(report.modules.empty());
  REQUIRE(report.online_total_ms == 0.0);
}

TEST_CASE("transcript save and load round trip") {
  Transcript t;
  t.backend_id = "rule";
  t.recorded_at = "2024-01-01T00:00:00Z";
  t.records = {{"aaaa", "first\nresponse", 12.5}, {"bbbb", "", 0.0}, {"aaaa", "second", 3.0}};

  std::string path = temp_path("labrig_transcript");
  save_transcript(path, t);
  Transcript back = load_transcript(path);
  std::filesystem::remove(path);

  REQUIRE(back.backend_id == t.backend_id);
  REQUIRE(back.recorded_at == t.recorded_at);
  REQUIRE(back.records.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    REQUIRE(back.records[i].request_hash == t.records[i].request_hash);
    REQUIRE(back.records[i].response == t.records[i].response);
    REQUIRE(back.records[i].latency_ms == Catch::Approx(t.records[i].latency_ms));
  }
}

TEST_CASE("load transcript rejects missing file") {
  REQUIRE_THROWS_AS(load_transcript(temp_path("labrig_missing")), BackendError);
}

TEST_CASE("record then replay reproduces responses byte for byte") {
  auto inner = std::make_shared<FunctionBackend>(
      "rule", [](const CompletionRequest& r) { return "plan for <" + r.user + ">\nwith newline"; });
  RecordingBackend rec(inner);

  CompletionRequest a = sample_request();
  CompletionRequest b = sample_request();
  b.user = "Goal: weigh the cup.";

  std::string ra = rec.complete(a);
  std::string rb = rec.complete(b);

  ReplayBackend replay(rec.transcript());
  REQUIRE(replay.id() == "replay:rule");
  REQUIRE(replay.complete(a) == ra);
  REQUIRE(replay.complete(b) == rb);
  // recorded responses repeat once the queue is exhausted
  REQUIRE(replay.complete(a) == ra);

  CompletionRequest unseen = sample_request();
  unseen.user = "Goal: never recorded.";
  REQUIRE_THROWS_AS(replay.complete(unseen), ReplayMiss);
}

TEST_CASE("replay plays repeated requests in recorded order") {
  int n = 0;
  auto inner = std::make_shared<FunctionBackend>(
      "counter", [&n](const CompletionRequest&) { return "response " + std::to_string(++n); });
  RecordingBackend rec(inner);

  CompletionRequest req = sample_request();
  rec.complete(req);
  rec.complete(req);
  rec.complete(req);

  ReplayBackend replay(rec.transcript());
  REQUIRE(replay.complete(req) == "response 1");
  REQUIRE(replay.complete(req) == "response 2");
  REQUIRE(replay.complete(req) == "response 3");
  REQUIRE(replay.complete(req) == "response 3");
}

TEST_CASE("replay substitutes the recorded latency") {
  Transcript t;
  t.backend_id = "rule";
  CompletionRequest req = sample_request();
  t.records = {{request_hash(req), "ok", 3024.0}};

  ReplayBackend replay(t);
  REQUIRE(replay.complete(req) == "ok");
  auto records = replay.drain_latencies();
  REQUIRE(records.size() == 1);
  REQUIRE(records[0].ms == Catch::Approx(3024.0));
  REQUIRE(records[0].module == "LLM");
}

TEST_CASE("recording backend appends to a sink file as it goes") {
  std::string path = temp_path("labrig_sink");
  {
    auto inner = std::make_shared<FunctionBackend>(
        "rule", [](const CompletionRequest& r) { return "r:" + r.tag; });
    RecordingBackend rec(inner, path);
    REQUIRE(rec.id() == "recording:rule");
    CompletionRequest req = sample_request();
    rec.complete(req);
    req.user = "another";
    rec.complete(req);

    // the wrapper owns latency records; the inner backend's are absorbed
    auto records = rec.drain_latencies();
    REQUIRE(records.size() == 2);
  }
  Transcript t = load_transcript(path);
  std::filesystem::remove(path);
  REQUIRE(t.backend_id == "rule");
  REQUIRE_FALSE(t.recorded_at.empty());
  REQUIRE(t.records.size() == 2);
  REQUIRE(t.records[0].response == "r:reasoner.decompose");
}

TEST_CASE("concurrent recording keeps every record") {
  auto inner = std::make_shared<FunctionBackend>(
      "echo", [](const CompletionRequest& r) { return "resp:" + r.user; });
  auto rec = record_session(inner);

  constexpr int kThreads = 8;
  constexpr int kPerThread = 25;
  std::vector<std::thread> workers;
  for (int w = 0; w < kThreads; ++w) {
    workers.emplace_back([&, w] {
      for (int i = 0; i < kPerThread; ++i) {
        CompletionRequest req;
        req.user = "w" + std::to_string(w) + "/" + std::to_string(i);
        req.tag = "reasoner.interpret";
        std::string out = rec->complete(req);
        if (out != "resp:" + req.user) std::abort();
      }
    });
  }
  for (auto& t : workers) t.join();

  Transcript t = rec->transcript();
  REQUIRE(t.records.size() == kThreads * kPerThread);
  // every record's response matches the request that produced its hash
  ReplayBackend replay(t);
  CompletionRequest probe;
  probe.user = "w3/17";
  probe.tag = "reasoner.interpret";
  REQUIRE(replay.complete(probe) == "resp:w3/17");
}

TEST_CASE("http backend is inert without configuration") {
  unsetenv("LABRIG_BACKEND_URL");
  REQUIRE_FALSE(HttpBackend::from_env().has_value());

  setenv("LABRIG_BACKEND_URL", "http://localhost:9/v1/chat/completions", 1);
  setenv("LABRIG_BACKEND_MODEL", "qwen", 1);
  auto cfg = HttpBackend::from_env();
  REQUIRE(cfg.has_value());
  REQUIRE(cfg->url == "http://localhost:9/v1/chat/completions");
  REQUIRE(cfg->model == "qwen");
  REQUIRE(cfg->timeout_s == 60);
  unsetenv("LABRIG_BACKEND_URL");
  unsetenv("LABRIG_BACKEND_MODEL");

  HttpBackend be(HttpBackend::Config{});
  REQUIRE_THROWS_AS(be.complete(sample_request()), BackendError);
}
