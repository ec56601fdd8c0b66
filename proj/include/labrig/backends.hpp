#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "labrig/common.hpp"

namespace labrig {

using json = nlohmann::json;

struct CompletionRequest {
  std::string system;
  std::string user;
  std::vector<std::string> attachments;  // scene/prediction digests, grounding only
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string tag;  // "<module>.<stage>", e.g. "reasoner.decompose"
};

// Stable across runs and platforms; excludes timestamps and max_tokens so
// recorded fixtures survive unrelated config churn.
inline std::string request_hash(const CompletionRequest& req) {
  std::string buf = req.system;
  buf += '\x1e';
  buf += req.user;
  for (const auto& a : req.attachments) {
    buf += '\x1f';
    buf += a;
  }
  buf += '\x1e';
  char tmp[32];
  std::snprintf(tmp, sizeof(tmp), "%.6g", req.temperature);
  buf += tmp;
  return hex64(fnv1a64(buf));
}

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Timeout : BackendError {
  Timeout() : BackendError("backend timed out") {}
};
struct ReplayMiss : BackendError {
  explicit ReplayMiss(const std::string& hash, const std::string& tag)
      : BackendError("no recorded response for request " + hash + " (" + tag + ")") {}
};
struct SinkWriteFailed : std::runtime_error {
  explicit SinkWriteFailed(const std::string& path)
      : std::runtime_error("cannot append transcript record to " + path) {}
};

struct TranscriptRecord {
  std::string request_hash;
  std::string response;
  double latency_ms = 0.0;
};

struct Transcript {
  std::string backend_id;
  std::string recorded_at;
  std::vector<TranscriptRecord> records;
};

inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline void save_transcript(const std::string& path, const Transcript& t) {
  std::ofstream out(path);
  if (!out.good()) throw SinkWriteFailed(path);
  out << json{{"backend", t.backend_id}, {"recorded_at", t.recorded_at}}.dump() << "\n";
  for (const auto& r : t.records)
    out << json{{"request_hash", r.request_hash},
                {"response", r.response},
                {"latency_ms", r.latency_ms}}
               .dump()
        << "\n";
}

inline Transcript load_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw BackendError("cannot read transcript " + path);
  Transcript t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    if (first && j.contains("backend")) {
      t.backend_id = j.value("backend", "");
      t.recorded_at = j.value("recorded_at", "");
      first = false;
      continue;
    }
    first = false;
    t.records.push_back({j.at("request_hash").get<std::string>(),
                         j.at("response").get<std::string>(), j.value("latency_ms", 0.0)});
  }
  return t;
}

// ---- latency accounting ----

struct LatencyRecord {
  std::string module;  // LLM | MP | VLM | RL
  double ms = 0.0;
  bool online = false;
};

inline std::string module_for_tag(const std::string& tag) {
  if (starts_with(tag, "reasoner.")) return "LLM";
  if (starts_with(tag, "grounder.")) return "VLM";
  if (starts_with(tag, "predictor.")) return "MP";
  if (starts_with(tag, "controller.")) return "RL";
  return "LLM";
}

// Planning modules run ahead of execution; only the controller sits inside
// the real-time loop.
inline bool module_online(const std::string& module) { return module == "RL"; }

struct ModuleLatency {
  std::string module;
  size_t count = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double max_ms = 0.0;
  bool online = false;
};

struct LatencyReport {
  std::vector<ModuleLatency> modules;  // sorted by module name
  double online_total_ms = 0.0;        // sum of mean latency over online modules
};

inline LatencyReport latency_report(const std::vector<LatencyRecord>& records) {
  std::map<std::string, std::vector<double>> by_module;
  std::map<std::string, bool> online;
  for (const auto& r : records) {
    by_module[r.module].push_back(r.ms);
    online[r.module] = online[r.module] || r.online;
  }
  LatencyReport report;
  for (auto& [module, ms] : by_module) {
    std::sort(ms.begin(), ms.end());
    ModuleLatency m;
    m.module = module;
    m.count = ms.size();
    for (double v : ms) m.mean_ms += v;
    m.mean_ms /= static_cast<double>(ms.size());
    m.median_ms = ms.size() % 2 ? ms[ms.size() / 2]
                                : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
    m.max_ms = ms.back();
    m.online = online[module];
    if (m.online) report.online_total_ms += m.mean_ms;
    report.modules.push_back(m);
  }
  return report;
}

inline std::string latency_report_csv(const LatencyReport& report) {
  std::string out = "module,count,mean_ms,median_ms,max_ms,online\n";
  char buf[160];
  for (const auto& m : report.modules) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.3f,%.3f,%.3f,%d\n", m.module.c_str(), m.count,
                  m.mean_ms, m.median_ms, m.max_ms, m.online ? 1 : 0);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "online-total,,%.3f,,,\n", report.online_total_ms);
  out += buf;
  return out;
}

// ---- backend interface ----

namespace detail {
inline std::optional<double>& latency_override_slot() {
  thread_local std::optional<double> slot;
  return slot;
}
}  // namespace detail

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;

  std::string complete(const CompletionRequest& req) {
    auto t0 = std::chrono::steady_clock::now();
    detail::latency_override_slot().reset();
    std::string response = respond(req);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    if (auto& ovr = detail::latency_override_slot()) ms = *ovr;
    std::string module = module_for_tag(req.tag);
    std::lock_guard<std::mutex> lock(mutex_);
    latencies_.push_back({module, ms, module_online(module)});
    return response;
  }

  std::vector<LatencyRecord> drain_latencies() {
    std::lock_guard<std::mutex> lock(mutex_);
    auto out = std::move(latencies_);
    latencies_.clear();
    return out;
  }

 protected:
  virtual std::string respond(const CompletionRequest& req) = 0;
  // replay substitutes the recorded latency for the (near-zero) playback time
  void override_latency(double ms) { detail::latency_override_slot() = ms; }

 private:
  std::mutex mutex_;
  std::vector<LatencyRecord> latencies_;
};

inline std::string complete(const CompletionRequest& req, Backend& backend) {
  return backend.complete(req);
}

// Pure-function backend: the deterministic rule engines plug in here.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  FunctionBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }

 protected:
  std::string respond(const CompletionRequest& req) override { return fn_(req); }

 private:
  std::string id_;
  Fn fn_;
};

class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(Transcript transcript) : source_(std::move(transcript)) {
    for (const auto& r : source_.records) queues_[r.request_hash].push_back(r);
  }
  std::string id() const override { return "replay:" + source_.backend_id; }

 protected:
  std::string respond(const CompletionRequest& req) override {
    std::string h = request_hash(req);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = queues_.find(h);
    if (it == queues_.end() || it->second.empty()) throw ReplayMiss(h, req.tag);
    TranscriptRecord rec = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();  // last response repeats
    override_latency(rec.latency_ms);
    return rec.response;
  }

 private:
  Transcript source_;
  std::map<std::string, std::deque<TranscriptRecord>> queues_;
  std::mutex mutex_;
};

class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::string sink_path = "")
      : inner_(std::move(inner)), sink_path_(std::move(sink_path)) {
    transcript_.backend_id = inner_->id();
    transcript_.recorded_at = utc_timestamp();
    if (!sink_path_.empty()) {
      sink_.open(sink_path_, std::ios::app);
      if (!sink_.good()) throw SinkWriteFailed(sink_path_);
      sink_ << json{{"backend", transcript_.backend_id},
                    {"recorded_at", transcript_.recorded_at}}
                   .dump()
            << "\n";
      sink_.flush();
    }
  }

  std::string id() const override { return "recording:" + inner_->id(); }

  Transcript transcript() {
    std::lock_guard<std::mutex> lock(mutex_);
    return transcript_;
  }

 protected:
  std::string respond(const CompletionRequest& req) override {
    auto t0 = std::chrono::steady_clock::now();
    std::string response = inner_->complete(req);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    inner_->drain_latencies();  // the wrapper owns the authoritative records
    TranscriptRecord rec{request_hash(req), response, ms};
    std::lock_guard<std::mutex> lock(mutex_);
    transcript_.records.push_back(rec);
    if (sink_.is_open()) {
      sink_ << json{{"request_hash", rec.request_hash},
                    {"response", rec.response},
                    {"latency_ms", rec.latency_ms}}
                   .dump()
            << "\n";
      sink_.flush();
      if (!sink_.good()) throw SinkWriteFailed(sink_path_);
    }
    return response;
  }

 private:
  std::shared_ptr<Backend> inner_;
  std::string sink_path_;
  std::ofstream sink_;
  Transcript transcript_;
  std::mutex mutex_;
};

inline std::shared_ptr<RecordingBackend> record_session(std::shared_ptr<Backend> backend,
                                                        const std::string& sink_path = "") {
  return std::make_shared<RecordingBackend>(std::move(backend), sink_path);
}

// Chat-completion wire client. Test suites never exercise it (no network);
// eval against a live endpoint is opt-in via environment.
class HttpBackend : public Backend {
 public:
  struct Config {
    std::string url;    // http://host:port/v1/chat/completions
    std::string model;
    std::string api_key;
    int timeout_s = 60;
    int max_retries = 2;
  };

  static std::optional<Config> from_env() {
    const char* url = std::getenv("LABRIG_BACKEND_URL");
    if (!url || !*url) return std::nullopt;
    Config cfg;
    cfg.url = url;
    if (const char* m = std::getenv("LABRIG_BACKEND_MODEL")) cfg.model = m;
    if (const char* k = std::getenv("LABRIG_BACKEND_KEY")) cfg.api_key = k;
    if (const char* t = std::getenv("LABRIG_BACKEND_TIMEOUT_S")) cfg.timeout_s = std::atoi(t);
    return cfg;
  }

  explicit HttpBackend(Config cfg) : cfg_(std::move(cfg)) {}
  std::string id() const override { return "http:" + cfg_.model; }

 protected:
  std::string respond(const CompletionRequest& req) override;

 private:
  Config cfg_;
};

}  // namespace labrig

// The wire implementation lives apart so that including backends.hpp does not
// force the HTTP client header on every translation unit.
#ifdef LABRIG_ENABLE_HTTP
#include <httplib.h>

namespace labrig {

inline std::string HttpBackend::respond(const CompletionRequest& req) {
  std::string user = req.user;
  for (const auto& a : req.attachments) user += "\n\n" + a;
  json body = {{"model", cfg_.model},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens},
               {"messages", json::array({{{"role", "system"}, {"content", req.system}},
                                         {{"role", "user"}, {"content", user}}})}};

  // split "http://host:port/path"
  std::string url = cfg_.url;
  size_t scheme = url.find("://");
  std::string rest = scheme == std::string::npos ? url : url.substr(scheme + 3);
  size_t slash = rest.find('/');
  std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
  std::string path = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);

  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::seconds(1 << (attempt - 1)));
    httplib::Client cli(host);
    cli.set_read_timeout(cfg_.timeout_s, 0);
    cli.set_connection_timeout(cfg_.timeout_s, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) continue;
    if (res->status != 200) continue;
    try {
      json j = json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      continue;
    }
  }
  throw BackendError("remote backend failed after retries: " + cfg_.url);
}

}  // namespace labrig
#else
namespace labrig {
inline std::string HttpBackend::respond(const CompletionRequest&) {
  throw BackendError("HTTP backend not compiled in (define LABRIG_ENABLE_HTTP)");
}
}  // namespace labrig
#endif
