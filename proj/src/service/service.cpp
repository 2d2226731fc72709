#include "inmt/service.hpp"

#include <chrono>
#include <cstdlib>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <shared_mutex>

#include "httplib.h"
#include "inmt/error.hpp"
#include "inmt/utf8.hpp"
#include "json.hpp"

namespace inmt {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void ServerConfig::set_addr(std::string_view addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("address must be host:port, got '" + std::string(addr) + "'");
  const std::string port_text(addr.substr(colon + 1));
  int p = -1;
  try {
    std::size_t used = 0;
    p = std::stoi(port_text, &used);
    if (used != port_text.size()) p = -1;
  } catch (const std::exception&) {
  }
  if (p < 0 || p > 65535) throw ConfigError("bad port in address '" + std::string(addr) + "'");
  port = p;
  host = colon == 0 ? "0.0.0.0" : std::string(addr.substr(0, colon));
}

void ServerConfig::apply_environment() {
  if (const char* a = std::getenv("INMT_ADDR"); a && *a) set_addr(a);
  if (const char* c = std::getenv("INMT_CHECKPOINT"); c && *c) checkpoint = c;
}

void ServerConfig::validate() const {
  if (max_sessions < 1) throw ConfigError("max_sessions must be at least 1");
  if (!(session_timeout > 0)) throw ConfigError("session_timeout must be positive");
  if (online_steps < 1) throw ConfigError("online_steps must be at least 1");
  beam.validate();
  online.validate();
}

namespace {

struct Failure {
  ApiError error;
};

[[noreturn]] void fail(int status, std::string code, std::string message) {
  throw Failure{{status, std::move(code), std::move(message)}};
}

ApiResponse error_response(const ApiError& e) {
  return {e.status, json{{"error", {{"code", e.code}, {"message", e.message}}}}.dump()};
}

ApiResponse ok(const json& body) { return {200, body.dump()}; }

// Parses an object body and checks it carries only `allowed` keys.
json parse_body(std::string_view body, std::initializer_list<std::string_view> allowed) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) fail(400, "invalid_json", "request body is not valid JSON");
  if (!j.is_object()) fail(400, "invalid_json", "request body must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      fail(400, "unknown_field", "unknown field '" + k + "'");
    }
  }
  return j;
}

const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(400, "missing_field", std::string("missing field '") + key + "'");
  return *it;
}

std::string source_field(const json& j) {
  const json& s = require(j, "source");
  if (!s.is_string()) fail(400, "invalid_field", "'source' must be a string");
  auto text = s.get<std::string>();
  if (tokenize(text).empty()) fail(400, "empty_source", "source sentence is empty");
  return text;
}

std::string new_session_id() {
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  std::string id;
  static constexpr char hex[] = "0123456789abcdef";
  for (int word = 0; word < 4; ++word) {
    std::uint32_t r = rd();
    for (int i = 0; i < 8; ++i, r >>= 4) id += hex[r & 15];
  }
  return id;  // 128 bits
}

}  // namespace

struct Service::Impl {
  ServerConfig config;

  mutable std::shared_mutex model_mutex;
  TranslationModel model;
  bool loaded = false;
  std::string load_error;
  OnlineLearning online;
  std::thread loader;

  struct Entry {
    std::mutex busy;  // one request per session at a time
    SessionState state;
    Clock::time_point last_used;
  };
  mutable std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Entry>> sessions;

  explicit Impl(ServerConfig c) : config(std::move(c)) {
    config.validate();
    online.config = config.online;
    online.steps = config.online_steps;
  }

  void require_model() const {
    if (!loaded) {
      if (!load_error.empty()) fail(503, "model_loading", "model failed to load: " + load_error);
      fail(503, "model_loading", "model is still loading");
    }
  }

  // Caller holds sessions_mutex.
  void purge_expired(Clock::time_point now) {
    const auto ttl = std::chrono::duration<double>(config.session_timeout);
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (now - it->second->last_used > ttl) {
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::size_t count_open() const {
    std::size_t n = 0;
    for (const auto& [_, e] : sessions)
      if (!e->state.closed) ++n;
    return n;
  }

  std::shared_ptr<Entry> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    const auto now = Clock::now();
    purge_expired(now);
    const auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "session_not_found", "no session '" + id + "'");
    it->second->last_used = now;
    return it->second;
  }

  ApiResponse translate(std::string_view body) {
    const json j = parse_body(body, {"source", "nbest"});
    const std::string source = source_field(j);
    std::size_t nbest = 1;
    if (const auto it = j.find("nbest"); it != j.end()) {
      if (!it->is_number_integer() || it->get<long long>() < 1) {
        fail(400, "invalid_field", "'nbest' must be a positive integer");
      }
      nbest = it->get<std::size_t>();
    }
    if (nbest > config.beam.beam_size) {
      fail(400, "nbest_exceeds_beam",
           "nbest " + std::to_string(nbest) + " exceeds beam size " + std::to_string(config.beam.beam_size));
    }
    std::shared_lock lock(model_mutex);
    require_model();
    std::vector<Translation> out;
    try {
      out = inmt::translate(model, source, config.beam);
    } catch (const EmptyInputError&) {
      fail(400, "empty_source", "source sentence is empty");
    }
    json hyps = json::array();
    for (std::size_t i = 0; i < out.size() && i < nbest; ++i) {
      hyps.push_back({{"text", out[i].text}, {"score", out[i].hypothesis.score}});
    }
    return ok({{"hypotheses", hyps}});
  }

  ApiResponse create_session(std::string_view body) {
    const json j = parse_body(body, {"source"});
    const std::string source = source_field(j);
    {
      std::lock_guard lock(sessions_mutex);
      purge_expired(Clock::now());
      if (count_open() >= config.max_sessions) {
        fail(429, "too_many_sessions", "limit of " + std::to_string(config.max_sessions) + " open sessions reached");
      }
    }
    auto entry = std::make_shared<Entry>();
    {
      std::shared_lock lock(model_mutex);
      require_model();
      try {
        entry->state = start_session(model, source, config.beam);
      } catch (const EmptyInputError&) {
        fail(400, "empty_source", "source sentence is empty");
      }
    }
    std::lock_guard lock(sessions_mutex);
    // Re-check: other sessions may have opened while decoding.
    if (count_open() >= config.max_sessions) {
      fail(429, "too_many_sessions", "limit of " + std::to_string(config.max_sessions) + " open sessions reached");
    }
    std::string id;
    do id = new_session_id();
    while (sessions.contains(id));
    entry->state.id = id;
    entry->last_used = Clock::now();
    sessions.emplace(id, entry);
    return ok({{"session_id", id}, {"hypothesis", entry->state.hypothesis}});
  }

  ApiResponse correct(const std::string& id, std::string_view body) {
    const json j = parse_body(body, {"position", "character"});
    const json& pos = require(j, "position");
    const json& ch = require(j, "character");
    if (!pos.is_number_integer()) fail(400, "invalid_field", "'position' must be an integer");
    if (!ch.is_string()) fail(400, "invalid_field", "'character' must be a string");
    auto entry = find_session(id);
    std::unique_lock busy(entry->busy, std::try_to_lock);
    if (!busy.owns_lock()) fail(409, "correction_in_flight", "another request on this session is in progress");
    if (entry->state.closed) fail(409, "session_closed", "session has been accepted");
    const auto hyp_len = utf8::length(entry->state.hypothesis);
    if (pos.get<long long>() < 0 || static_cast<std::size_t>(pos.get<long long>()) > hyp_len) {
      fail(422, "position_out_of_range",
           "position " + pos.dump() + " is outside [0, " + std::to_string(hyp_len) + "]");
    }
    const std::string character = ch.get<std::string>();
    if (!utf8::is_valid(character) || utf8::length(character) != 1) {
      fail(400, "invalid_character", "'character' must be exactly one code point");
    }
    SessionState next = entry->state;
    {
      std::shared_lock lock(model_mutex);
      require_model();
      apply_feedback(next, {pos.get<std::size_t>(), character}, model, config.beam);
    }
    entry->state = std::move(next);
    return ok({{"hypothesis", entry->state.hypothesis},
               {"validated_prefix_len", utf8::length(entry->state.validated_prefix)}});
  }

  ApiResponse accept(const std::string& id, std::string_view body) {
    const json j = parse_body(body, {"learn"});
    bool learn = false;
    if (const auto it = j.find("learn"); it != j.end()) {
      if (!it->is_boolean()) fail(400, "invalid_field", "'learn' must be a boolean");
      learn = it->get<bool>();
    }
    auto entry = find_session(id);
    std::unique_lock busy(entry->busy, std::try_to_lock);
    if (!busy.owns_lock()) fail(409, "correction_in_flight", "another request on this session is in progress");
    if (entry->state.closed) fail(409, "session_closed", "session has been accepted");
    std::string final_text;
    if (learn) {
      std::unique_lock lock(model_mutex);
      require_model();
      final_text = accept_session(entry->state, model, &online);
    } else {
      // No writes without an OnlineLearning, so a shared lock suffices.
      std::shared_lock lock(model_mutex);
      require_model();
      final_text = accept_session(entry->state, model);
    }
    const auto& s = entry->state;
    return ok({{"final", final_text},
               {"ksmr_counters",
                {{"keystrokes", s.keystrokes},
                 {"mouse_actions", s.mouse_actions},
                 {"characters", utf8::length(final_text)},
                 {"iterations", s.iteration}}}});
  }

  ApiResponse health() const {
    std::string status = "ok";
    {
      std::shared_lock lock(model_mutex);
      if (!loaded) status = load_error.empty() ? "loading" : "error";
    }
    std::size_t open = 0;
    {
      std::lock_guard lock(sessions_mutex);
      open = count_open();
    }
    return ok({{"status", status}, {"sessions", open}});
  }

  ApiResponse route(std::string_view method, std::string_view path, std::string_view body) {
    static const std::regex session_op(R"(^/session/([^/]+)/(correction|accept)$)");
    const std::string p(path);
    std::smatch m;
    const bool is_post = method == "POST";
    if (p == "/health") {
      if (method != "GET") fail(405, "method_not_allowed", "use GET /health");
      return health();
    }
    if (p == "/translate" || p == "/session" || std::regex_match(p, m, session_op)) {
      if (!is_post) fail(405, "method_not_allowed", "use POST " + p);
      if (p == "/translate") return translate(body);
      if (p == "/session") return create_session(body);
      return m[2] == "correction" ? correct(m[1], body) : accept(m[1], body);
    }
    fail(404, "not_found", "no endpoint " + p);
  }
};

Service::Service(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
  if (impl_->loader.joinable()) impl_->loader.join();
}

void Service::set_model(TranslationModel model) {
  std::unique_lock lock(impl_->model_mutex);
  impl_->model = std::move(model);
  impl_->loaded = true;
  impl_->load_error.clear();
  impl_->online.state = {};
}

void Service::load_model_async() {
  if (impl_->loader.joinable()) impl_->loader.join();
  impl_->loader = std::thread([this] {
    try {
      set_model(TranslationModel::load(impl_->config.checkpoint));
    } catch (const std::exception& e) {
      std::unique_lock lock(impl_->model_mutex);
      impl_->load_error = e.what();
    }
  });
}

bool Service::ready() const {
  std::shared_lock lock(impl_->model_mutex);
  return impl_->loaded;
}

ApiResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    return impl_->route(method, path, body);
  } catch (const Failure& f) {
    return error_response(f.error);
  } catch (const std::exception& e) {
    return error_response({500, "internal_error", e.what()});
  }
}

TranslationModel Service::model_snapshot() const {
  std::shared_lock lock(impl_->model_mutex);
  return impl_->model;
}

std::size_t Service::open_sessions() const {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->count_open();
}

const ServerConfig& Service::config() const { return impl_->config; }

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = service_.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json; charset=utf-8");
  };
  server_->Post(R"(/.*)", forward);
  server_->Get("/health", forward);
  server_->set_payload_max_length(1 << 20);
  const auto& dir = service_.config().static_dir;
  if (!dir.empty() && std::filesystem::is_directory(dir)) server_->set_mount_point("/", dir.string());
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto code = res.status == 404 ? "not_found" : res.status == 405 ? "method_not_allowed" : "http_error";
    res.set_content(json{{"error", {{"code", code}, {"message", req.method + " " + req.path}}}}.dump(),
                    "application/json; charset=utf-8");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace inmt
