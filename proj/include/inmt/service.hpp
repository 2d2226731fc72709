#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "inmt/decoding.hpp"
#include "inmt/interactive.hpp"
#include "inmt/training.hpp"
#include "inmt/translation_model.hpp"

namespace httplib {
class Server;
}

namespace inmt {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path checkpoint;  // model directory
  BeamConfig beam;
  TrainConfig online = OnlineLearning::default_config();
  std::size_t online_steps = 1;
  std::size_t max_sessions = 64;
  double session_timeout = 600.0;  // idle seconds
  std::filesystem::path static_dir;

  // "host:port" or ":port". Throws ConfigError.
  void set_addr(std::string_view addr);
  // INMT_ADDR and INMT_CHECKPOINT, when set, override the fields.
  void apply_environment();
  void validate() const;
};

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON text
};

// The JSON API without the transport, so handlers are testable in-process.
// Thread safe: model reads are concurrent, online-learning writes exclusive,
// and each session admits one request at a time.
class Service {
 public:
  explicit Service(ServerConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void set_model(TranslationModel model);
  // Loads config().checkpoint on a background thread; requests needing the
  // model get 503 model_loading until it is done.
  void load_model_async();
  bool ready() const;

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

  TranslationModel model_snapshot() const;
  std::size_t open_sessions() const;
  const ServerConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Returns the bound port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void start();   // listen on a background thread
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace inmt
