#include "inmt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>

#include "inmt/error.hpp"

namespace inmt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(std::string(v), &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
}

using Setter = std::function<void(Settings&, std::string_view, std::string_view)>;

template <class T>
Setter count(T Settings::*member) {
  return [member](Settings& s, std::string_view k, std::string_view v) {
    s.*member = static_cast<T>(to_count(k, v));
  };
}

const std::map<std::string, Setter, std::less<>>& registry() {
  static const std::map<std::string, Setter, std::less<>> r = [] {
    std::map<std::string, Setter, std::less<>> m;
    auto train_real = [](double TrainConfig::*f) {
      return [f](Settings& s, std::string_view k, std::string_view v) { s.train.*f = to_real(k, v); };
    };
    auto train_count = [](std::size_t TrainConfig::*f) {
      return [f](Settings& s, std::string_view k, std::string_view v) { s.train.*f = to_count(k, v); };
    };
    auto beam_real = [](double BeamConfig::*f) {
      return [f](Settings& s, std::string_view k, std::string_view v) { s.beam.*f = to_real(k, v); };
    };
    m["learning_rate"] = train_real(&TrainConfig::learning_rate);
    m["optimizer"] = [](Settings& s, std::string_view, std::string_view v) { s.train.optimizer = parse_optimizer(v); };
    m["schedule"] = [](Settings& s, std::string_view, std::string_view v) { s.train.schedule = parse_schedule(v); };
    m["decay"] = train_real(&TrainConfig::decay);
    m["total_steps"] = train_count(&TrainConfig::total_steps);
    m["warmup_steps"] = train_count(&TrainConfig::warmup_steps);
    m["model_dim"] = train_count(&TrainConfig::model_dim);
    m["label_smoothing"] = train_real(&TrainConfig::label_smoothing);
    m["weight_decay"] = train_real(&TrainConfig::weight_decay);
    m["coverage_penalty"] = train_real(&TrainConfig::coverage_penalty);
    m["clip_norm"] = train_real(&TrainConfig::clip_norm);
    m["max_epochs"] = train_count(&TrainConfig::max_epochs);
    m["patience"] = train_count(&TrainConfig::patience);
    m["eval_every"] = train_count(&TrainConfig::eval_every);
    m["batch_size"] = train_count(&TrainConfig::batch_size);
    m["seed"] = [](Settings& s, std::string_view k, std::string_view v) { s.train.seed = to_count(k, v); };

    m["embedding_dim"] = [](Settings& s, std::string_view k, std::string_view v) { s.dims.embedding = to_count(k, v); };
    m["state_dim"] = [](Settings& s, std::string_view k, std::string_view v) { s.dims.state = to_count(k, v); };
    m["attention_dim"] = [](Settings& s, std::string_view k, std::string_view v) { s.dims.attention = to_count(k, v); };
    m["attention"] = [](Settings& s, std::string_view, std::string_view v) { s.attention = parse_attention(v); };
    m["source_vocab_size"] = count(&Settings::source_vocab_size);
    m["target_vocab_size"] = count(&Settings::target_vocab_size);
    m["min_freq"] = count(&Settings::min_freq);
    m["bpe_merges"] = count(&Settings::bpe_merges);
    m["dict_iterations"] = count(&Settings::dict_iterations);

    m["beam_size"] = [](Settings& s, std::string_view k, std::string_view v) { s.beam.beam_size = to_count(k, v); };
    m["max_len_a"] = beam_real(&BeamConfig::max_len_a);
    m["max_len_b"] = beam_real(&BeamConfig::max_len_b);
    m["min_length"] = [](Settings& s, std::string_view k, std::string_view v) { s.beam.min_length = to_count(k, v); };
    m["length_alpha"] = beam_real(&BeamConfig::length_alpha);
    m["coverage_beta"] = beam_real(&BeamConfig::coverage_beta);
    m["nbest"] = count(&Settings::nbest);

    m["online_learning_rate"] = [](Settings& s, std::string_view k, std::string_view v) {
      s.online.learning_rate = to_real(k, v);
    };
    m["online_optimizer"] = [](Settings& s, std::string_view, std::string_view v) {
      s.online.optimizer = parse_optimizer(v);
    };
    m["online_steps"] = count(&Settings::online_steps);

    m["model"] = [](Settings& s, std::string_view, std::string_view v) { s.model = std::string(v); };
    m["addr"] = [](Settings& s, std::string_view, std::string_view v) { s.addr = std::string(v); };
    m["max_sessions"] = count(&Settings::max_sessions);
    m["session_timeout"] = [](Settings& s, std::string_view k, std::string_view v) {
      s.session_timeout = to_real(k, v);
    };
    m["static_dir"] = [](Settings& s, std::string_view, std::string_view v) { s.static_dir = std::string(v); };
    return m;
  }();
  return r;
}

}  // namespace

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : registry()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(Settings& settings, std::string_view key, std::string_view value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown setting '" + std::string(key) + "'");
  it->second(settings, key, trim(value));
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (!registry().contains(key)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown setting '" + key + "'");
    }
    if (!out.emplace(key, trim(std::string_view(body).substr(eq + 1))).second) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": '" + key + "' set twice");
    }
  }
  return out;
}

void apply_config_file(Settings& settings, const std::filesystem::path& path) {
  for (const auto& [k, v] : read_config_file(path)) apply_setting(settings, k, v);
}

}  // namespace inmt
