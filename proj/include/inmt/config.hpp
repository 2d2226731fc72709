#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "inmt/decoding.hpp"
#include "inmt/interactive.hpp"
#include "inmt/model.hpp"
#include "inmt/training.hpp"

namespace inmt {

// Every tunable reachable from a config file or the command line.
struct Settings {
  TrainConfig train;
  BeamConfig beam;
  ModelDims dims;  // vocabulary sizes are filled in from data
  AttentionKind attention = AttentionKind::additive;
  std::size_t source_vocab_size = 30000;
  std::size_t target_vocab_size = 30000;
  std::size_t min_freq = 1;
  std::size_t bpe_merges = 0;  // 0 disables BPE
  std::size_t dict_iterations = 10;
  std::size_t nbest = 1;

  TrainConfig online = OnlineLearning::default_config();
  std::size_t online_steps = 1;

  std::string model;  // model directory
  std::string addr = "127.0.0.1:8080";
  std::size_t max_sessions = 64;
  double session_timeout = 600.0;  // seconds
  std::string static_dir;
};

// Keys use underscores in files ("beam_size") and dashes on the command
// line ("--beam-size").
const std::vector<std::string>& setting_keys();

// Throws ConfigError for unknown keys and malformed values.
void apply_setting(Settings& settings, std::string_view key, std::string_view value);

// "key = value" lines; blank lines and '#' comments ignored. Throws
// ConfigError on malformed lines, unknown keys or repeated keys.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

void apply_config_file(Settings& settings, const std::filesystem::path& path);

}  // namespace inmt
