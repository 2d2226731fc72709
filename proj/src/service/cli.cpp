#include "inmt/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "inmt/checkpoint.hpp"
#include "inmt/config.hpp"
#include "inmt/error.hpp"
#include "inmt/interactive.hpp"
#include "inmt/metrics.hpp"
#include "inmt/service.hpp"
#include "inmt/utf8.hpp"
#include "json.hpp"

namespace inmt {

namespace {

using nlohmann::json;

// Usage problems detected after parsing (missing model, bad combination).
struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

struct Common {
  std::string config;
  std::map<std::string, std::string> flags;  // setting key -> value
};

// --config plus one --key-with-dashes flag per setting.
void add_settings(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value settings file")->check(CLI::ExistingFile);
  for (const auto& key : setting_keys()) {
    cmd->add_option_function<std::string>(
        "--" + dashed(key), [&c, key](const std::string& v) { c.flags[key] = v; }, "setting " + key);
  }
}

// Defaults, then the file, then the command line.
Settings resolve(const Common& c) {
  Settings s;
  if (!c.config.empty()) apply_config_file(s, c.config);
  for (const auto& [k, v] : c.flags) apply_setting(s, k, v);
  return s;
}

std::vector<std::string> input_lines(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
    return lines;
  }
  return read_lines(path);
}

// Writes to a file, or to `fallback` for "" and "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

TranslationModel load_model(const Settings& s) {
  if (s.model.empty()) throw Usage("no model directory given (--model)");
  return TranslationModel::load(s.model);
}

OnlineLearning online_of(const Settings& s) {
  OnlineLearning ol;
  ol.config = s.online;
  ol.steps = s.online_steps;
  ol.config.validate();
  return ol;
}

std::vector<std::string> sides(const ParallelCorpus& c, bool source) {
  std::vector<std::string> out;
  for (const auto& p : c.pairs) out.push_back(source ? p.source : p.target);
  return out;
}

std::optional<BpeModel> bpe_for(const std::vector<std::string>& lines, std::size_t merges) {
  if (merges == 0) return std::nullopt;
  std::map<std::string, std::size_t> counts;
  for (const auto& l : lines)
    for (const auto& w : tokenize(l)) ++counts[w];
  return learn_bpe(counts, merges);
}

Vocabulary vocab_for(const std::vector<std::string>& lines, const std::optional<BpeModel>& bpe,
                     std::size_t max_size, std::size_t min_freq) {
  std::vector<std::vector<std::string>> sents;
  for (const auto& l : lines) sents.push_back(segment(l, bpe ? &*bpe : nullptr));
  return build_vocabulary(sents, max_size, min_freq);
}

// --- subcommands -----------------------------------------------------------

struct TrainArgs {
  std::string src, trg, dev_src, dev_trg, log;
  bool dict = false;
};

int run_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  Settings s = resolve(c);
  if (s.model.empty()) throw Usage("train needs an output model directory (--model)");
  s.train.validate();
  const auto corpus = ParallelCorpus::load(a.src, a.trg);
  if (corpus.empty()) throw EmptyInputError("training corpus is empty");
  ParallelCorpus dev = corpus;
  if (!a.dev_src.empty() || !a.dev_trg.empty()) {
    if (a.dev_src.empty() || a.dev_trg.empty()) throw Usage("--dev-src and --dev-trg go together");
    dev = ParallelCorpus::load(a.dev_src, a.dev_trg, Split::dev);
  }

  TranslationModel m;
  const auto src_lines = sides(corpus, true);
  const auto trg_lines = sides(corpus, false);
  m.source_bpe = bpe_for(src_lines, s.bpe_merges);
  m.target_bpe = bpe_for(trg_lines, s.bpe_merges);
  m.source_vocab = vocab_for(src_lines, m.source_bpe, s.source_vocab_size, s.min_freq);
  m.target_vocab = vocab_for(trg_lines, m.target_bpe, s.target_vocab_size, s.min_freq);
  ModelDims dims = s.dims;
  dims.source_vocab = m.source_vocab.size();
  dims.target_vocab = m.target_vocab.size();

  const auto log_path = a.log.empty() ? std::filesystem::path(s.model) / "train_log.jsonl"
                                      : std::filesystem::path(a.log);
  std::filesystem::create_directories(s.model);
  auto result = train({corpus, dev, m.vocabs()}, init_params(dims, s.attention, s.train.seed), s.train);
  m.params = std::move(result.params);
  if (a.dict) m.dict = build_stat_dict(corpus, s.dict_iterations);
  m.save(s.model);
  std::ofstream log(log_path);
  result.log.write_jsonl(log);

  const auto& evals = result.log.evaluations;
  out << "updates " << result.log.updates.size();
  if (result.log.best) out << ", best dev " << format_metric("BLEU", evals[*result.log.best].bleu);
  out << "\nmodel saved to " << s.model << "\n";
  return 0;
}

struct TranslateArgs {
  std::string src, out;
  std::vector<std::string> ensemble;
};

int run_translate(const Common& c, const TranslateArgs& a, std::istream& in, std::ostream& out) {
  const Settings s = resolve(c);
  s.beam.validate();
  if (s.nbest < 1 || s.nbest > s.beam.beam_size) throw Usage("nbest must be in [1, beam_size]");
  const auto m = load_model(s);
  std::vector<ModelParams> members;
  for (const auto& dir : a.ensemble) {
    auto e = TranslationModel::load(dir);
    if (!(e.source_vocab == m.source_vocab) || !(e.target_vocab == m.target_vocab)) {
      throw ConfigError("ensemble member " + dir + " uses different vocabularies");
    }
    members.push_back(std::move(e.params));
  }
  std::vector<const ModelParams*> extra;
  for (const auto& p : members) extra.push_back(&p);

  Output o(a.out, out);
  const auto lines = input_lines(a.src, in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (tokenize(lines[i]).empty()) {
      if (s.nbest == 1) *o << "\n";
      continue;
    }
    const auto hyps = translate(m, lines[i], s.beam, nullptr, extra);
    if (s.nbest == 1) {
      *o << hyps.front().text << "\n";
      continue;
    }
    for (std::size_t k = 0; k < hyps.size() && k < s.nbest; ++k) {
      *o << format_nbest_line(i, hyps[k].text, hyps[k].hypothesis.score, hyps[k].hypothesis.logprob) << "\n";
    }
  }
  return 0;
}

// Line protocol: with no open session a line is a source sentence; inside
// a session "c POS CHAR" corrects, "a" accepts, "l" accepts and learns.
int run_interactive(const Common& c, const std::string& save_to, std::istream& in, std::ostream& out) {
  const Settings s = resolve(c);
  auto m = load_model(s);
  auto ol = online_of(s);
  std::optional<SessionState> session;
  std::string line;
  bool learned = false;
  auto show = [&] {
    out << "hyp: " << session->hypothesis << "\n";
    out << "prefix: " << utf8::length(session->validated_prefix) << "\n";
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!session) {
      if (tokenize(line).empty()) continue;
      session = start_session(m, line, s.beam);
      show();
      continue;
    }
    if (line == "a" || line == "l") {
      const auto final_text = accept_session(*session, m, line == "l" ? &ol : nullptr);
      learned = learned || line == "l";
      out << "final: " << final_text << "\n";
      out << "effort: keystrokes " << session->keystrokes << " mouse " << session->mouse_actions << "\n";
      session.reset();
      continue;
    }
    std::istringstream cmd(line);
    std::string op;
    std::size_t pos = 0;
    std::string ch;
    if (cmd >> op >> pos && op == "c" && cmd.get() == ' ' && std::getline(cmd, ch) && !ch.empty()) {
      try {
        apply_feedback(*session, {pos, ch}, m, s.beam);
        show();
      } catch (const std::exception& e) {
        out << "error: " << e.what() << "\n";
      }
      continue;
    }
    out << "error: expected 'c POS CHAR', 'a' or 'l'\n";
  }
  if (learned && !save_to.empty()) m.save(save_to);
  return 0;
}

struct SimulateArgs {
  std::string src, ref, report;
  bool online = false;
};

int run_simulate(const Common& c, const SimulateArgs& a, std::ostream& out) {
  const Settings s = resolve(c);
  auto m = load_model(s);
  const auto corpus = ParallelCorpus::load(a.src, a.ref, Split::test);
  if (corpus.empty()) throw EmptyInputError("no sentences to simulate");
  auto ol = online_of(s);
  std::vector<SentenceEffort> inmt_effort, baseline;
  std::vector<std::string> initial, refs;
  bool sound = true;
  std::size_t max_iterations = 0;
  for (const auto& p : corpus.pairs) {
    const auto r = simulate_user(m, p.source, p.target, s.beam, a.online ? &ol : nullptr);
    inmt_effort.push_back(r.effort);
    baseline.push_back(type_everything_effort(p.target));
    initial.push_back(r.hypotheses.front());
    refs.push_back(p.target);
    sound = sound && r.prefix_sound && r.final_text == p.target;
    max_iterations = std::max(max_iterations, r.effort.iterations);
  }
  std::size_t keys = 0, mouse = 0, chars = 0;
  for (const auto& e : inmt_effort) {
    keys += e.keystrokes;
    mouse += e.mouse_actions;
    chars += e.reference_chars;
  }
  const double k = ksmr(inmt_effort);
  const double b = ksmr(baseline);
  const json report = {{"sentences", corpus.size()},
                       {"ksmr", k},
                       {"baseline_ksmr", b},
                       {"relative_reduction", b > 0 ? (b - k) / b : 0.0},
                       {"keystrokes", keys},
                       {"mouse_actions", mouse},
                       {"reference_chars", chars},
                       {"max_iterations", max_iterations},
                       {"initial_bleu", bleu(initial, refs)},
                       {"all_sessions_sound", sound},
                       {"online_learning", a.online}};
  out << report.dump(2) << "\n";
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    f << report.dump(2) << "\n";
  }
  return 0;
}

int run_evaluate(const std::string& hyp, const std::string& ref, const std::string& json_path,
                 std::ostream& out) {
  const auto h = read_lines(hyp);
  const auto r = read_lines(ref);
  const auto b = bleu_report(h, r);
  const auto t = ter_report(h, r);
  out << format_metric(b.name, b.value) << "\n" << format_metric(t.name, t.value) << "\n";
  if (!json_path.empty()) {
    std::ofstream f(json_path);
    f << json{{"BLEU", {{"score", b.value}, {"per_sentence", b.per_sentence}}},
              {"TER", {{"score", t.value}, {"per_sentence", t.per_sentence}}}}
             .dump(2)
      << "\n";
  }
  return 0;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const Common& c, std::ostream& out) {
  const Settings s = resolve(c);
  ServerConfig cfg;
  cfg.set_addr(s.addr);
  cfg.checkpoint = s.model;
  cfg.apply_environment();
  // Explicit flags win over the environment.
  if (c.flags.contains("addr")) cfg.set_addr(s.addr);
  if (c.flags.contains("model")) cfg.checkpoint = s.model;
  if (cfg.checkpoint.empty()) throw Usage("serve needs a model directory (--model or INMT_CHECKPOINT)");
  cfg.beam = s.beam;
  cfg.online = s.online;
  cfg.online_steps = s.online_steps;
  cfg.max_sessions = s.max_sessions;
  cfg.session_timeout = s.session_timeout;
  cfg.static_dir = s.static_dir;

  Service service(cfg);
  service.load_model_async();
  HttpServer server(service);
  const int port = server.bind(cfg.host, cfg.port);
  out << "listening on " << cfg.host << ":" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return 0;
}

int run_average(const std::vector<std::string>& inputs, const std::string& output, std::ostream& out) {
  std::vector<ModelParams> ckpts;
  std::optional<TranslationModel> first;
  for (const auto& dir : inputs) {
    auto m = TranslationModel::load(dir);
    if (first && (!(m.source_vocab == first->source_vocab) || !(m.target_vocab == first->target_vocab))) {
      throw ConfigError(dir + " uses different vocabularies");
    }
    ckpts.push_back(m.params);
    if (!first) first = std::move(m);
  }
  first->params = average_checkpoints(ckpts);
  first->save(output);
  out << "averaged " << inputs.size() << " models into " << output << "\n";
  return 0;
}

int run_build_dict(const Common& c, const std::string& src, const std::string& trg, const std::string& output,
                   std::ostream& out) {
  const Settings s = resolve(c);
  const auto dict = build_stat_dict(ParallelCorpus::load(src, trg), s.dict_iterations);
  dict.save(output);
  out << dict.entries.size() << " entries written to " << output << "\n";
  return 0;
}

int run_score(const Common& c, const std::string& src, const std::string& trg, std::ostream& out) {
  const Settings s = resolve(c);
  const auto m = load_model(s);
  const auto corpus = ParallelCorpus::load(src, trg);
  char buf[32];
  for (const auto& p : corpus.pairs) {
    const double lp = score_sentence(m.params, m.encode_source(p.source), m.encode_target(p.target));
    std::snprintf(buf, sizeof(buf), "%.6f", lp);
    out << buf << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interactive-predictive neural machine translation", "inmt"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common common;
  TrainArgs train_args;
  TranslateArgs translate_args;
  SimulateArgs sim_args;
  std::string save_to, hyp, ref, eval_json, src, trg, output;
  std::vector<std::string> inputs;

  auto* train_cmd = app.add_subcommand("train", "train a model from parallel text");
  add_settings(train_cmd, common);
  train_cmd->add_option("--src", train_args.src, "training source file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--trg", train_args.trg, "training target file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev-src", train_args.dev_src, "dev source file (default: training data)");
  train_cmd->add_option("--dev-trg", train_args.dev_trg, "dev target file");
  train_cmd->add_option("--log", train_args.log, "TrainLog JSONL (default: MODEL/train_log.jsonl)");
  train_cmd->add_flag("--dict", train_args.dict, "also build a statistical dictionary");

  auto* translate_cmd = app.add_subcommand("translate", "translate one sentence per line");
  add_settings(translate_cmd, common);
  translate_cmd->add_option("--src", translate_args.src, "input file, '-' for stdin");
  translate_cmd->add_option("--out", translate_args.out, "output file, '-' for stdout");
  translate_cmd->add_option("--ensemble", translate_args.ensemble, "extra model directories");

  auto* interactive_cmd = app.add_subcommand("interactive", "terminal INMT loop");
  add_settings(interactive_cmd, common);
  interactive_cmd->add_option("--save", save_to, "write the adapted model here on exit");

  auto* simulate_cmd = app.add_subcommand("simulate", "KSMR harness with a simulated user");
  add_settings(simulate_cmd, common);
  simulate_cmd->add_option("--src", sim_args.src)->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--ref", sim_args.ref)->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--report", sim_args.report, "also write the JSON report here");
  simulate_cmd->add_flag("--online", sim_args.online, "learn from every accepted sentence");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "corpus BLEU and TER");
  evaluate_cmd->add_option("--hyp", hyp)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--ref", ref)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--json", eval_json, "per-sentence scores");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP JSON service");
  add_settings(serve_cmd, common);

  auto* average_cmd = app.add_subcommand("average", "average model parameters");
  average_cmd->add_option("--inputs", inputs, "model directories")->required()->expected(1, -1);
  average_cmd->add_option("--out", output, "output model directory")->required();

  auto* dict_cmd = app.add_subcommand("build-dict", "statistical dictionary from parallel text");
  add_settings(dict_cmd, common);
  dict_cmd->add_option("--src", src)->required()->check(CLI::ExistingFile);
  dict_cmd->add_option("--trg", trg)->required()->check(CLI::ExistingFile);
  dict_cmd->add_option("--out", output, "dictionary JSON")->required();

  auto* score_cmd = app.add_subcommand("score", "log-probability of each target sentence");
  add_settings(score_cmd, common);
  score_cmd->add_option("--src", src)->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--trg", trg)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(common, train_args, out);
    if (*translate_cmd) return run_translate(common, translate_args, in, out);
    if (*interactive_cmd) return run_interactive(common, save_to, in, out);
    if (*simulate_cmd) return run_simulate(common, sim_args, out);
    if (*evaluate_cmd) return run_evaluate(hyp, ref, eval_json, out);
    if (*serve_cmd) return run_serve(common, out);
    if (*average_cmd) return run_average(inputs, output, out);
    if (*dict_cmd) return run_build_dict(common, src, trg, output, out);
    if (*score_cmd) return run_score(common, src, trg, out);
  } catch (const Usage& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cin, std::cout, std::cerr); }

}  // namespace inmt
