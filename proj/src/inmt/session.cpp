#include <stdexcept>

#include "inmt/error.hpp"
#include "inmt/interactive.hpp"
#include "inmt/utf8.hpp"

namespace inmt {

TrainConfig OnlineLearning::default_config() {
  TrainConfig c;
  c.optimizer = OptimizerKind::sgd;
  c.schedule = ScheduleKind::constant;
  return c;
}

SessionState start_session(const TranslationModel& model, std::string_view source,
                           const BeamConfig& beam, std::string id) {
  SessionState s;
  s.id = std::move(id);
  s.source = std::string(source);
  const auto hyps = translate(model, source, beam);
  if (!hyps.empty()) s.hypothesis = hyps.front().text;
  return s;
}

Translation prefix_constrained_search(const TranslationModel& model, std::string_view source,
                                      std::string_view prefix, const BeamConfig& beam,
                                      bool complete) {
  if (!utf8::is_valid(prefix)) throw std::invalid_argument("prefix is not valid UTF-8");
  const PrefixConstraint constraint(model.target_vocab, prefix, complete);
  auto hyps = translate(model, source, beam, &constraint);
  if (hyps.empty()) throw std::logic_error("constrained search produced no hypothesis");
  return std::move(hyps.front());
}

void apply_feedback(SessionState& state, const Feedback& feedback,
                    const TranslationModel& model, const BeamConfig& beam) {
  if (state.closed) throw SessionClosedError("session " + state.id + " is closed");
  const auto hyp = utf8::decode(state.hypothesis);
  if (feedback.position > hyp.size()) {
    throw OutOfRangeError("correction position " + std::to_string(feedback.position) +
                          " beyond hypothesis length " + std::to_string(hyp.size()));
  }
  if (!utf8::is_valid(feedback.character)) {
    throw std::invalid_argument("correction is not valid UTF-8");
  }
  const auto ch = utf8::decode(feedback.character);
  if (ch.size() > 1 || (ch.empty() && !feedback.completes)) {
    throw std::invalid_argument("a correction is exactly one character");
  }

  std::u32string prefix = hyp.substr(0, feedback.position);
  prefix += ch;
  ++state.keystrokes;
  if (feedback.position != state.cursor) ++state.mouse_actions;
  state.cursor = feedback.position + ch.size();
  ++state.iteration;
  state.validated_prefix = utf8::encode(prefix);

  // Nothing to regenerate when the hypothesis already agrees.
  const bool agrees = feedback.completes ? hyp == prefix : hyp.starts_with(prefix);
  if (agrees) return;
  state.hypothesis =
      prefix_constrained_search(model, state.source, state.validated_prefix, beam, feedback.completes)
          .text;
}

std::vector<double> learn_from_sample(TranslationModel& model, OnlineLearning& ol,
                                      std::string_view source, std::string_view target) {
  return online_update(model.params, ol.state, model.encode_source(source),
                       model.encode_target(target), ol.steps, ol.config);
}

std::string accept_session(SessionState& state, TranslationModel& model, OnlineLearning* ol) {
  if (state.closed) throw SessionClosedError("session " + state.id + " is already closed");
  ++state.mouse_actions;
  state.closed = true;
  if (ol != nullptr) learn_from_sample(model, *ol, state.source, state.hypothesis);
  return state.hypothesis;
}

std::optional<std::size_t> first_difference(std::u32string_view hypothesis,
                                            std::u32string_view reference) {
  const std::size_t n = std::min(hypothesis.size(), reference.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (hypothesis[i] != reference[i]) return i;
  }
  if (hypothesis.size() == reference.size()) return std::nullopt;
  return n;
}

SimulationResult simulate_user(TranslationModel& model, std::string_view source,
                               std::string_view reference, const BeamConfig& beam,
                               OnlineLearning* ol) {
  const auto ref = utf8::decode(reference);
  if (ref.empty()) throw EmptyInputError("simulation needs a non-empty reference");
  SimulationResult r;
  auto state = start_session(model, source, beam);
  r.hypotheses.push_back(state.hypothesis);
  while (auto diff = first_difference(utf8::decode(state.hypothesis), ref)) {
    Feedback fb;
    fb.position = *diff;
    if (*diff < ref.size()) {
      fb.character = utf8::encode(ref[*diff]);
      fb.completes = *diff + 1 == ref.size();
    } else {
      // The hypothesis runs past the reference: one keystroke ends it.
      fb.completes = true;
    }
    apply_feedback(state, fb, model, beam);
    r.hypotheses.push_back(state.hypothesis);
    r.prefixes.push_back(state.validated_prefix);
    if (!state.hypothesis.starts_with(state.validated_prefix)) r.prefix_sound = false;
    if (state.iteration > ref.size()) {
      throw std::logic_error("simulated session did not converge");
    }
  }
  r.final_text = accept_session(state, model, ol);
  r.effort = {state.keystrokes, state.mouse_actions, ref.size(), state.iteration};
  return r;
}

SentenceEffort type_everything_effort(std::string_view reference) {
  const std::size_t n = utf8::length(reference);
  return {n, 2, n, 0};
}

}  // namespace inmt
