#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "inmt/decoding.hpp"
#include "inmt/metrics.hpp"
#include "inmt/training.hpp"
#include "inmt/translation_model.hpp"

namespace inmt {

struct SessionState {
  std::string id;
  std::string source;
  std::string hypothesis;
  std::string validated_prefix;
  std::size_t iteration = 0;
  std::size_t keystrokes = 0;
  std::size_t mouse_actions = 0;
  // Code point index right after the last correction; a correction
  // anywhere else costs a mouse action to move there.
  std::size_t cursor = 0;
  bool closed = false;
};

struct Feedback {
  std::size_t position = 0;  // code point index into the hypothesis
  std::string character;     // exactly one code point, or empty with `completes`
  // The validated prefix is the whole sentence; the search must stop there.
  bool completes = false;
};

// Online learning after accepted sessions.
struct OnlineLearning {
  TrainConfig config = default_config();
  std::size_t steps = 1;
  OptimizerState state;

  // One plain SGD step per accepted sentence.
  static TrainConfig default_config();
};

SessionState start_session(const TranslationModel& model, std::string_view source,
                           const BeamConfig& beam, std::string id = {});

// Best hypothesis whose text starts with `prefix` (equals it when complete).
Translation prefix_constrained_search(const TranslationModel& model, std::string_view source,
                                      std::string_view prefix, const BeamConfig& beam,
                                      bool complete = false);

// Throws SessionClosedError, OutOfRangeError (position past the end of the
// hypothesis) and std::invalid_argument (malformed character).
void apply_feedback(SessionState& state, const Feedback& feedback,
                    const TranslationModel& model, const BeamConfig& beam);

// Closes the session (one mouse action) and, when `ol` is given, adapts the
// model on (source, final hypothesis). Returns the final text.
std::string accept_session(SessionState& state, TranslationModel& model,
                           OnlineLearning* ol = nullptr);

// Text-level single-sample update. Returns the losses before each step.
std::vector<double> learn_from_sample(TranslationModel& model, OnlineLearning& ol,
                                      std::string_view source, std::string_view target);

struct SimulationResult {
  SentenceEffort effort;
  std::string final_text;
  std::vector<std::string> hypotheses;  // initial one, then one per iteration
  std::vector<std::string> prefixes;    // validated prefix after each iteration
  bool prefix_sound = true;
};

// First code point where the hypothesis departs from the reference, or
// nullopt when they are equal.
std::optional<std::size_t> first_difference(std::u32string_view hypothesis,
                                            std::u32string_view reference);

// Simulated user: corrects the first wrong character until the hypothesis
// equals the reference, then accepts.
SimulationResult simulate_user(TranslationModel& model, std::string_view source,
                               std::string_view reference, const BeamConfig& beam,
                               OnlineLearning* ol = nullptr);

// Reject the hypothesis and type the reference: |ref| keystrokes plus two
// mouse actions.
SentenceEffort type_everything_effort(std::string_view reference);

}  // namespace inmt
