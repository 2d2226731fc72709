#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace inmt {

using Words = std::vector<std::string>;

struct MetricReport {
  std::string name;
  double value = 0.0;  // percentage
  std::vector<double> per_sentence;
};

// Corpus BLEU-4 in percent: clipped n-gram precisions (n = 1..4), geometric
// mean, brevity penalty, no smoothing. Throws EmptyInputError for an empty
// corpus and std::invalid_argument for a count mismatch.
double bleu(const std::vector<Words>& hypotheses, const std::vector<Words>& references);
double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references);

struct TerStats {
  double edits = 0.0;  // shifts + insertions + deletions + substitutions
  std::size_t reference_length = 0;
  std::size_t shifts = 0;
};

// TER edit count. Short hypotheses (up to 6 words) get the exact minimum
// over shift sequences; longer ones use greedy shifts: repeatedly apply the
// block shift that most reduces the word edit distance (ties: leftmost
// start, longest block, leftmost destination) while it pays for its cost.
TerStats ter_edits(const Words& hypothesis, const Words& reference);
// Percentage. Throws EmptyInputError for an empty reference.
double ter(const Words& hypothesis, const Words& reference);
// Corpus TER: total edits over total reference words.
double corpus_ter(const std::vector<Words>& hypotheses, const std::vector<Words>& references);
double corpus_ter(const std::vector<std::string>& hypotheses,
                  const std::vector<std::string>& references);

// Word-level Levenshtein distance.
std::size_t edit_distance(const Words& a, const Words& b);

struct SentenceEffort {
  std::size_t keystrokes = 0;
  std::size_t mouse_actions = 0;
  std::size_t reference_chars = 0;
  std::size_t iterations = 0;
  bool operator==(const SentenceEffort&) const = default;
};

// (keystrokes + mouse actions) / reference characters, in percent.
double ksmr(const std::vector<SentenceEffort>& reports);

// "BLEU = xx.xx" style line.
std::string format_metric(const std::string& name, double value);

MetricReport bleu_report(const std::vector<std::string>& hypotheses,
                         const std::vector<std::string>& references);
MetricReport ter_report(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references);

}  // namespace inmt
