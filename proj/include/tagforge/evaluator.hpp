#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tagforge/corpus.hpp"
#include "tagforge/embedding.hpp"

namespace tagforge {

// One judged unit: a query with its tags (precision) or a tag with several
// instructions carrying it (consistency).
struct PrecisionCase {
  std::string case_id;
  std::string session_id;
  int turn_index = 0;
  std::string query;
  std::vector<std::string> tags;
};

struct ConsistencyCase {
  std::string case_id;
  std::string tag;
  std::vector<std::string> instructions;
};

struct EvalCases {
  std::vector<PrecisionCase> precision;
  std::vector<ConsistencyCase> consistency;
  std::vector<std::string> warnings;  // tags skipped for too few instructions
};

struct CaseSamplingConfig {
  std::size_t precision_cases = 2000;
  std::size_t consistency_cases = 2000;
  std::size_t instructions_per_tag = 5;
  std::uint64_t seed = 0;
};

// Uniform draws without replacement over tagged queries (precision) and over
// tags (consistency), reproducible from the seed. A drawn tag carried by
// fewer than instructions_per_tag queries is skipped with a warning and
// redrawn. Too few tagged queries or eligible tags is fatal.
EvalCases sample_cases(const Dataset& normalized, const CaseSamplingConfig& config);

// Counterfactual of one case; perturbed_index is the ground truth a judge
// should flag.
struct CounterfactualCase {
  std::string case_id;
  bool is_precision = true;
  std::string query;                      // precision
  std::vector<std::string> tags;          // precision: one tag replaced
  std::string tag;                        // consistency
  std::vector<std::string> instructions;  // consistency: one instruction replaced
  std::size_t perturbed_index = 0;
};

// Replaces one uniformly chosen tag with the embedding-nearest vocabulary tag
// not already on the query (ties: lexicographically smallest). Throws
// CaseSkipped when no replacement exists.
CounterfactualCase make_precision_counterfactual(
    const PrecisionCase& original, const std::map<std::string, std::vector<double>>& vocabulary,
    std::mt19937_64& rng);

// Replaces one uniformly chosen instruction with a uniformly sampled query
// that does not carry the case tag. Throws CaseSkipped when none exists.
CounterfactualCase make_consistency_counterfactual(const ConsistencyCase& original,
                                                   const Dataset& corpus, std::mt19937_64& rng);

// Extracts the flagged indices from a judge response: first JSON array of
// {"idx": int} objects, prose/fences tolerated, duplicates collapsed.
std::set<int> parse_judge_response(const std::string& raw);

// Detection = the judge flagged the perturbed index.
struct CounterfactualScore {
  std::size_t cases = 0;
  std::size_t detected = 0;
  double detection_rate = 0.0;
};
CounterfactualScore score_counterfactuals(
    const std::vector<CounterfactualCase>& cases,
    const std::function<std::set<int>(const CounterfactualCase&)>& judge);

enum class KappaKind { fleiss, cohen };

struct KappaResult {
  KappaKind kind = KappaKind::fleiss;
  double value = 0.0;
  std::size_t n_items = 0;
  std::size_t n_raters = 0;
};

// Fleiss' kappa over an items x categories count matrix; every row must sum
// to the same rater count n >= 2. Exactly 1.0 on unanimous agreement across
// more than one used category; expected agreement of 1 is degenerate (fatal).
KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts);

// Cohen's kappa between two aligned label sequences.
KappaResult cohens_kappa(const std::vector<int>& rater_a, const std::vector<int>& rater_b);

// Strict majority over an odd number (>= 3) of verdicts.
bool majority_vote(const std::vector<bool>& verdicts);

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set-based exact match. Both sides empty scores 1.0; one side empty, 0.0.
F1Result tag_f1_exact(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& gold);

// A predicted tag counts when its cosine similarity to any gold tag reaches
// `threshold`; a gold tag is recalled symmetrically. With unit embeddings and
// threshold <= 1, fuzzy scores never fall below exact scores.
F1Result tag_f1_fuzzy(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& gold, double threshold,
                      CachedEmbedder& embedder);

// Human annotation interchange: case_id, annotator_id, incorrect_indices
// (semicolon-separated ints, empty = judged fully correct).
struct HumanJudgment {
  std::string case_id;
  std::string annotator_id;
  std::set<int> incorrect_indices;
};

std::vector<HumanJudgment> parse_human_annotations_csv(const std::string& content);
std::string human_annotations_to_csv(const std::vector<HumanJudgment>& judgments);

// A case is negative for agreement purposes iff any index is flagged.
int judgment_to_binary(const std::set<int>& flagged);

}  // namespace tagforge
