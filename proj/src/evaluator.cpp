#include "tagforge/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "tagforge/error.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

using ordered_json = nlohmann::ordered_json;

namespace {

// Tags a query carries for evaluation purposes: normalized when present,
// otherwise the raw annotation surface forms. Unannotated queries yield
// nothing and never enter a case.
std::optional<std::vector<std::string>> effective_tags(const Query& q) {
  if (q.normalized_tags) return *q.normalized_tags;
  if (!q.raw_tags) return std::nullopt;
  std::vector<std::string> tags;
  tags.reserve(q.raw_tags->size());
  for (const auto& ann : *q.raw_tags) tags.push_back(ann.tag);
  return tags;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ArgumentError("cosine: dimension mismatch");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return -1.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string numbered_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04zu", prefix, i);
  return buf;
}

std::set<int> validate_judge_array(const ordered_json& arr) {
  std::set<int> flagged;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& item = arr[i];
    if (!item.is_object() || !item.contains("idx") || !item["idx"].is_number_integer()) {
      throw ParseFailure("judge element at index " + std::to_string(i) +
                         " is not {\"idx\": int}");
    }
    const int idx = item["idx"].get<int>();
    if (idx < 0) {
      throw ParseFailure("judge element at index " + std::to_string(i) +
                         " has a negative idx");
    }
    flagged.insert(idx);
  }
  return flagged;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw SchemaError("annotations line " + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

EvalCases sample_cases(const Dataset& normalized, const CaseSamplingConfig& config) {
  EvalCases out;
  std::mt19937_64 rng(config.seed);

  // Precision pool: every annotated query with at least one tag, in corpus order.
  struct TaggedQuery {
    const Session* session;
    const Query* query;
    std::vector<std::string> tags;
  };
  std::vector<TaggedQuery> pool;
  std::map<std::string, std::vector<std::string>> tag_instructions;
  std::map<std::string, std::set<std::string>> seen_texts;
  for (const Session& s : normalized.sessions) {
    for (const Query& q : s.queries) {
      auto tags = effective_tags(q);
      if (!tags || tags->empty()) continue;
      pool.push_back({&s, &q, *tags});
      for (const std::string& t : *tags) {
        // Instructions are distinct texts: two queries with identical text
        // contribute one instruction to the tag.
        if (seen_texts[t].insert(q.text).second) tag_instructions[t].push_back(q.text);
      }
    }
  }

  if (pool.size() < config.precision_cases) {
    throw ArgumentError("sample_cases: need " + std::to_string(config.precision_cases) +
                        " tagged queries for precision cases, corpus has " +
                        std::to_string(pool.size()));
  }
  const auto precision_draw = sample_indices(rng, pool.size(), config.precision_cases);
  for (std::size_t i = 0; i < precision_draw.size(); ++i) {
    const TaggedQuery& tq = pool[precision_draw[i]];
    PrecisionCase c;
    c.case_id = numbered_id("precision", i);
    c.session_id = tq.session->session_id;
    c.turn_index = tq.query->turn_index;
    c.query = tq.query->text;
    c.tags = tq.tags;
    out.precision.push_back(std::move(c));
  }

  // Consistency pool: tags in shuffled order; a tag carried by too few
  // queries is skipped with a warning and the walk continues.
  std::vector<const std::string*> tag_names;
  tag_names.reserve(tag_instructions.size());
  for (const auto& [tag, _] : tag_instructions) tag_names.push_back(&tag);
  const auto order = sample_indices(rng, tag_names.size(), tag_names.size());
  for (std::size_t pos : order) {
    if (out.consistency.size() == config.consistency_cases) break;
    const std::string& tag = *tag_names[pos];
    const std::vector<std::string>& instructions = tag_instructions[tag];
    if (instructions.size() < config.instructions_per_tag) {
      out.warnings.push_back("tag '" + tag + "' skipped: " +
                             std::to_string(instructions.size()) + " instruction(s), need " +
                             std::to_string(config.instructions_per_tag));
      continue;
    }
    ConsistencyCase c;
    c.case_id = numbered_id("consistency", out.consistency.size());
    c.tag = tag;
    if (instructions.size() == config.instructions_per_tag) {
      c.instructions = instructions;
    } else {
      auto picks = sample_indices(rng, instructions.size(), config.instructions_per_tag);
      std::sort(picks.begin(), picks.end());
      for (std::size_t p : picks) c.instructions.push_back(instructions[p]);
    }
    out.consistency.push_back(std::move(c));
  }
  if (out.consistency.size() < config.consistency_cases) {
    throw ArgumentError("sample_cases: only " + std::to_string(out.consistency.size()) +
                        " tags carry " + std::to_string(config.instructions_per_tag) +
                        "+ instructions, need " + std::to_string(config.consistency_cases));
  }
  return out;
}

CounterfactualCase make_precision_counterfactual(
    const PrecisionCase& original, const std::map<std::string, std::vector<double>>& vocabulary,
    std::mt19937_64& rng) {
  if (original.tags.empty()) {
    throw CaseSkipped("case " + original.case_id + " has no tags to perturb");
  }
  const std::size_t victim =
      static_cast<std::size_t>(uniform_below(rng, original.tags.size()));
  const std::string& replaced = original.tags[victim];
  auto anchor = vocabulary.find(replaced);
  if (anchor == vocabulary.end()) {
    throw CaseSkipped("case " + original.case_id + ": tag '" + replaced +
                      "' missing from vocabulary");
  }
  const std::set<std::string> present(original.tags.begin(), original.tags.end());
  // Nearest foreign tag; map order plus strict comparison makes ties resolve
  // to the lexicographically smallest candidate.
  const std::string* best = nullptr;
  double best_sim = -2.0;
  for (const auto& [tag, vec] : vocabulary) {
    if (present.count(tag)) continue;
    const double sim = cosine(anchor->second, vec);
    if (sim > best_sim) {
      best_sim = sim;
      best = &tag;
    }
  }
  if (best == nullptr) {
    throw CaseSkipped("case " + original.case_id + ": no replacement tag outside the query");
  }
  CounterfactualCase cf;
  cf.case_id = original.case_id + "-cf";
  cf.is_precision = true;
  cf.query = original.query;
  cf.tags = original.tags;
  cf.tags[victim] = *best;
  cf.perturbed_index = victim;
  return cf;
}

CounterfactualCase make_consistency_counterfactual(const ConsistencyCase& original,
                                                   const Dataset& corpus,
                                                   std::mt19937_64& rng) {
  if (original.instructions.empty()) {
    throw CaseSkipped("case " + original.case_id + " has no instructions to perturb");
  }
  std::vector<const std::string*> candidates;
  for (const Session& s : corpus.sessions) {
    for (const Query& q : s.queries) {
      auto tags = effective_tags(q);
      if (!tags) continue;  // unannotated: tag membership unknown
      if (std::find(tags->begin(), tags->end(), original.tag) != tags->end()) continue;
      candidates.push_back(&q.text);
    }
  }
  if (candidates.empty()) {
    throw CaseSkipped("case " + original.case_id + ": every annotated query carries '" +
                      original.tag + "'");
  }
  const std::size_t victim =
      static_cast<std::size_t>(uniform_below(rng, original.instructions.size()));
  const std::size_t pick = static_cast<std::size_t>(uniform_below(rng, candidates.size()));
  CounterfactualCase cf;
  cf.case_id = original.case_id + "-cf";
  cf.is_precision = false;
  cf.tag = original.tag;
  cf.instructions = original.instructions;
  cf.instructions[victim] = *candidates[pick];
  cf.perturbed_index = victim;
  return cf;
}

std::set<int> parse_judge_response(const std::string& raw) {
  std::optional<ParseFailure> first_shape_error;
  for (std::size_t pos = raw.find('['); pos != std::string::npos;
       pos = raw.find('[', pos + 1)) {
    const std::size_t end = find_json_array_end(raw, pos);
    if (end == std::string::npos) continue;
    ordered_json candidate = ordered_json::parse(raw.substr(pos, end - pos), nullptr, false);
    if (candidate.is_discarded() || !candidate.is_array()) continue;
    try {
      return validate_judge_array(candidate);
    } catch (const ParseFailure& e) {
      if (!first_shape_error) first_shape_error = e;
    }
  }
  if (first_shape_error) throw *first_shape_error;
  throw ParseFailure("no JSON index array found in judge response");
}

CounterfactualScore score_counterfactuals(
    const std::vector<CounterfactualCase>& cases,
    const std::function<std::set<int>(const CounterfactualCase&)>& judge) {
  CounterfactualScore score;
  score.cases = cases.size();
  for (const CounterfactualCase& c : cases) {
    const std::set<int> flagged = judge(c);
    if (flagged.count(static_cast<int>(c.perturbed_index))) ++score.detected;
  }
  score.detection_rate =
      score.cases == 0 ? 0.0 : static_cast<double>(score.detected) / score.cases;
  return score;
}

KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts) {
  if (counts.empty() || counts.front().empty()) {
    throw ArgumentError("fleiss_kappa: empty count matrix");
  }
  const std::size_t categories = counts.front().size();
  std::size_t raters = 0;
  for (std::size_t j = 0; j < categories; ++j) raters += counts.front()[j];
  if (raters < 2) throw ArgumentError("fleiss_kappa: need at least 2 raters");

  const double n = static_cast<double>(raters);
  const std::size_t items = counts.size();
  std::vector<double> category_mass(categories, 0.0);
  double observed_sum = 0.0;
  bool all_unanimous = true;
  for (std::size_t i = 0; i < items; ++i) {
    const auto& row = counts[i];
    if (row.size() != categories) {
      throw ArgumentError("fleiss_kappa: ragged count matrix at row " + std::to_string(i));
    }
    std::size_t row_sum = 0;
    std::size_t row_max = 0;
    double squares = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      row_sum += row[j];
      row_max = std::max(row_max, row[j]);
      squares += static_cast<double>(row[j]) * static_cast<double>(row[j]);
      category_mass[j] += static_cast<double>(row[j]);
    }
    if (row_sum != raters) {
      throw ArgumentError("fleiss_kappa: row " + std::to_string(i) + " sums to " +
                          std::to_string(row_sum) + ", expected " + std::to_string(raters));
    }
    if (row_max != raters) all_unanimous = false;
    observed_sum += (squares - n) / (n * (n - 1.0));
  }

  double expected = 0.0;
  const double total = n * static_cast<double>(items);
  for (std::size_t j = 0; j < categories; ++j) {
    const double p = category_mass[j] / total;
    expected += p * p;
  }
  if (expected >= 1.0 - 1e-12) {
    throw DegenerateAgreement("fleiss_kappa: expected agreement is 1 (single used category)");
  }
  KappaResult result;
  result.kind = KappaKind::fleiss;
  result.n_items = items;
  result.n_raters = raters;
  if (all_unanimous) {
    result.value = 1.0;
    return result;
  }
  const double observed = observed_sum / static_cast<double>(items);
  result.value = (observed - expected) / (1.0 - expected);
  return result;
}

KappaResult cohens_kappa(const std::vector<int>& rater_a, const std::vector<int>& rater_b) {
  if (rater_a.size() != rater_b.size()) {
    throw ArgumentError("cohens_kappa: label sequences differ in length");
  }
  if (rater_a.empty()) throw ArgumentError("cohens_kappa: no items");
  const double n = static_cast<double>(rater_a.size());
  std::map<int, std::size_t> marginal_a;
  std::map<int, std::size_t> marginal_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < rater_a.size(); ++i) {
    ++marginal_a[rater_a[i]];
    ++marginal_b[rater_b[i]];
    if (rater_a[i] == rater_b[i]) ++agree;
  }
  double expected = 0.0;
  for (const auto& [label, count_a] : marginal_a) {
    auto it = marginal_b.find(label);
    if (it == marginal_b.end()) continue;
    expected += (static_cast<double>(count_a) / n) * (static_cast<double>(it->second) / n);
  }
  if (expected >= 1.0 - 1e-12) {
    throw DegenerateAgreement("cohens_kappa: expected agreement is 1 (both raters constant)");
  }
  KappaResult result;
  result.kind = KappaKind::cohen;
  result.n_items = rater_a.size();
  result.n_raters = 2;
  if (agree == rater_a.size()) {
    result.value = 1.0;
    return result;
  }
  const double observed = static_cast<double>(agree) / n;
  result.value = (observed - expected) / (1.0 - expected);
  return result;
}

bool majority_vote(const std::vector<bool>& verdicts) {
  if (verdicts.size() < 3 || verdicts.size() % 2 == 0) {
    throw ArgumentError("majority_vote: need an odd number (>= 3) of verdicts");
  }
  std::size_t yes = 0;
  for (bool v : verdicts) {
    if (v) ++yes;
  }
  return yes * 2 > verdicts.size();
}

F1Result tag_f1_exact(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& gold) {
  const std::set<std::string> p(predicted.begin(), predicted.end());
  const std::set<std::string> g(gold.begin(), gold.end());
  if (p.empty() && g.empty()) return {1.0, 1.0, 1.0};
  if (p.empty() || g.empty()) return {0.0, 0.0, 0.0};
  std::size_t inter = 0;
  for (const std::string& t : p) inter += g.count(t);
  F1Result r;
  r.precision = static_cast<double>(inter) / static_cast<double>(p.size());
  r.recall = static_cast<double>(inter) / static_cast<double>(g.size());
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

F1Result tag_f1_fuzzy(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& gold, double threshold,
                      CachedEmbedder& embedder) {
  const std::set<std::string> p(predicted.begin(), predicted.end());
  const std::set<std::string> g(gold.begin(), gold.end());
  if (p.empty() && g.empty()) return {1.0, 1.0, 1.0};
  if (p.empty() || g.empty()) return {0.0, 0.0, 0.0};

  std::vector<std::string> all;
  all.insert(all.end(), p.begin(), p.end());
  for (const std::string& t : g) {
    if (!p.count(t)) all.push_back(t);
  }
  const auto embedded = embedder.embed(all);
  std::map<std::string, const std::vector<double>*> vectors;
  for (std::size_t i = 0; i < all.size(); ++i) vectors[all[i]] = &embedded[i];

  // Identical surface forms always match, independent of embedding rounding,
  // so fuzzy scores can never fall below exact scores for threshold <= 1.
  auto matches = [&](const std::string& a, const std::string& b) {
    if (a == b) return true;
    return cosine(*vectors.at(a), *vectors.at(b)) >= threshold;
  };
  std::size_t p_hit = 0;
  for (const std::string& t : p) {
    for (const std::string& o : g) {
      if (matches(t, o)) {
        ++p_hit;
        break;
      }
    }
  }
  std::size_t g_hit = 0;
  for (const std::string& t : g) {
    for (const std::string& o : p) {
      if (matches(t, o)) {
        ++g_hit;
        break;
      }
    }
  }
  F1Result r;
  r.precision = static_cast<double>(p_hit) / static_cast<double>(p.size());
  r.recall = static_cast<double>(g_hit) / static_cast<double>(g.size());
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<HumanJudgment> parse_human_annotations_csv(const std::string& content) {
  std::vector<HumanJudgment> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    auto fields = parse_csv_line(line, line_no);
    if (line_no == 1 && fields.size() == 3 && fields[0] == "case_id" &&
        fields[1] == "annotator_id" && fields[2] == "incorrect_indices") {
      continue;  // header
    }
    if (fields.size() != 3) {
      throw SchemaError("annotations line " + std::to_string(line_no) + ": expected 3 fields, got " +
                        std::to_string(fields.size()));
    }
    HumanJudgment j;
    j.case_id = trim(fields[0]);
    j.annotator_id = trim(fields[1]);
    if (j.case_id.empty() || j.annotator_id.empty()) {
      throw SchemaError("annotations line " + std::to_string(line_no) +
                        ": case_id and annotator_id must be non-empty");
    }
    std::size_t tok_start = 0;
    const std::string& idxs = fields[2];
    while (tok_start <= idxs.size()) {
      std::size_t tok_end = idxs.find(';', tok_start);
      if (tok_end == std::string::npos) tok_end = idxs.size();
      const std::string tok = trim(idxs.substr(tok_start, tok_end - tok_start));
      tok_start = tok_end + 1;
      if (tok.empty()) continue;
      std::size_t consumed = 0;
      int value = 0;
      try {
        value = std::stoi(tok, &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != tok.size() || value < 0) {
        throw SchemaError("annotations line " + std::to_string(line_no) +
                          ": bad index '" + tok + "'");
      }
      j.incorrect_indices.insert(value);
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::string human_annotations_to_csv(const std::vector<HumanJudgment>& judgments) {
  std::string out = "case_id,annotator_id,incorrect_indices\n";
  for (const HumanJudgment& j : judgments) {
    std::string idxs;
    for (int v : j.incorrect_indices) {
      if (!idxs.empty()) idxs += ";";
      idxs += std::to_string(v);
    }
    out += csv_escape(j.case_id) + "," + csv_escape(j.annotator_id) + "," + csv_escape(idxs) + "\n";
  }
  return out;
}

int judgment_to_binary(const std::set<int>& flagged) { return flagged.empty() ? 1 : 0; }

}  // namespace tagforge
