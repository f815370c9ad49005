#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tagforge/corpus.hpp"
#include "tagforge/evaluator.hpp"
#include "tagforge/normalizer.hpp"

namespace tagforge {

struct DatasetRef {
  std::string id;
  std::string path;
};

struct SelectionConfig {
  std::string mode = "complexity-first";  // complexity-first | complexity-series
                                          // | diversity-series | random
  std::size_t size = 0;
  std::size_t count = 1;        // complexity-series subset count
  std::vector<double> rates;    // diversity-series coverage targets
  double target_avg = 5.0;      // diversity-series average tag target
  double tolerance = 0.5;
};

struct PipelineConfig {
  std::vector<DatasetRef> datasets;
  std::string endpoint;             // chat + embeddings base URL
  std::string model = "instag-tagger";
  std::string judge_model;          // empty: fall back to `model`
  std::string embedder = "local";   // local | remote
  std::string embedding_model = "instag-embedding";
  std::size_t embedding_dim = 64;
  std::uint64_t embedding_seed = 1;
  std::uint64_t seed = 0;
  int parallelism = 4;
  int requests_per_minute = 600;
  int max_retries = 3;
  NormalizationConfig normalization;
  SelectionConfig selection;
  CaseSamplingConfig evaluation;    // evaluation.seed falls back to `seed`
  bool counterfactuals = true;
  std::string human_annotations;    // optional CSV of external judgments
  std::string out_dir = "out";
};

// Reads and validates the declarative JSON config. Unknown keys are fatal
// (they are always typos). Flags override fields after loading.
PipelineConfig load_pipeline_config(const std::string& path);

// Hash of the canonical config serialization; stamps every artifact.
std::string config_hash(const PipelineConfig& config);

struct StageOutcome {
  std::string stage;
  bool skipped = false;
  std::vector<std::string> outputs;  // paths relative to out_dir
  std::string summary;
};

// File-based stage runner over one output directory. manifest.json records
// the config hash plus each completed stage's outputs; every *.json report
// also carries the hash. A directory produced under a different config is
// refused unless `force`; completed stages are skipped unless `force`.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, bool force = false);

  StageOutcome ingest();          // pool corpora -> corpus.jsonl, prompt goldens
  StageOutcome annotate();        // query the tagging endpoint -> annotated.jsonl
  StageOutcome normalize();       // four-stage vocabulary cleanup -> normalized.jsonl
  StageOutcome analyze();         // metrics.csv, recall.csv, tag_frequencies.json
  StageOutcome select();          // subset sampling -> subset JSONL + report
  StageOutcome evaluate();        // judge protocol -> eval_report.json
  StageOutcome export_distill();  // distillation records -> distill.jsonl

  const PipelineConfig& config() const { return config_; }
  const std::string& hash() const { return hash_; }

 private:
  std::string path(const std::string& rel) const;
  bool stage_complete(const std::string& stage) const;
  void record(const std::string& stage, const std::vector<std::string>& outputs);
  void write_manifest() const;
  // Loads a stage artifact, failing with a remediation hint when absent.
  Dataset require_dataset(const std::string& rel, const std::string& dataset_id,
                          const std::string& producer_stage) const;
  std::string api_key() const;

  PipelineConfig config_;
  bool force_ = false;
  std::string hash_;
  std::map<std::string, std::vector<std::string>> stages_;  // stage -> outputs
};

}  // namespace tagforge
