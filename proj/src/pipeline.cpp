#include "tagforge/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "tagforge/chat_client.hpp"
#include "tagforge/error.hpp"
#include "tagforge/metrics.hpp"
#include "tagforge/prompts.hpp"
#include "tagforge/selector.hpp"
#include "tagforge/tagger.hpp"
#include "tagforge/util.hpp"

namespace tagforge {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw SchemaError("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

template <typename T>
T field(const ordered_json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string("config: field \"") + key + "\" has the wrong type");
  }
}

std::shared_ptr<EmbeddingProvider> build_provider(const PipelineConfig& config,
                                                  const std::string& api_key) {
  if (config.embedder == "local") {
    return std::make_shared<LocalNgramProvider>(config.embedding_dim, config.embedding_seed,
                                                /*parallel=*/true);
  }
  if (config.endpoint.empty()) {
    throw ArgumentError("remote embedder needs an endpoint: set config \"endpoint\" or --endpoint");
  }
  return std::make_shared<RemoteEmbeddingProvider>(config.endpoint, config.embedding_model,
                                                   api_key, config.embedding_dim,
                                                   config.max_retries);
}

// One judge request: a rendered prompt and the exclusive upper bound for
// flaggable indices (responses outside it are rejected and retried).
struct JudgeItem {
  std::string prompt;
  std::size_t n_indices = 0;
};

struct JudgeVerdict {
  bool ok = false;
  std::set<int> flagged;
  std::string error;
};

std::vector<JudgeVerdict> run_judges(ChatClient& client, const std::string& model,
                                     const std::vector<JudgeItem>& items, int parallelism) {
  std::vector<JudgeVerdict> verdicts(items.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, parallelism));

  auto run_one = [&](std::size_t index) {
    const JudgeItem& item = items[index];
    ChatRequest request{model, item.prompt};
    auto validate = [bound = item.n_indices](const std::string& content) {
      const std::set<int> flagged = parse_judge_response(content);
      if (!flagged.empty() && static_cast<std::size_t>(*flagged.rbegin()) >= bound) {
        throw ParseFailure("judge flagged index " + std::to_string(*flagged.rbegin()) +
                           " outside [0, " + std::to_string(bound) + ")");
      }
    };
    try {
      const std::string response = client.complete(request, validate);
      verdicts[index].flagged = parse_judge_response(response);
      verdicts[index].ok = true;
    } catch (const AuthError&) {
      throw;  // credential failures abort the whole stage
    } catch (const Error& e) {
      verdicts[index].error = e.what();
    }
  };

  for (std::size_t base = 0; base < items.size(); base += width) {
    const std::size_t batch = std::min(width, items.size() - base);
    if (batch == 1) {
      run_one(base);
      continue;
    }
    std::vector<std::thread> threads;
    std::exception_ptr auth_failure;
    std::mutex mu;
    for (std::size_t t = 0; t < batch; ++t) {
      threads.emplace_back([&, t] {
        try {
          run_one(base + t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!auth_failure) auth_failure = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    if (auth_failure) std::rethrow_exception(auth_failure);
  }
  return verdicts;
}

ordered_json flagged_to_json(const std::set<int>& flagged) {
  ordered_json arr = ordered_json::array();
  for (int v : flagged) arr.push_back(v);
  return arr;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  const std::string text = read_file(path);
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw SchemaError("config file is not a JSON object: " + path);
  }
  check_keys(j,
             {"datasets", "endpoint", "model", "judge_model", "embedder", "embedding_model",
              "embedding_dim", "embedding_seed", "seed", "parallelism", "requests_per_minute",
              "max_retries", "normalization", "selection", "evaluation", "counterfactuals",
              "human_annotations", "out_dir"},
             "top level");

  PipelineConfig config;
  if (j.contains("datasets")) {
    if (!j["datasets"].is_array()) throw SchemaError("config: \"datasets\" must be an array");
    for (const auto& d : j["datasets"]) {
      if (!d.is_object()) throw SchemaError("config: dataset entries must be objects");
      check_keys(d, {"id", "path"}, "datasets[]");
      DatasetRef ref;
      ref.id = field<std::string>(d, "id", "");
      ref.path = field<std::string>(d, "path", "");
      if (ref.id.empty() || ref.path.empty()) {
        throw SchemaError("config: dataset entries need non-empty \"id\" and \"path\"");
      }
      config.datasets.push_back(std::move(ref));
    }
  }
  config.endpoint = field<std::string>(j, "endpoint", config.endpoint);
  config.model = field<std::string>(j, "model", config.model);
  config.judge_model = field<std::string>(j, "judge_model", config.judge_model);
  config.embedder = field<std::string>(j, "embedder", config.embedder);
  config.embedding_model = field<std::string>(j, "embedding_model", config.embedding_model);
  config.embedding_dim = field<std::size_t>(j, "embedding_dim", config.embedding_dim);
  config.embedding_seed = field<std::uint64_t>(j, "embedding_seed", config.embedding_seed);
  config.seed = field<std::uint64_t>(j, "seed", config.seed);
  config.parallelism = field<int>(j, "parallelism", config.parallelism);
  config.requests_per_minute = field<int>(j, "requests_per_minute", config.requests_per_minute);
  config.max_retries = field<int>(j, "max_retries", config.max_retries);

  if (j.contains("normalization")) {
    const auto& n = j["normalization"];
    check_keys(n, {"alpha", "eps", "min_pts", "min_support", "min_confidence"}, "normalization");
    config.normalization.alpha = field<std::uint64_t>(n, "alpha", config.normalization.alpha);
    config.normalization.eps = field<double>(n, "eps", config.normalization.eps);
    config.normalization.min_pts = field<int>(n, "min_pts", config.normalization.min_pts);
    config.normalization.min_support =
        field<std::uint64_t>(n, "min_support", config.normalization.min_support);
    config.normalization.min_confidence =
        field<double>(n, "min_confidence", config.normalization.min_confidence);
  }
  if (j.contains("selection")) {
    const auto& s = j["selection"];
    check_keys(s, {"mode", "size", "count", "rates", "target_avg", "tolerance"}, "selection");
    config.selection.mode = field<std::string>(s, "mode", config.selection.mode);
    config.selection.size = field<std::size_t>(s, "size", config.selection.size);
    config.selection.count = field<std::size_t>(s, "count", config.selection.count);
    config.selection.rates = field<std::vector<double>>(s, "rates", config.selection.rates);
    config.selection.target_avg = field<double>(s, "target_avg", config.selection.target_avg);
    config.selection.tolerance = field<double>(s, "tolerance", config.selection.tolerance);
  }
  config.evaluation.seed = config.seed;
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    check_keys(e, {"precision_cases", "consistency_cases", "instructions_per_tag", "seed"},
               "evaluation");
    config.evaluation.precision_cases =
        field<std::size_t>(e, "precision_cases", config.evaluation.precision_cases);
    config.evaluation.consistency_cases =
        field<std::size_t>(e, "consistency_cases", config.evaluation.consistency_cases);
    config.evaluation.instructions_per_tag =
        field<std::size_t>(e, "instructions_per_tag", config.evaluation.instructions_per_tag);
    config.evaluation.seed = field<std::uint64_t>(e, "seed", config.evaluation.seed);
  }
  config.counterfactuals = field<bool>(j, "counterfactuals", config.counterfactuals);
  config.human_annotations = field<std::string>(j, "human_annotations", config.human_annotations);
  config.out_dir = field<std::string>(j, "out_dir", config.out_dir);

  static const std::set<std::string> kEmbedders = {"local", "remote"};
  if (!kEmbedders.count(config.embedder)) {
    throw SchemaError("config: embedder must be \"local\" or \"remote\", got \"" +
                      config.embedder + "\"");
  }
  static const std::set<std::string> kModes = {"complexity-first", "complexity-series",
                                               "diversity-series", "random"};
  if (!kModes.count(config.selection.mode)) {
    throw SchemaError("config: unknown selection mode \"" + config.selection.mode + "\"");
  }
  if (config.embedding_dim == 0) throw SchemaError("config: embedding_dim must be positive");
  if (config.parallelism < 1) throw SchemaError("config: parallelism must be >= 1");
  if (config.requests_per_minute < 1) {
    throw SchemaError("config: requests_per_minute must be >= 1");
  }
  if (config.max_retries < 0) throw SchemaError("config: max_retries must be >= 0");
  if (config.out_dir.empty()) throw SchemaError("config: out_dir must be non-empty");
  return config;
}

std::string config_hash(const PipelineConfig& config) {
  ordered_json j;
  j["datasets"] = ordered_json::array();
  for (const DatasetRef& d : config.datasets) {
    j["datasets"].push_back({{"id", d.id}, {"path", d.path}});
  }
  j["endpoint"] = config.endpoint;
  j["model"] = config.model;
  j["judge_model"] = config.judge_model;
  j["embedder"] = config.embedder;
  j["embedding_model"] = config.embedding_model;
  j["embedding_dim"] = config.embedding_dim;
  j["embedding_seed"] = config.embedding_seed;
  j["seed"] = config.seed;
  j["parallelism"] = config.parallelism;
  j["requests_per_minute"] = config.requests_per_minute;
  j["max_retries"] = config.max_retries;
  j["normalization"] = {{"alpha", config.normalization.alpha},
                        {"eps", config.normalization.eps},
                        {"min_pts", config.normalization.min_pts},
                        {"min_support", config.normalization.min_support},
                        {"min_confidence", config.normalization.min_confidence}};
  j["selection"] = {{"mode", config.selection.mode},
                    {"size", config.selection.size},
                    {"count", config.selection.count},
                    {"rates", config.selection.rates},
                    {"target_avg", config.selection.target_avg},
                    {"tolerance", config.selection.tolerance}};
  j["evaluation"] = {{"precision_cases", config.evaluation.precision_cases},
                     {"consistency_cases", config.evaluation.consistency_cases},
                     {"instructions_per_tag", config.evaluation.instructions_per_tag},
                     {"seed", config.evaluation.seed}};
  j["counterfactuals"] = config.counterfactuals;
  j["human_annotations"] = config.human_annotations;
  j["out_dir"] = config.out_dir;
  return sha256_hex(j.dump());
}

Pipeline::Pipeline(PipelineConfig config, bool force)
    : config_(std::move(config)), force_(force), hash_(config_hash(config_)) {
  std::error_code ec;
  fs::create_directories(config_.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + config_.out_dir);

  const std::string manifest_path = path("manifest.json");
  if (!fs::exists(manifest_path)) return;

  ordered_json m = ordered_json::parse(read_file(manifest_path), nullptr, false);
  const bool valid = !m.is_discarded() && m.is_object() && m.contains("config_hash") &&
                     m["config_hash"].is_string();
  if (!valid) {
    if (force_) return;  // stale records dropped; stages will rerun
    throw Error("corrupt manifest.json in " + config_.out_dir +
                "; rerun with --force to rebuild");
  }
  if (m["config_hash"].get<std::string>() != hash_) {
    if (force_) return;  // adopt the new config, invalidating old stage records
    throw Error("output directory " + config_.out_dir +
                " holds artifacts from a different config (hash mismatch); rerun with --force "
                "to overwrite");
  }
  if (m.contains("stages") && m["stages"].is_object()) {
    for (const auto& [stage, entry] : m["stages"].items()) {
      if (entry.is_object() && entry.contains("outputs")) {
        stages_[stage] = entry["outputs"].get<std::vector<std::string>>();
      }
    }
  }
}

std::string Pipeline::path(const std::string& rel) const {
  return (fs::path(config_.out_dir) / rel).string();
}

bool Pipeline::stage_complete(const std::string& stage) const {
  auto it = stages_.find(stage);
  if (it == stages_.end()) return false;
  for (const std::string& rel : it->second) {
    if (!fs::exists(path(rel))) return false;
  }
  return true;
}

void Pipeline::write_manifest() const {
  ordered_json m;
  m["config_hash"] = hash_;
  m["stages"] = ordered_json::object();
  for (const auto& [stage, outputs] : stages_) {
    m["stages"][stage] = {{"outputs", outputs}};
  }
  write_file(path("manifest.json"), m.dump(2) + "\n");
}

void Pipeline::record(const std::string& stage, const std::vector<std::string>& outputs) {
  stages_[stage] = outputs;
  write_manifest();
}

Dataset Pipeline::require_dataset(const std::string& rel, const std::string& dataset_id,
                                  const std::string& producer_stage) const {
  const std::string full = path(rel);
  if (!fs::exists(full)) {
    throw Error("missing " + rel + " in " + config_.out_dir + "; run `tagforge " +
                producer_stage + "` first");
  }
  LoadResult loaded = load_dataset(full, dataset_id);
  if (!loaded.errors.empty()) {
    throw Error("corrupt stage artifact " + rel + ": line " +
                std::to_string(loaded.errors.front().line_number) + ": " +
                loaded.errors.front().message);
  }
  return std::move(loaded.dataset);
}

std::string Pipeline::api_key() const {
  const char* key = std::getenv("INSTAG_API_KEY");
  return key == nullptr ? std::string() : std::string(key);
}

StageOutcome Pipeline::ingest() {
  StageOutcome out;
  out.stage = "ingest";
  if (!force_ && stage_complete("ingest")) {
    out.skipped = true;
    out.outputs = stages_.at("ingest");
    out.summary = "ingest already complete; skipped (use --force to redo)";
    return out;
  }
  if (config_.datasets.empty()) {
    throw ArgumentError("config lists no datasets to ingest");
  }

  ordered_json report;
  report["config_hash"] = hash_;
  report["datasets"] = ordered_json::array();
  std::vector<Dataset> loaded;
  std::size_t total_queries = 0;
  for (const DatasetRef& ref : config_.datasets) {
    LoadResult result = load_dataset(ref.path, ref.id);
    std::size_t queries = 0;
    for (const Session& s : result.dataset.sessions) queries += s.queries.size();
    total_queries += queries;
    ordered_json entry;
    entry["id"] = ref.id;
    entry["path"] = ref.path;
    entry["sessions"] = result.dataset.sessions.size();
    entry["queries"] = queries;
    entry["malformed_lines"] = result.errors.size();
    ordered_json errs = ordered_json::array();
    const std::size_t limit = std::min<std::size_t>(result.errors.size(), 20);
    for (std::size_t i = 0; i < limit; ++i) {
      errs.push_back({{"line", result.errors[i].line_number},
                      {"message", result.errors[i].message}});
    }
    entry["line_errors"] = std::move(errs);
    report["datasets"].push_back(std::move(entry));
    loaded.push_back(std::move(result.dataset));
  }

  Dataset pool = pool_datasets(loaded, "pool");
  save_dataset(pool, path("corpus.jsonl"));
  report["pool"] = {{"sessions", pool.sessions.size()}, {"queries", total_queries}};
  write_file(path("ingest_report.json"), report.dump(2) + "\n");

  // Golden copies of every prompt template the pipeline will send.
  fs::create_directories(fs::path(config_.out_dir) / "prompts");
  write_file(path("prompts/tagging.txt"), prompts::tagging_template());
  write_file(path("prompts/judge_precision.txt"), prompts::precision_judge_template());
  write_file(path("prompts/judge_consistency.txt"), prompts::consistency_judge_template());
  write_file(path("prompts/distill.txt"), prompts::distill_template());

  out.outputs = {"corpus.jsonl",
                 "ingest_report.json",
                 "prompts/tagging.txt",
                 "prompts/judge_precision.txt",
                 "prompts/judge_consistency.txt",
                 "prompts/distill.txt"};
  out.summary = "pooled " + std::to_string(config_.datasets.size()) + " dataset(s) into " +
                std::to_string(pool.sessions.size()) + " sessions (" +
                std::to_string(total_queries) + " queries)";
  record("ingest", out.outputs);
  return out;
}

StageOutcome Pipeline::annotate() {
  StageOutcome out;
  out.stage = "annotate";
  if (!force_ && stage_complete("annotate")) {
    out.skipped = true;
    out.outputs = stages_.at("annotate");
    out.summary = "annotate already complete; skipped (use --force to redo)";
    return out;
  }
  if (config_.endpoint.empty()) {
    throw ArgumentError("annotation needs an endpoint: set config \"endpoint\" or --endpoint");
  }

  Dataset corpus = require_dataset("corpus.jsonl", "pool", "ingest");

  auto transport = std::make_shared<HttpChatTransport>(config_.endpoint, api_key());
  auto limiter = std::make_shared<RateLimiter>(config_.requests_per_minute);
  RetryPolicy policy;
  policy.max_retries = config_.max_retries;
  ChatClient client(transport, policy, limiter);

  AnnotationJob job;
  job.model_name = config_.model;
  job.parallelism = config_.parallelism;
  job.max_retries = config_.max_retries;
  job.requests_per_minute = config_.requests_per_minute;
  job.cache_path = path("annotation_cache.jsonl");

  const AnnotationReport report = annotate_dataset(corpus, job, client);
  save_dataset(corpus, path("annotated.jsonl"));

  ordered_json rj;
  rj["config_hash"] = hash_;
  rj["model"] = config_.model;
  rj["annotated_queries"] = report.annotated_queries;
  rj["cache_hits"] = report.cache_hits;
  rj["requests_attempted"] = report.requests_attempted;
  rj["missing_explanations"] = report.missing_explanations;
  rj["failures"] = ordered_json::array();
  for (const AnnotationFailure& f : report.failures) {
    rj["failures"].push_back(
        {{"session", f.session_id}, {"turn", f.turn_index}, {"error", f.error}});
  }
  write_file(path("annotate_report.json"), rj.dump(2) + "\n");

  out.outputs = {"annotated.jsonl", "annotate_report.json"};
  out.summary = "annotated " + std::to_string(report.annotated_queries) + " queries (" +
                std::to_string(report.cache_hits) + " from cache, " +
                std::to_string(report.failures.size()) + " failures)";
  record("annotate", out.outputs);
  return out;
}

StageOutcome Pipeline::normalize() {
  StageOutcome out;
  out.stage = "normalize";
  if (!force_ && stage_complete("normalize")) {
    out.skipped = true;
    out.outputs = stages_.at("normalize");
    out.summary = "normalize already complete; skipped (use --force to redo)";
    return out;
  }

  Dataset annotated = require_dataset("annotated.jsonl", "pool", "annotate");
  CachedEmbedder embedder(build_provider(config_, api_key()), path("embedding_cache.jsonl"));
  NormalizeResult result = tagforge::normalize(annotated, config_.normalization, embedder);

  save_dataset(result.dataset, path("normalized.jsonl"));

  ordered_json mapping = ordered_json::parse(mapping_to_json(result.tag_mapping));
  ordered_json stamped;
  stamped["config_hash"] = hash_;
  for (const auto& [key, value] : mapping.items()) stamped[key] = value;
  write_file(path("mapping.json"), stamped.dump(2) + "\n");

  ordered_json rj;
  rj["config_hash"] = hash_;
  rj["stage_sizes"] = ordered_json::array();
  for (const auto& [stage, size] : result.stage_sizes) {
    rj["stage_sizes"].push_back({{"stage", stage}, {"vocabulary", size}});
  }
  rj["rules_mined"] = result.tag_mapping.rules.size();
  rj["queries_with_empty_tags"] = result.queries_with_empty_tags;
  rj["embedding_cache_hits"] = embedder.cache_hits();
  rj["embedding_cache_misses"] = embedder.cache_misses();
  write_file(path("normalize_report.json"), rj.dump(2) + "\n");

  std::string sizes;
  for (const auto& [stage, size] : result.stage_sizes) {
    if (!sizes.empty()) sizes += " -> ";
    sizes += std::to_string(size);
  }
  out.outputs = {"normalized.jsonl", "mapping.json", "normalize_report.json"};
  out.summary = "vocabulary " + sizes + " across stages";
  record("normalize", out.outputs);
  return out;
}

StageOutcome Pipeline::analyze() {
  StageOutcome out;
  out.stage = "analyze";
  if (!force_ && stage_complete("analyze")) {
    out.skipped = true;
    out.outputs = stages_.at("analyze");
    out.summary = "analyze already complete; skipped (use --force to redo)";
    return out;
  }

  Dataset pool = require_dataset("normalized.jsonl", "pool", "normalize");

  // Split the pool back into its source datasets, in first-seen order.
  std::vector<Dataset> sources;
  std::map<std::string, std::size_t> index;
  for (const Session& s : pool.sessions) {
    auto [it, inserted] = index.emplace(s.dataset_id, sources.size());
    if (inserted) {
      Dataset d;
      d.dataset_id = s.dataset_id;
      sources.push_back(std::move(d));
    }
    sources[it->second].sessions.push_back(s);
  }

  const std::size_t vocabulary = dataset_tag_set(pool).size();
  std::vector<DatasetMetrics> rows;
  for (const Dataset& d : sources) rows.push_back(compute_metrics(d, vocabulary));
  rows.push_back(compute_metrics(pool, vocabulary));

  write_file(path("metrics.csv"), metrics_to_csv(rows));
  out.outputs = {"metrics.csv"};

  if (sources.size() >= 2) {
    write_file(path("recall.csv"), recall_to_csv(recall_matrix(sources)));
    out.outputs.push_back("recall.csv");
  }

  ordered_json freq;
  freq["config_hash"] = hash_;
  freq["frequencies"] = ordered_json::parse(frequencies_to_json(normalized_tag_frequencies(pool)));
  write_file(path("tag_frequencies.json"), freq.dump(2) + "\n");
  out.outputs.push_back("tag_frequencies.json");

  out.summary = "analyzed " + std::to_string(sources.size()) + " dataset(s), vocabulary " +
                std::to_string(vocabulary) +
                (sources.size() < 2 ? " (recall matrix needs >= 2 datasets; skipped)" : "");
  record("analyze", out.outputs);
  return out;
}

StageOutcome Pipeline::select() {
  StageOutcome out;
  out.stage = "select";
  if (!force_ && stage_complete("select")) {
    out.skipped = true;
    out.outputs = stages_.at("select");
    out.summary = "select already complete; skipped (use --force to redo)";
    return out;
  }
  if (config_.selection.size == 0) {
    throw ArgumentError("selection size must be positive: set selection.size or --size");
  }

  Dataset pool = require_dataset("normalized.jsonl", "pool", "normalize");

  std::vector<Selection> selections;
  const SelectionConfig& sel = config_.selection;
  if (sel.mode == "complexity-first") {
    selections.push_back(complexity_first_sample(pool, sel.size));
  } else if (sel.mode == "complexity-series") {
    selections = complexity_series_sample(pool, sel.size, sel.count);
  } else if (sel.mode == "diversity-series") {
    if (sel.rates.empty()) {
      throw ArgumentError("diversity-series needs selection.rates");
    }
    selections = diversity_series_sample(pool, sel.size, sel.rates, sel.target_avg,
                                         sel.tolerance);
  } else {  // random — the config loader rejects anything else
    selections.push_back(random_sample(pool, sel.size, config_.seed));
  }

  ordered_json report;
  report["config_hash"] = hash_;
  report["mode"] = sel.mode;
  report["subsets"] = ordered_json::array();
  const bool series = selections.size() > 1;
  for (std::size_t i = 0; i < selections.size(); ++i) {
    const std::string file = series ? "subset-" + std::to_string(i) + ".jsonl" : "subset.jsonl";
    save_dataset(selections[i].subset, path(file));
    out.outputs.push_back(file);
    const SelectionReport& r = selections[i].report;
    ordered_json entry;
    entry["file"] = file;
    entry["sessions"] = selections[i].subset.sessions.size();
    entry["coverage"] = r.coverage;
    entry["avg_tags"] = r.avg_tags;
    entry["passes"] = r.passes;
    entry["warnings"] = r.warnings;
    entry["selected_session_ids"] = r.selected_session_ids;
    report["subsets"].push_back(std::move(entry));
  }
  write_file(path("selection_report.json"), report.dump(2) + "\n");
  out.outputs.push_back("selection_report.json");

  out.summary = sel.mode + " selected " + std::to_string(selections.size()) + " subset(s) of " +
                std::to_string(sel.size) + " sessions";
  record("select", out.outputs);
  return out;
}

StageOutcome Pipeline::evaluate() {
  StageOutcome out;
  out.stage = "evaluate";
  if (!force_ && stage_complete("evaluate")) {
    out.skipped = true;
    out.outputs = stages_.at("evaluate");
    out.summary = "evaluate already complete; skipped (use --force to redo)";
    return out;
  }
  if (config_.endpoint.empty()) {
    throw ArgumentError("evaluation needs an endpoint: set config \"endpoint\" or --endpoint");
  }

  Dataset pool = require_dataset("normalized.jsonl", "pool", "normalize");
  const EvalCases cases = sample_cases(pool, config_.evaluation);
  const std::string judge_model =
      config_.judge_model.empty() ? config_.model : config_.judge_model;

  auto transport = std::make_shared<HttpChatTransport>(config_.endpoint, api_key());
  auto limiter = std::make_shared<RateLimiter>(config_.requests_per_minute);
  RetryPolicy policy;
  policy.max_retries = config_.max_retries;
  ChatClient client(transport, policy, limiter);

  ordered_json cases_json;
  cases_json["config_hash"] = hash_;
  cases_json["warnings"] = cases.warnings;
  ordered_json report;
  report["config_hash"] = hash_;
  report["judge_model"] = judge_model;

  // Model verdicts per case id (binary, only for successfully judged cases),
  // for the agreement table against human labels.
  std::map<std::string, int> model_binary;

  auto judge_block = [&](const char* name, std::vector<JudgeItem> items,
                         const std::vector<const std::string*>& ids,
                         auto&& case_to_json) {
    const auto verdicts = run_judges(client, judge_model, items, config_.parallelism);
    std::size_t correct = 0;
    std::size_t failures = 0;
    ordered_json arr = ordered_json::array();
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      ordered_json cj = case_to_json(i);
      if (verdicts[i].ok) {
        cj["flagged"] = flagged_to_json(verdicts[i].flagged);
        cj["correct"] = verdicts[i].flagged.empty();
        if (verdicts[i].flagged.empty()) ++correct;
        model_binary[*ids[i]] = judgment_to_binary(verdicts[i].flagged);
      } else {
        cj["flagged"] = nullptr;
        cj["correct"] = nullptr;
        cj["error"] = verdicts[i].error;
        ++failures;
      }
      arr.push_back(std::move(cj));
    }
    cases_json[name] = std::move(arr);
    const std::size_t judged = verdicts.size() - failures;
    ordered_json stats;
    stats["cases"] = verdicts.size();
    stats["judged"] = judged;
    stats["judged_correct"] = correct;
    stats["accuracy"] =
        judged == 0 ? ordered_json(nullptr)
                    : ordered_json(static_cast<double>(correct) / static_cast<double>(judged));
    stats["parse_failures"] = failures;
    return stats;
  };

  {
    std::vector<JudgeItem> items;
    std::vector<const std::string*> ids;
    for (const PrecisionCase& c : cases.precision) {
      items.push_back({prompts::render_precision_prompt(c.query, c.tags), c.tags.size()});
      ids.push_back(&c.case_id);
    }
    report["precision"] = judge_block("precision", std::move(items), ids, [&](std::size_t i) {
      const PrecisionCase& c = cases.precision[i];
      ordered_json cj;
      cj["case_id"] = c.case_id;
      cj["session_id"] = c.session_id;
      cj["turn_index"] = c.turn_index;
      cj["query"] = c.query;
      cj["tags"] = c.tags;
      return cj;
    });
  }
  {
    std::vector<JudgeItem> items;
    std::vector<const std::string*> ids;
    for (const ConsistencyCase& c : cases.consistency) {
      items.push_back(
          {prompts::render_consistency_prompt(c.tag, c.instructions), c.instructions.size()});
      ids.push_back(&c.case_id);
    }
    report["consistency"] =
        judge_block("consistency", std::move(items), ids, [&](std::size_t i) {
          const ConsistencyCase& c = cases.consistency[i];
          ordered_json cj;
          cj["case_id"] = c.case_id;
          cj["tag"] = c.tag;
          cj["instructions"] = c.instructions;
          return cj;
        });
  }

  std::vector<std::string> warnings = cases.warnings;

  if (config_.counterfactuals) {
    // Counterfactual draws use a dedicated stream (evaluation seed + 1) so
    // case sampling and perturbation stay independently reproducible.
    std::mt19937_64 cf_rng(config_.evaluation.seed + 1);

    std::vector<std::string> vocab_list;
    for (const std::string& t : dataset_tag_set(pool)) vocab_list.push_back(t);
    CachedEmbedder embedder(build_provider(config_, api_key()), path("embedding_cache.jsonl"));
    std::map<std::string, std::vector<double>> vocabulary;
    if (!vocab_list.empty()) {
      const auto vectors = embedder.embed(vocab_list);
      for (std::size_t i = 0; i < vocab_list.size(); ++i) {
        vocabulary[vocab_list[i]] = vectors[i];
      }
    }

    auto build_cf = [&](auto&& make) {
      std::pair<std::vector<CounterfactualCase>, std::size_t> result;
      result.second = 0;
      for (std::size_t i = 0; i < make.count; ++i) {
        try {
          result.first.push_back(make.build(i, cf_rng));
        } catch (const CaseSkipped& e) {
          ++result.second;
          if (result.second <= 5) warnings.push_back(e.what());
        }
      }
      return result;
    };

    struct PrecisionMaker {
      const std::vector<PrecisionCase>& cases;
      const std::map<std::string, std::vector<double>>& vocabulary;
      std::size_t count;
      CounterfactualCase build(std::size_t i, std::mt19937_64& rng) const {
        return make_precision_counterfactual(cases[i], vocabulary, rng);
      }
    };
    struct ConsistencyMaker {
      const std::vector<ConsistencyCase>& cases;
      const Dataset& pool;
      std::size_t count;
      CounterfactualCase build(std::size_t i, std::mt19937_64& rng) const {
        return make_consistency_counterfactual(cases[i], pool, rng);
      }
    };

    auto [cf_precision, skipped_p] =
        build_cf(PrecisionMaker{cases.precision, vocabulary, cases.precision.size()});
    auto [cf_consistency, skipped_c] =
        build_cf(ConsistencyMaker{cases.consistency, pool, cases.consistency.size()});

    auto judge_cf = [&](const char* name, const std::vector<CounterfactualCase>& cf,
                        std::size_t skipped) {
      std::vector<JudgeItem> items;
      for (const CounterfactualCase& c : cf) {
        if (c.is_precision) {
          items.push_back({prompts::render_precision_prompt(c.query, c.tags), c.tags.size()});
        } else {
          items.push_back({prompts::render_consistency_prompt(c.tag, c.instructions),
                           c.instructions.size()});
        }
      }
      const auto verdicts = run_judges(client, judge_model, items, config_.parallelism);
      std::size_t detected = 0;
      std::size_t correct = 0;
      std::size_t failures = 0;
      ordered_json arr = ordered_json::array();
      for (std::size_t i = 0; i < cf.size(); ++i) {
        ordered_json cj;
        cj["case_id"] = cf[i].case_id;
        cj["perturbed_index"] = cf[i].perturbed_index;
        if (cf[i].is_precision) {
          cj["tags"] = cf[i].tags;
        } else {
          cj["instructions"] = cf[i].instructions;
        }
        if (verdicts[i].ok) {
          cj["flagged"] = flagged_to_json(verdicts[i].flagged);
          const bool hit =
              verdicts[i].flagged.count(static_cast<int>(cf[i].perturbed_index)) > 0;
          cj["detected"] = hit;
          if (hit) ++detected;
          if (verdicts[i].flagged.empty()) ++correct;
        } else {
          cj["flagged"] = nullptr;
          cj["detected"] = nullptr;
          cj["error"] = verdicts[i].error;
          ++failures;
        }
        arr.push_back(std::move(cj));
      }
      cases_json[name] = std::move(arr);
      const std::size_t judged = cf.size() - failures;
      ordered_json stats;
      stats["cases"] = cf.size();
      stats["skipped"] = skipped;
      stats["judged"] = judged;
      stats["detected"] = detected;
      stats["detection_rate"] =
          judged == 0 ? ordered_json(nullptr)
                      : ordered_json(static_cast<double>(detected) / static_cast<double>(judged));
      stats["judged_correct"] = correct;
      stats["judged_correct_rate"] =
          judged == 0 ? ordered_json(nullptr)
                      : ordered_json(static_cast<double>(correct) / static_cast<double>(judged));
      stats["parse_failures"] = failures;
      return stats;
    };

    ordered_json cf_stats;
    cf_stats["precision"] = judge_cf("counterfactual_precision", cf_precision, skipped_p);
    cf_stats["consistency"] = judge_cf("counterfactual_consistency", cf_consistency, skipped_c);
    report["counterfactual"] = std::move(cf_stats);
  } else {
    report["counterfactual"] = nullptr;
  }

  if (!config_.human_annotations.empty()) {
    const auto judgments = parse_human_annotations_csv(read_file(config_.human_annotations));
    auto agreement_for = [&](const std::string& prefix) -> ordered_json {
      // case -> annotator -> binary verdict, for cases of this kind that the
      // model judged successfully.
      std::map<std::string, std::map<std::string, int>> by_case;
      std::set<std::string> annotators;
      for (const HumanJudgment& j : judgments) {
        if (j.case_id.rfind(prefix, 0) != 0) continue;
        if (!model_binary.count(j.case_id)) continue;
        by_case[j.case_id][j.annotator_id] = judgment_to_binary(j.incorrect_indices);
        annotators.insert(j.annotator_id);
      }
      if (annotators.size() < 2) {
        warnings.push_back("agreement(" + prefix + "): need >= 2 human annotators, have " +
                           std::to_string(annotators.size()));
        return nullptr;
      }
      std::vector<std::string> items;
      for (const auto& [case_id, votes] : by_case) {
        if (votes.size() == annotators.size()) items.push_back(case_id);
      }
      if (items.empty()) {
        warnings.push_back("agreement(" + prefix + "): no case rated by every annotator");
        return nullptr;
      }
      ordered_json block;
      block["items"] = items.size();
      block["annotators"] = annotators.size();

      std::vector<std::vector<std::size_t>> counts;
      for (const std::string& id : items) {
        std::size_t positive = 0;
        for (const auto& [annotator, verdict] : by_case[id]) positive += verdict;
        counts.push_back({positive, annotators.size() - positive});
      }
      try {
        block["fleiss_humans"] = fleiss_kappa(counts).value;
      } catch (const DegenerateAgreement& e) {
        block["fleiss_humans"] = nullptr;
        warnings.push_back("agreement(" + prefix + "): " + e.what());
      }

      if (annotators.size() >= 3 && annotators.size() % 2 == 1) {
        std::vector<int> model_labels;
        std::vector<int> majority_labels;
        for (const std::string& id : items) {
          std::vector<bool> votes;
          for (const auto& [annotator, verdict] : by_case[id]) votes.push_back(verdict == 1);
          majority_labels.push_back(majority_vote(votes) ? 1 : 0);
          model_labels.push_back(model_binary.at(id));
        }
        try {
          block["cohen_model_vs_majority"] = cohens_kappa(model_labels, majority_labels).value;
        } catch (const DegenerateAgreement& e) {
          block["cohen_model_vs_majority"] = nullptr;
          warnings.push_back("agreement(" + prefix + "): " + e.what());
        }
      } else {
        block["cohen_model_vs_majority"] = nullptr;
        warnings.push_back("agreement(" + prefix +
                           "): majority vote needs an odd annotator count >= 3");
      }
      return block;
    };
    ordered_json agreement;
    agreement["precision"] = agreement_for("precision-");
    agreement["consistency"] = agreement_for("consistency-");
    report["agreement"] = std::move(agreement);
  } else {
    report["agreement"] = nullptr;
  }

  report["warnings"] = warnings;
  write_file(path("eval_cases.json"), cases_json.dump(2) + "\n");
  write_file(path("eval_report.json"), report.dump(2) + "\n");

  out.outputs = {"eval_cases.json", "eval_report.json"};
  out.summary = "judged " + std::to_string(cases.precision.size()) + " precision and " +
                std::to_string(cases.consistency.size()) + " consistency cases";
  record("evaluate", out.outputs);
  return out;
}

StageOutcome Pipeline::export_distill() {
  StageOutcome out;
  out.stage = "export-distill";
  if (!force_ && stage_complete("export-distill")) {
    out.skipped = true;
    out.outputs = stages_.at("export-distill");
    out.summary = "export-distill already complete; skipped (use --force to redo)";
    return out;
  }

  Dataset pool = require_dataset("normalized.jsonl", "pool", "normalize");
  const std::string mapping_path = path("mapping.json");
  if (!fs::exists(mapping_path)) {
    throw Error("missing mapping.json in " + config_.out_dir + "; run `tagforge normalize` first");
  }
  const TagMapping mapping = mapping_from_json(read_file(mapping_path));

  std::string lines;
  std::size_t records = 0;
  std::size_t missing_explanations = 0;
  std::size_t queries_affected = 0;
  for (const Session& s : pool.sessions) {
    for (const Query& q : s.queries) {
      if (!q.normalized_tags) continue;
      // Pair each normalized tag with the explanation of the first raw
      // annotation that maps onto it.
      std::vector<TagAnnotation> annotations;
      bool missing_here = false;
      for (const std::string& tag : *q.normalized_tags) {
        TagAnnotation ann;
        ann.tag = tag;
        if (q.raw_tags) {
          for (const TagAnnotation& raw : *q.raw_tags) {
            auto it = mapping.mapping.find(trim(raw.tag));
            if (it != mapping.mapping.end() && it->second && *it->second == tag &&
                !raw.explanation.empty()) {
              ann.explanation = raw.explanation;
              break;
            }
          }
        }
        if (ann.explanation.empty()) {
          ++missing_explanations;
          missing_here = true;
        }
        annotations.push_back(std::move(ann));
      }
      if (missing_here) ++queries_affected;
      ordered_json record;
      record["text"] = prompts::render_distill_text(q.text, annotations);
      lines += record.dump();
      lines += '\n';
      ++records;
    }
  }
  write_file(path("distill.jsonl"), lines);

  ordered_json rj;
  rj["config_hash"] = hash_;
  rj["records"] = records;
  rj["missing_explanations"] = missing_explanations;
  rj["queries_affected"] = queries_affected;
  write_file(path("export_report.json"), rj.dump(2) + "\n");

  out.outputs = {"distill.jsonl", "export_report.json"};
  out.summary = "wrote " + std::to_string(records) + " distillation records (" +
                std::to_string(missing_explanations) + " missing explanations)";
  record("export-distill", out.outputs);
  return out;
}

}  // namespace tagforge
