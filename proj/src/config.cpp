#include "llmvs/config.hpp"

#include "llmvs/dataset.hpp"
#include "llmvs/error.hpp"
#include "llmvs/hash.hpp"

#include <json.hpp>

#include <set>

namespace llmvs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads keys from a JSON object and rejects any it never asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key " + where_ + "." + k);
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_backend(const json& j, const std::string& where, BackendConfig& b) {
  Reader r(j, where);
  r.get("endpoint", b.endpoint);
  r.get("model", b.model);
  r.get("timeout_seconds", b.timeout_seconds);
  r.get("max_retries", b.max_retries);
  r.get("max_answer_tokens", b.max_answer_tokens);
  r.get("temperature", b.temperature);
  std::string pos = to_string(b.extraction_position);
  r.get("embedding_position", pos);
  b.extraction_position = extraction_position_from_string(pos);
  r.get("caption_token_cap", b.caption_token_cap);
  r.get("max_in_flight", b.max_in_flight);
  r.finish();
}

json write_backend(const BackendConfig& b) {
  return json{{"endpoint", b.endpoint},
              {"model", b.model},
              {"timeout_seconds", b.timeout_seconds},
              {"max_retries", b.max_retries},
              {"max_answer_tokens", b.max_answer_tokens},
              {"temperature", b.temperature},
              {"embedding_position", to_string(b.extraction_position)},
              {"caption_token_cap", b.caption_token_cap},
              {"max_in_flight", b.max_in_flight}};
}

void read_aggregator(const json& j, AggregatorConfig& a) {
  Reader r(j, "aggregator");
  r.get("projection_width", a.projection_width);
  r.get("num_blocks", a.num_blocks);
  r.get("num_heads", a.num_heads);
  r.get("ffn_width", a.ffn_width);
  r.get("use_query", a.use_query);
  r.get("use_answer", a.use_answer);
  std::string pe = to_string(a.positional_encoding), head = to_string(a.head);
  r.get("positional_encoding", pe);
  r.get("head", head);
  a.positional_encoding = positional_encoding_from_string(pe);
  a.head = head_kind_from_string(head);
  r.get("pool_hidden_layer", a.pool_hidden_layer);
  r.get("layer_norm_epsilon", a.layer_norm_epsilon);
  r.get("learning_rate", a.learning_rate);
  r.get("weight_decay", a.weight_decay);
  r.get("beta1", a.beta1);
  r.get("beta2", a.beta2);
  r.get("adam_epsilon", a.adam_epsilon);
  r.get("epochs", a.epochs);
  r.finish();
}

json write_aggregator(const AggregatorConfig& a) {
  return json{{"projection_width", a.projection_width},
              {"num_blocks", a.num_blocks},
              {"num_heads", a.num_heads},
              {"ffn_width", a.ffn_width},
              {"use_query", a.use_query},
              {"use_answer", a.use_answer},
              {"positional_encoding", to_string(a.positional_encoding)},
              {"head", to_string(a.head)},
              {"pool_hidden_layer", a.pool_hidden_layer},
              {"layer_norm_epsilon", a.layer_norm_epsilon},
              {"learning_rate", a.learning_rate},
              {"weight_decay", a.weight_decay},
              {"beta1", a.beta1},
              {"beta2", a.beta2},
              {"adam_epsilon", a.adam_epsilon},
              {"epochs", a.epochs}};
}

void read_evaluation(const json& j, EvalOptions& e) {
  Reader r(j, "evaluation");
  std::string protocol = to_string(e.summe_protocol);
  r.get("averaged_summary_protocol", protocol);
  e.summe_protocol = summe_protocol_from_string(protocol);
  if (const json* k = r.child("kts")) {
    Reader kr(*k, "evaluation.kts");
    kr.get("max_segments", e.kts.max_segments);
    kr.get("penalty", e.kts.penalty);
    std::string kernel = to_string(e.kts.kernel);
    kr.get("kernel", kernel);
    e.kts.kernel = kts_kernel_from_string(kernel);
    kr.get("rbf_sigma", e.kts.rbf_sigma);
    kr.finish();
  }
  r.finish();
}

json write_evaluation(const EvalOptions& e) {
  return json{{"averaged_summary_protocol", to_string(e.summe_protocol)},
              {"kts",
               {{"max_segments", e.kts.max_segments},
                {"penalty", e.kts.penalty},
                {"kernel", to_string(e.kts.kernel)},
                {"rbf_sigma", e.kts.rbf_sigma}}}};
}

}  // namespace

void RunConfig::validate(bool check_paths) const {
  if (window < 3 || window % 2 == 0) throw ConfigError("window must be odd and >= 3");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  try {
    captioner.validate();
    scorer.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("backend config: ") + e.what());
  }
  aggregator.validate();
  if (!(evaluation.kts.penalty >= 0.0)) throw ConfigError("KTS penalty must be >= 0");
  if (evaluation.kts.max_segments < 1) throw ConfigError("KTS max_segments must be >= 1");
  if (!(evaluation.kts.rbf_sigma > 0.0)) throw ConfigError("KTS rbf_sigma must be > 0");
  if (!check_paths) return;
  auto must_exist = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
  };
  if (dataset.empty()) throw ConfigError("no dataset configured");
  must_exist(dataset, "dataset");
  if (prompt_template) must_exist(*prompt_template, "prompt template");
  if (fold_file) must_exist(*fold_file, "fold file");
  if (mock_fixture) must_exist(*mock_fixture, "mock fixture");
}

RunConfig default_run_config() {
  RunConfig c;
  c.aggregator.seed = c.seed;
  return c;
}

RunConfig parse_run_config(const std::string& text, const fs::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = default_run_config();
  Reader r(j, "config");
  std::string dataset, output, templ, fixture, fold_file, style = to_string(c.caption_style);
  r.get("dataset", dataset);
  r.get("output_dir", output);
  r.get("seed", c.seed);
  r.get("window", c.window);
  r.get("folds", c.folds);
  r.get("fold_file", fold_file);
  r.get("caption_style", style);
  r.get("prompt_template", templ);
  r.get("mock", c.use_mock);
  r.get("mock_fixture", fixture);
  if (const json* b = r.child("captioner")) read_backend(*b, "captioner", c.captioner);
  if (const json* b = r.child("scorer")) read_backend(*b, "scorer", c.scorer);
  if (const json* a = r.child("aggregator")) read_aggregator(*a, c.aggregator);
  if (const json* e = r.child("evaluation")) read_evaluation(*e, c.evaluation);
  r.finish();
  c.caption_style = caption_prompt_style_from_string(style);
  c.dataset = resolve(dataset, base);
  if (!output.empty()) c.output_dir = resolve(output, base);
  if (!templ.empty()) c.prompt_template = resolve(templ, base);
  if (!fixture.empty()) c.mock_fixture = resolve(fixture, base);
  if (!fold_file.empty()) c.fold_file = resolve(fold_file, base);
  c.aggregator.seed = c.seed;
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_file(path), path.parent_path());
}

std::string dump_run_config(const RunConfig& c) {
  json j{{"dataset", c.dataset.string()},
         {"output_dir", c.output_dir.string()},
         {"seed", c.seed},
         {"window", c.window},
         {"folds", c.folds},
         {"fold_file", c.fold_file ? c.fold_file->string() : ""},
         {"caption_style", to_string(c.caption_style)},
         {"prompt_template", c.prompt_template ? c.prompt_template->string() : ""},
         {"mock", c.use_mock},
         {"mock_fixture", c.mock_fixture ? c.mock_fixture->string() : ""},
         {"captioner", write_backend(c.captioner)},
         {"scorer", write_backend(c.scorer)},
         {"aggregator", write_aggregator(c.aggregator)},
         {"evaluation", write_evaluation(c.evaluation)}};
  return j.dump(2) + "\n";
}

std::string config_fingerprint(const RunConfig& c) {
  // Output location does not change results.
  RunConfig copy = c;
  copy.output_dir.clear();
  return sha256_hex(dump_run_config(copy));
}

}  // namespace llmvs
