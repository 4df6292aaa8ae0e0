#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cotstress/embedding_attack.hpp"
#include "cotstress/token_attack.hpp"

namespace cotstress {

/// Flat experiment configuration. Field names mirror the dotted config keys
/// (section.key) accepted by the CLI and config files.
struct ExperimentConfig {
  // model.*
  std::string model_backend = "toy";  // toy | real
  std::string model_name;             // real backend: model to load
  std::string model_base_url;         // real backend endpoint; falls back to MODEL_API_BASE
  std::string model_device = "auto";
  std::string model_dtype = "auto";
  int toy_vocab = 257;  // byte tokenizer vocabulary
  int toy_dim = 32;
  int toy_heads = 4;
  int toy_layers = 2;
  int toy_mlp_hidden = 64;
  int toy_max_seq = 4096;
  std::uint64_t toy_seed = 0;
  std::string tokenizer_kind = "byte";  // byte | char (toy backend only)

  // dataset.*
  std::string dataset = "synthetic";
  std::string split = "test";
  std::string data_dir = "data";
  std::string exemplar_dir = "data/exemplars";
  int sample_count = -1;  // -1: dataset default (500 for strategyqa, all otherwise)
  std::uint64_t sample_seed = 17;
  int limit = 0;  // 0 = no limit

  // attack.*
  std::string attack_kind = "token";  // token | embedding
  std::string token_mode = "full";
  double insert_ratio = 0.2;
  double replace_ratio = -1.0;  // -1: dataset default (0.5 / 0.25 / 0.5)
  int steps = 5;
  std::string swap_policy = "cumulative";
  int suffix_tokens = 20;
  int candidate_pool = 256;
  double epsilon = -1.0;  // -1: dataset default (0.02 / 0.005 / 0.03)
  double alpha = 0.5;
  std::string epsilon_mode = "global-range";
  bool store_delta = false;
  double lambda_override = -1.0;  // -1: use the span-length formula

  // loss.*
  std::string ce_target = "soft";
  std::string reduction = "mean";
  std::string sign_convention = "literal-eq4";
  bool cot_only = false;

  // decode.*
  int max_new_tokens = 256;
  double temperature = 0.7;
  std::string decode_strategy = "greedy";

  // judge.*
  std::string j1_kind = "mock";  // mock | http
  std::string j1_model = "gpt-3.5-turbo";
  std::string j1_mock_mode = "always1";
  std::string j2_kind = "mock";
  std::string j2_model = "deepseek-r1-distill-qwen-7b";
  std::string j2_mock_mode = "always1";
  std::string judge_cache_path;

  // cache.*
  std::string cache_dir;  // generation cache directory; empty disables

  // run.*
  std::string out_dir = "runs/run";
  bool resume = false;
  int workers = 1;
  std::uint64_t seed = 0;

  /// Fills dataset-dependent defaults (replace ratio, epsilon, sampling).
  void resolve_defaults();

  /// Throws ConfigError on contradictions, including hyperparameters that
  /// belong to the other attack kind. The *_explicit flags say whether the
  /// user set the value (CLI or config file) rather than inheriting it.
  struct ExplicitFlags {
    bool epsilon = false, alpha = false, epsilon_mode = false, store_delta = false;
    bool insert_ratio = false, replace_ratio = false, swap_policy = false, token_mode = false;
  };
  void validate(const ExplicitFlags& flags = {}) const;

  TokenAttackConfig token_config() const;
  EmbeddingAttackConfig embedding_config() const;
  DecodeParams decode_params() const;
  LossSpec loss_spec() const;

  /// Config snapshot in the dotted-section key=value format the CLI reads.
  std::string to_toml() const;
};

}  // namespace cotstress
