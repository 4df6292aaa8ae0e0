#include "cotstress/config.hpp"

#include <sstream>

#include "cotstress/errors.hpp"

namespace cotstress {

void ExperimentConfig::resolve_defaults() {
  if (replace_ratio < 0.0) {
    replace_ratio = dataset == "gsm8k" ? 0.25 : 0.5;
  }
  if (epsilon < 0.0) {
    if (dataset == "gsm8k") {
      epsilon = 0.005;
    } else if (dataset == "strategyqa") {
      epsilon = 0.03;
    } else {
      epsilon = 0.02;
    }
  }
  if (sample_count < 0) {
    sample_count = dataset == "strategyqa" ? 500 : 0;  // 0 = full split
  }
}

void ExperimentConfig::validate(const ExplicitFlags& flags) const {
  if (model_backend != "toy" && model_backend != "real") {
    throw ConfigError("model.backend must be toy or real");
  }
  if (model_backend == "real" && model_base_url.empty() &&
      std::getenv("MODEL_API_BASE") == nullptr) {
    throw ConfigError("real backend needs model.base_url or MODEL_API_BASE");
  }
  if (attack_kind != "token" && attack_kind != "embedding") {
    throw ConfigError("attack.kind must be token or embedding");
  }
  if (attack_kind == "token") {
    if (flags.epsilon || flags.alpha || flags.epsilon_mode || flags.store_delta) {
      throw ConfigError("embedding hyperparameters set for a token attack");
    }
  } else {
    if (flags.insert_ratio || flags.replace_ratio || flags.swap_policy || flags.token_mode) {
      throw ConfigError("token hyperparameters set for an embedding attack");
    }
  }
  if (insert_ratio <= 0.0 || insert_ratio > 1.0) {
    throw ConfigError("attack.insert_ratio must lie in (0, 1]");
  }
  if (replace_ratio <= 0.0 || replace_ratio > 1.0) {
    throw ConfigError("attack.replace_ratio must lie in (0, 1]");
  }
  if (steps < 1) throw ConfigError("attack.steps must be positive");
  if (epsilon < 0.0) throw ConfigError("attack.epsilon must be nonnegative");
  if (max_new_tokens < 1) throw ConfigError("decode.max_new_tokens must be >= 1");
  if (temperature < 0.0) throw ConfigError("decode.temperature must be nonnegative");
  if (workers < 1) throw ConfigError("run.workers must be positive");
  if (tokenizer_kind != "byte" && tokenizer_kind != "char") {
    throw ConfigError("model.tokenizer must be byte or char");
  }
  // Parse-or-throw for the enum-like strings.
  (void)token_mode_from_string(token_mode);
  (void)swap_policy_from_string(swap_policy);
  (void)epsilon_mode_from_string(epsilon_mode);
  if (ce_target != "soft" && ce_target != "hard-argmax") {
    throw ConfigError("loss.ce_target must be soft or hard-argmax");
  }
  if (reduction != "mean" && reduction != "sum") {
    throw ConfigError("loss.reduction must be mean or sum");
  }
  if (sign_convention != "literal-eq4" && sign_convention != "maximize-lopt") {
    throw ConfigError("loss.sign_convention must be literal-eq4 or maximize-lopt");
  }
  if (decode_strategy != "greedy" && decode_strategy != "sampled") {
    throw ConfigError("decode.strategy must be greedy or sampled");
  }
  for (const auto& kind : {j1_kind, j2_kind}) {
    if (kind != "mock" && kind != "http") throw ConfigError("judge kind must be mock or http");
  }
}

LossSpec ExperimentConfig::loss_spec() const {
  LossSpec spec;
  spec.ce_target = ce_target == "soft" ? CeTarget::Soft : CeTarget::HardArgmax;
  spec.reduction = reduction == "mean" ? Reduction::Mean : Reduction::Sum;
  spec.sign_convention = sign_convention == "literal-eq4" ? SignConvention::LiteralEq4
                                                          : SignConvention::MaximizeLopt;
  spec.cot_only = cot_only;
  return spec;
}

TokenAttackConfig ExperimentConfig::token_config() const {
  TokenAttackConfig cfg;
  cfg.insert_ratio = insert_ratio;
  cfg.replace_ratio = replace_ratio;
  cfg.steps = steps;
  cfg.rng_seed = seed;
  cfg.mode = token_mode_from_string(token_mode);
  cfg.swap_policy = swap_policy_from_string(swap_policy);
  cfg.suffix_tokens = suffix_tokens;
  cfg.candidate_pool = candidate_pool;
  if (lambda_override >= 0.0) cfg.lambda_override = lambda_override;
  cfg.loss = loss_spec();
  return cfg;
}

EmbeddingAttackConfig ExperimentConfig::embedding_config() const {
  EmbeddingAttackConfig cfg;
  cfg.epsilon = epsilon;
  cfg.alpha = alpha;
  cfg.steps = steps;
  cfg.epsilon_mode = epsilon_mode_from_string(epsilon_mode);
  if (lambda_override >= 0.0) cfg.lambda_override = lambda_override;
  cfg.loss = loss_spec();
  cfg.store_delta = store_delta;
  return cfg;
}

DecodeParams ExperimentConfig::decode_params() const {
  DecodeParams params;
  params.max_new_tokens = max_new_tokens;
  params.temperature = temperature;
  params.strategy =
      decode_strategy == "greedy" ? DecodeStrategy::Greedy : DecodeStrategy::Sampled;
  params.seed = seed;
  return params;
}

std::string ExperimentConfig::to_toml() const {
  std::ostringstream out;
  out << "[model]\n";
  out << "backend = \"" << model_backend << "\"\n";
  out << "name = \"" << model_name << "\"\n";
  out << "base_url = \"" << model_base_url << "\"\n";
  out << "device = \"" << model_device << "\"\n";
  out << "dtype = \"" << model_dtype << "\"\n";
  out << "tokenizer = \"" << tokenizer_kind << "\"\n";
  out << "toy_vocab = " << toy_vocab << "\n";
  out << "toy_dim = " << toy_dim << "\n";
  out << "toy_heads = " << toy_heads << "\n";
  out << "toy_layers = " << toy_layers << "\n";
  out << "toy_mlp_hidden = " << toy_mlp_hidden << "\n";
  out << "toy_max_seq = " << toy_max_seq << "\n";
  out << "toy_seed = " << toy_seed << "\n";
  out << "\n[dataset]\n";
  out << "name = \"" << dataset << "\"\n";
  out << "split = \"" << split << "\"\n";
  out << "dir = \"" << data_dir << "\"\n";
  out << "exemplar_dir = \"" << exemplar_dir << "\"\n";
  out << "sample_count = " << sample_count << "\n";
  out << "sample_seed = " << sample_seed << "\n";
  out << "limit = " << limit << "\n";
  out << "\n[attack]\n";
  out << "kind = \"" << attack_kind << "\"\n";
  out << "mode = \"" << token_mode << "\"\n";
  out << "insert_ratio = " << insert_ratio << "\n";
  out << "replace_ratio = " << replace_ratio << "\n";
  out << "steps = " << steps << "\n";
  out << "swap_policy = \"" << swap_policy << "\"\n";
  out << "suffix_tokens = " << suffix_tokens << "\n";
  out << "candidate_pool = " << candidate_pool << "\n";
  out << "epsilon = " << epsilon << "\n";
  out << "alpha = " << alpha << "\n";
  out << "epsilon_mode = \"" << epsilon_mode << "\"\n";
  out << "store_delta = " << (store_delta ? "true" : "false") << "\n";
  out << "lambda_override = " << lambda_override << "\n";
  out << "\n[loss]\n";
  out << "ce_target = \"" << ce_target << "\"\n";
  out << "reduction = \"" << reduction << "\"\n";
  out << "sign_convention = \"" << sign_convention << "\"\n";
  out << "cot_only = " << (cot_only ? "true" : "false") << "\n";
  out << "\n[decode]\n";
  out << "max_new_tokens = " << max_new_tokens << "\n";
  out << "temperature = " << temperature << "\n";
  out << "strategy = \"" << decode_strategy << "\"\n";
  out << "\n[judge]\n";
  out << "j1_kind = \"" << j1_kind << "\"\n";
  out << "j1_model = \"" << j1_model << "\"\n";
  out << "j1_mock_mode = \"" << j1_mock_mode << "\"\n";
  out << "j2_kind = \"" << j2_kind << "\"\n";
  out << "j2_model = \"" << j2_model << "\"\n";
  out << "j2_mock_mode = \"" << j2_mock_mode << "\"\n";
  out << "cache_path = \"" << judge_cache_path << "\"\n";
  out << "\n[cache]\n";
  out << "dir = \"" << cache_dir << "\"\n";
  out << "\n[run]\n";
  out << "out_dir = \"" << out_dir << "\"\n";
  out << "resume = " << (resume ? "true" : "false") << "\n";
  out << "workers = " << workers << "\n";
  out << "seed = " << seed << "\n";
  return out.str();
}

}  // namespace cotstress
