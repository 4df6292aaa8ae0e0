#include "cotstress/cached_gateway.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "cotstress/hash.hpp"

namespace cotstress {

using nlohmann::json;

GenerationCache::GenerationCache(std::string persist_path)
    : persist_path_(std::move(persist_path)) {
  std::ifstream in(persist_path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Generation g;
      g.text = j.at("text").get<std::string>();
      g.tokens = j.at("tokens").get<std::vector<TokenId>>();
      g.hit_eos = j.at("hit_eos").get<bool>();
      entries_[j.at("key").get<std::string>()] = std::move(g);
    } catch (const json::exception&) {
      // Advisory cache; skip damaged lines.
    }
  }
}

std::optional<Generation> GenerationCache::get(const std::string& key) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::put(const std::string& key, const Generation& gen) {
  std::lock_guard<std::mutex> lock(mutex_);
  const bool fresh = entries_.emplace(key, gen).second;
  if (fresh && !persist_path_.empty()) {
    std::ofstream out(persist_path_, std::ios::app);
    out << json{{"key", key}, {"text", gen.text}, {"tokens", gen.tokens},
                {"hit_eos", gen.hit_eos}}
               .dump()
        << '\n';
  }
}

namespace {

std::string params_tag(const DecodeParams& p) {
  return std::to_string(p.max_new_tokens) + ":" + std::to_string(p.temperature) + ":" +
         (p.strategy == DecodeStrategy::Greedy ? "greedy" : "sampled") + ":" +
         std::to_string(p.seed);
}

}  // namespace

std::string GenerationCache::key_for_tokens(const std::string& backend_id,
                                            std::span<const TokenId> prefix,
                                            const DecodeParams& params) {
  std::string bytes(reinterpret_cast<const char*>(prefix.data()),
                    prefix.size() * sizeof(TokenId));
  return hash::sha256_hex(backend_id + '\x1f' + params_tag(params) + '\x1f' + bytes);
}

std::string GenerationCache::key_for_embedding(const std::string& backend_id,
                                               const Eigen::MatrixXd& prefix,
                                               const DecodeParams& params) {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(prefix.size()) * sizeof(double));
  for (Eigen::Index i = 0; i < prefix.rows(); ++i) {
    for (Eigen::Index j = 0; j < prefix.cols(); ++j) {
      const double v = prefix(i, j);
      bytes.append(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  return hash::sha256_hex(backend_id + '\x1f' + params_tag(params) + "\x1f" "emb" "\x1f" + bytes);
}

CachedGateway::CachedGateway(std::shared_ptr<ModelGateway> inner,
                             std::shared_ptr<GenerationCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

Generation CachedGateway::generate(std::span<const TokenId> prefix, const DecodeParams& params) {
  const std::string key = GenerationCache::key_for_tokens(backend_id(), prefix, params);
  if (auto hit = cache_->get(key)) {
    ++hits_;
    return *hit;
  }
  Generation gen = inner_->generate(prefix, params);
  cache_->put(key, gen);
  return gen;
}

Generation CachedGateway::generate(const Eigen::MatrixXd& prefix_embeddings,
                                   const DecodeParams& params) {
  const std::string key =
      GenerationCache::key_for_embedding(backend_id(), prefix_embeddings, params);
  if (auto hit = cache_->get(key)) {
    ++hits_;
    return *hit;
  }
  Generation gen = inner_->generate(prefix_embeddings, params);
  cache_->put(key, gen);
  return gen;
}

}  // namespace cotstress
