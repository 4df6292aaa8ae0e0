#include "cotstress/tokenizer.hpp"

#include <array>

#include "cotstress/errors.hpp"

namespace cotstress {

bool Tokenizer::round_trips(std::string_view text) const {
  try {
    return decode(encode(text)) == text;
  } catch (const PromptError&) {
    return false;
  }
}

std::vector<TokenId> Tokenizer::insertable_ids() const {
  std::vector<TokenId> ids;
  for (TokenId id = 0; id < vocab_size(); ++id) {
    if (is_insertable(id)) ids.push_back(id);
  }
  return ids;
}

std::vector<TokenId> ByteTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
  return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) {
    if (id < 0 || id > 256) throw PromptError("ByteTokenizer: token id out of range");
    if (id == eos_id()) continue;
    out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

const std::string& CharTokenizer::default_alphabet() {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyz"
      "0123456789"
      " .,?!'$+-*/=():%;\"#&<>[]_@\n";
  return alphabet;
}

CharTokenizer::CharTokenizer() : CharTokenizer(default_alphabet()) {}

CharTokenizer::CharTokenizer(std::string alphabet) : alphabet_(std::move(alphabet)) {
  index_of_.fill(-1);
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    index_of_[static_cast<unsigned char>(alphabet_[i])] = static_cast<int>(i);
  }
}

std::vector<TokenId> CharTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    const int idx = index_of_[c];
    if (idx < 0) {
      throw PromptError("CharTokenizer: character not in alphabet: '" + std::string(1, char(c)) +
                        "'");
    }
    out.push_back(static_cast<TokenId>(idx));
  }
  return out;
}

std::string CharTokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) {
    if (id < 0 || id > eos_id()) throw PromptError("CharTokenizer: token id out of range");
    if (id == eos_id()) continue;
    out.push_back(alphabet_[static_cast<std::size_t>(id)]);
  }
  return out;
}

bool CharTokenizer::is_insertable(TokenId id) const {
  if (id < 0 || id >= eos_id()) return false;
  const char c = alphabet_[static_cast<std::size_t>(id)];
  return c != '\n';
}

}  // namespace cotstress
