#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cotstress {

using TokenId = std::int32_t;

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual int vocab_size() const = 0;
  virtual TokenId eos_id() const = 0;

  /// Throws PromptError when the text cannot be represented.
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> tokens) const = 0;

  virtual bool is_special(TokenId id) const = 0;

  /// True for ids that may be inserted or substituted into question text:
  /// non-special and decoding to printable content.
  virtual bool is_insertable(TokenId id) const = 0;

  bool round_trips(std::string_view text) const;
  std::vector<TokenId> insertable_ids() const;
};

/// Byte-level tokenizer: ids 0..255 are raw bytes, 256 is end-of-sequence.
/// Round-trips any byte string exactly.
class ByteTokenizer final : public Tokenizer {
 public:
  int vocab_size() const override { return 257; }
  TokenId eos_id() const override { return 256; }
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  bool is_special(TokenId id) const override { return id == eos_id(); }
  bool is_insertable(TokenId id) const override { return id >= 32 && id <= 126; }
};

/// Character tokenizer over a fixed alphabet plus a trailing end-of-sequence
/// id. The default alphabet has 63 symbols, giving a vocabulary of 64.
class CharTokenizer final : public Tokenizer {
 public:
  CharTokenizer();
  explicit CharTokenizer(std::string alphabet);

  int vocab_size() const override { return static_cast<int>(alphabet_.size()) + 1; }
  TokenId eos_id() const override { return static_cast<TokenId>(alphabet_.size()); }
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  bool is_special(TokenId id) const override { return id == eos_id(); }
  bool is_insertable(TokenId id) const override;

  static const std::string& default_alphabet();

 private:
  std::string alphabet_;
  std::array<int, 256> index_of_{};
};

}  // namespace cotstress
