#pragma once

#include <stdexcept>
#include <string>

namespace cotstress {

/// Non-retryable prompt construction failure (tokenizer round-trip, bad spans).
class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transport-level failure talking to a remote model or judge endpoint.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cotstress
