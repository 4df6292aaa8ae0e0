#include "cotstress/answer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "cotstress/errors.hpp"

namespace cotstress {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from = 0) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

/// Parses the first number at or after `pos`; returns value and [begin,end).
/// Currency symbols and other junk before the digits are skipped.
struct NumberMatch {
  double value = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::optional<NumberMatch> scan_number(std::string_view text, std::size_t pos) {
  const std::size_t n = text.size();
  while (pos < n) {
    // Candidate start: digit, or sign/decimal point directly followed by a digit.
    char c = text[pos];
    bool starts = false;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      starts = true;
    } else if ((c == '-' || c == '.') && pos + 1 < n &&
               std::isdigit(static_cast<unsigned char>(text[pos + 1]))) {
      starts = true;
    }
    if (!starts) {
      ++pos;
      continue;
    }
    std::size_t begin = pos;
    std::string digits;
    std::size_t i = pos;
    if (text[i] == '-') {
      digits.push_back('-');
      ++i;
    }
    bool seen_dot = false;
    while (i < n) {
      char d = text[i];
      if (std::isdigit(static_cast<unsigned char>(d))) {
        digits.push_back(d);
        ++i;
      } else if (d == ',' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        ++i;  // digit-group comma
      } else if (d == '.' && !seen_dot && i + 1 < n &&
                 std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        digits.push_back('.');
        seen_dot = true;
        ++i;
      } else {
        break;
      }
    }
    if (digits.empty() || digits == "-") {
      ++pos;
      continue;
    }
    NumberMatch m;
    m.value = std::strtod(digits.c_str(), nullptr);
    m.begin = begin;
    m.end = i;
    return m;
  }
  return std::nullopt;
}

struct BoolMatch {
  bool value = false;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::optional<BoolMatch> scan_boolean(std::string_view text, std::size_t pos) {
  const std::size_t n = text.size();
  while (pos < n) {
    while (pos < n && !std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t begin = pos;
    while (pos < n && std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == begin) break;
    std::string_view word = text.substr(begin, pos - begin);
    if (iequals(word, "yes") || iequals(word, "true")) return BoolMatch{true, begin, pos};
    if (iequals(word, "no") || iequals(word, "false")) return BoolMatch{false, begin, pos};
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::Numeric ? "numeric" : "boolean";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "numeric") return TaskKind::Numeric;
  if (s == "boolean") return TaskKind::Boolean;
  throw ConfigError("unknown task kind: " + std::string(s));
}

bool NormalizedAnswer::equals(const NormalizedAnswer& other) const {
  if (kind != other.kind) return false;
  if (kind == TaskKind::Numeric) return std::abs(number - other.number) <= 1e-6;
  return truth == other.truth;
}

std::string NormalizedAnswer::canonical_text() const {
  if (kind == TaskKind::Boolean) return truth ? "yes" : "no";
  // Integers render without a decimal point; otherwise shortest fixed form.
  if (std::abs(number - std::round(number)) < 1e-9 && std::abs(number) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", number);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", number);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::optional<NormalizedAnswer> parse_answer_value(std::string_view text, TaskKind kind) {
  if (kind == TaskKind::Boolean) {
    auto m = scan_boolean(text, 0);
    if (!m) return std::nullopt;
    return NormalizedAnswer::boolean(m->value);
  }
  auto m = scan_number(text, 0);
  if (!m) return std::nullopt;
  return NormalizedAnswer::numeric(m->value);
}

std::optional<ExtractedAnswer> extract_answer(std::string_view generation, TaskKind kind) {
  static constexpr std::string_view kMarker = "the answer is";
  const std::size_t marker = find_ci(generation, kMarker);
  if (marker == std::string_view::npos) return std::nullopt;
  const std::size_t after = marker + kMarker.size();

  ExtractedAnswer out;
  out.marker_begin = marker;
  if (kind == TaskKind::Boolean) {
    auto m = scan_boolean(generation, after);
    if (!m) return std::nullopt;
    out.value = NormalizedAnswer::boolean(m->value);
    out.value_end = m->end;
  } else {
    auto m = scan_number(generation, after);
    if (!m) return std::nullopt;
    out.value = NormalizedAnswer::numeric(m->value);
    out.value_end = m->end;
    // Keep short unit words out but absorb the sentence stop below.
  }
  if (out.value_end < generation.size() && generation[out.value_end] == '.') {
    ++out.value_end;
  }
  return out;
}

SplitGeneration split_answer_cot(std::string_view generation, TaskKind kind) {
  SplitGeneration out;
  auto extracted = extract_answer(generation, kind);
  if (!extracted) return out;
  out.parsed = true;
  out.value = extracted->value;
  out.answer_text =
      std::string(generation.substr(extracted->marker_begin,
                                    extracted->value_end - extracted->marker_begin));
  std::size_t rest = extracted->value_end;
  while (rest < generation.size() &&
         std::isspace(static_cast<unsigned char>(generation[rest]))) {
    ++rest;
  }
  out.cot_text = std::string(generation.substr(rest));
  return out;
}

}  // namespace cotstress
