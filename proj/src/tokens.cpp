#include "skillopt/tokens.hpp"

#include <cctype>
#include <vector>

namespace skillopt {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

TokenCount count_tokens(std::string_view text) {
  return (4 * count_words(text) + 2) / 3;
}

TokenCounter default_token_counter() {
  return [](std::string_view text) { return count_tokens(text); };
}

std::string truncate_to_tokens(std::string_view text, TokenCount budget,
                               const TokenCounter& counter) {
  const TokenCounter& count = counter ? counter : default_token_counter();
  if (count(text) <= budget) return std::string(text);

  std::vector<std::size_t> word_ends;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_space(static_cast<unsigned char>(text[i]))) {
      if (in_word) word_ends.push_back(i);
      in_word = false;
    } else {
      in_word = true;
    }
  }
  if (in_word) word_ends.push_back(text.size());

  std::size_t lo = 0;
  std::size_t hi = word_ends.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (count(text.substr(0, word_ends[mid - 1])) <= budget) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  if (lo == 0) return std::string();
  return std::string(text.substr(0, word_ends[lo - 1]));
}

}  // namespace skillopt
