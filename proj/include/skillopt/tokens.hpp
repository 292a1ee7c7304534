#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace skillopt {

using TokenCount = std::size_t;

// Budget arithmetic uses a deterministic word-based heuristic: a word is a
// maximal run of non-whitespace bytes and the token estimate is
// ceil(4 * words / 3). Callers that have a real tokenizer can pass their own
// TokenCounter wherever one is accepted.
using TokenCounter = std::function<TokenCount(std::string_view)>;

std::size_t count_words(std::string_view text);
TokenCount count_tokens(std::string_view text);
TokenCounter default_token_counter();

// Keeps whole words from the front until the budget would be exceeded.
std::string truncate_to_tokens(std::string_view text, TokenCount budget,
                               const TokenCounter& counter = {});

}  // namespace skillopt
