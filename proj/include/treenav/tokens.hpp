#pragma once

#include <string>
#include <vector>

namespace treenav {

using Tokens = std::vector<std::string>;

/// Whitespace-plus-punctuation splitter shared by every module, so token
/// counts (the 20-token node prefix, the 120-token cap) stay consistent.
/// Runs of letters/digits form one token; each punctuation character is its
/// own token; whitespace only separates.
Tokens tokenize(const std::string& text);

/// Lowercase a copy (ASCII).
std::string lower(const std::string& s);

/// Matching normalization: lowercase, strip leading/trailing punctuation of
/// each token, drop tokens that were pure punctuation.
Tokens normalize_tokens(const Tokens& toks);

/// Normalize raw text for answer matching (tokenize + normalize_tokens).
Tokens normalize_text(const std::string& text);

/// Official-style answer normalization for EM/F1: lowercase, remove
/// punctuation, remove articles (a/an/the), collapse whitespace.
std::string normalize_answer(const std::string& s);

/// True if `needle` occurs in `haystack` as a contiguous subsequence.
bool contains_subsequence(const Tokens& haystack, const Tokens& needle);

/// Join tokens with single spaces.
std::string join(const Tokens& toks);

}  // namespace treenav
