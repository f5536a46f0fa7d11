#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "retoksync/tokenizer.hpp"

// Built-in tokenizer profiles and vocabulary slices for toy-scale runs.
namespace retoksync::toy {

// Byte-level vocabulary, no merges: re-tokenization is always the identity
// on byte tokens.
TokenizerProfile clean_profile();

// Byte-level plus (a,b)->ab and (b,a)->ba. With the slice {a, b, ab, ba}
// almost every fourth step triggers.
TokenizerProfile minimal_profile();

// Byte-level plus six English bigram merges (th, he, in, er, an, re).
TokenizerProfile sparse_profile();

// BPE trained on the built-in English/CJK corpus.
TokenizerProfile english_profile(std::size_t vocab_size = 384);

std::string_view english_corpus();

// Short prompts that end on a punctuation boundary, so generated text never
// merges into them.
std::vector<std::string> english_contexts();

// Named profile: clean | minimal | sparse | english.
TokenizerProfile builtin_profile(std::string_view name);

// Single-byte tokens a..z.
std::vector<TokenId> letters_slice(const TokenizerProfile& profile);

// Every token that is itself a multi-byte merge result.
std::vector<TokenId> merged_slice(const TokenizerProfile& profile);

// Tokens whose bytes are valid UTF-8 with no control characters other than
// space and newline. Excludes incomplete tokens.
std::vector<TokenId> printable_slice(const TokenizerProfile& profile);

// Slice spec: all | letters | letters+merged | merged | printable |
// ids:<id>,<id>,...
std::vector<TokenId> resolve_slice(const TokenizerProfile& profile, std::string_view spec);

}  // namespace retoksync::toy
