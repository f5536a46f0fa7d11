#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retoksync {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

struct Token {
  TokenId id = 0;
  std::string bytes;
};

struct MergeRule {
  TokenId left = 0;
  TokenId right = 0;
  TokenId merged = 0;

  friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

struct Segment {
  std::string bytes;
  std::size_t start_offset = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

// Pre-segmentation: a boundary before every maximal whitespace run (the run
// attaches to the word that follows it) and around every ASCII punctuation
// character. The scanner carries no state across a boundary, so segmenting a
// suffix that starts on a boundary gives the tail of the full segmentation.
std::vector<Segment> pre_segment(std::string_view text);

// Byte offset where the last segment of `text` starts (0 for empty text).
std::size_t last_segment_start(std::string_view text);

enum class Utf8State {
  kValid,       // complete, well-formed UTF-8
  kIncomplete,  // a well-formed prefix that ends mid-character
  kInvalid,     // can never become valid by appending bytes
};

Utf8State classify_utf8(std::string_view bytes);

inline bool is_decodable(std::string_view bytes) {
  return classify_utf8(bytes) == Utf8State::kValid;
}

// Byte-level BPE vocabulary with rank-ordered merges. Immutable once built,
// so a profile may be shared across threads for read-only use.
class TokenizerProfile {
 public:
  // All 256 single bytes, ids 0..255, no merges.
  static TokenizerProfile byte_level();

  // Validates: unique non-empty byte strings, every single byte present,
  // every merge output equal to left||right and present in the vocabulary.
  static TokenizerProfile from_parts(std::vector<std::string> vocabulary,
                                     std::vector<MergeRule> merges);

  // Convenience for hand-built profiles: byte-level base plus merges given
  // as (left bytes, right bytes) in rank order.
  static TokenizerProfile with_merges(
      std::span<const std::pair<std::string, std::string>> merges);

  // `id<TAB>hex-bytes` per line / `left right merged` per line.
  static TokenizerProfile parse(std::string_view vocab_text, std::string_view merges_text);
  static TokenizerProfile load(const std::filesystem::path& vocab_file,
                               const std::filesystem::path& merges_file);
  std::string vocab_text() const;
  std::string merges_text() const;
  void save(const std::filesystem::path& vocab_file,
            const std::filesystem::path& merges_file) const;

  std::size_t vocab_size() const { return vocab_.size(); }
  std::span<const MergeRule> merges() const { return merges_; }

  // Throws VocabularyError for ids outside the vocabulary.
  std::string_view token_bytes(TokenId id) const;
  std::optional<TokenId> find(std::string_view bytes) const;
  TokenId byte_token(std::uint8_t byte) const { return byte_ids_[byte]; }

  // Tok: pre-segment, then greedy lowest-rank (leftmost on ties) merging
  // inside each segment until no rule applies.
  TokenSeq encode(std::string_view text) const;
  // Encodes a single segment without pre-segmenting it.
  TokenSeq encode_segment(std::string_view segment) const;
  // Detok: concatenated token bytes (may be invalid UTF-8).
  std::string decode(std::span<const TokenId> ids) const;

  bool is_incomplete(TokenId id) const;
  bool is_anchor(TokenId id) const;
  std::vector<TokenId> anchors() const;

  friend bool operator==(const TokenizerProfile& a, const TokenizerProfile& b) {
    return a.vocab_ == b.vocab_ && a.merges_ == b.merges_;
  }

 private:
  TokenizerProfile() = default;
  void build_indexes();

  std::vector<std::string> vocab_;
  std::vector<MergeRule> merges_;
  std::unordered_map<std::string, TokenId> index_;
  std::unordered_map<std::uint64_t, std::uint32_t> merge_rank_;
  std::vector<bool> anchor_;
  std::vector<bool> incomplete_;
  std::array<TokenId, 256> byte_ids_{};
};

// Standard frequency-driven BPE training over pre-segmented text. The most
// frequent adjacent pair is merged each round (ties: smallest (left, right)
// ids); stops when the vocabulary reaches `target_vocab_size` or no pair is
// left. Throws TrainingError on an empty corpus or a target below 256.
TokenizerProfile train_bpe(std::string_view corpus, std::size_t target_vocab_size);

// Incremental Tok(Detok(x)) for a growing text. Segments before the last one
// can no longer change when bytes are appended, so only the tail segment is
// re-encoded per call. Produces exactly profile.encode(text()).
class IncrementalTokenizer {
 public:
  explicit IncrementalTokenizer(const TokenizerProfile& profile) : profile_(&profile) {}

  void append(std::string_view bytes);
  const std::string& text() const { return text_; }
  TokenSeq tokens() const;

 private:
  const TokenizerProfile* profile_;
  std::string text_;
  TokenSeq stable_;
  std::size_t stable_offset_ = 0;
};

}  // namespace retoksync
