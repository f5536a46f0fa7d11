#include "retoksync/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "retoksync/errors.hpp"

namespace retoksync {
namespace {

enum class CharClass { kSpace, kPunct, kOther };

CharClass classify(unsigned char c) {
  switch (c) {
    case ' ':
    case '\t':
    case '\n':
    case '\r':
    case '\v':
    case '\f':
      return CharClass::kSpace;
    default:
      break;
  }
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126)) {
    return CharClass::kPunct;
  }
  return CharClass::kOther;
}

// End of the segment starting at `i`.
std::size_t segment_end(std::string_view text, std::size_t i) {
  const std::size_t n = text.size();
  const auto cls = [&](std::size_t k) { return classify(static_cast<unsigned char>(text[k])); };
  switch (cls(i)) {
    case CharClass::kPunct:
      return i + 1;
    case CharClass::kSpace:
      while (i < n && cls(i) == CharClass::kSpace) ++i;
      while (i < n && cls(i) == CharClass::kOther) ++i;
      return i;
    case CharClass::kOther:
      while (i < n && cls(i) == CharClass::kOther) ++i;
      return i;
  }
  return n;
}

std::uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(left) << 32) | right;
}

bool all_space(std::string_view bytes) {
  if (bytes.empty()) return false;
  return std::all_of(bytes.begin(), bytes.end(), [](char c) {
    return classify(static_cast<unsigned char>(c)) == CharClass::kSpace;
  });
}

std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (char c : bytes) {
    const auto b = static_cast<unsigned char>(c);
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 15]);
  }
  return out;
}

std::string from_hex(std::string_view hex, std::size_t line) {
  const auto digit = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw VocabularyError("vocabulary line " + std::to_string(line) + ": bad hex digit");
  };
  if (hex.size() % 2 != 0) {
    throw VocabularyError("vocabulary line " + std::to_string(line) + ": odd hex length");
  }
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>(digit(hex[i]) * 16 + digit(hex[i + 1])));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const char* what, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw VocabularyError(std::string(what) + " line " + std::to_string(line) +
                          ": malformed number '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << data;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::vector<Segment> pre_segment(std::string_view text) {
  std::vector<Segment> segments;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t end = segment_end(text, i);
    segments.push_back({std::string(text.substr(i, end - i)), i});
    i = end;
  }
  return segments;
}

std::size_t last_segment_start(std::string_view text) {
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    start = i;
    i = segment_end(text, i);
  }
  return start;
}

Utf8State classify_utf8(std::string_view bytes) {
  const std::size_t n = bytes.size();
  std::size_t i = 0;
  while (i < n) {
    const auto b = static_cast<unsigned char>(bytes[i]);
    if (b < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    unsigned char lo = 0x80;
    unsigned char hi = 0xBF;
    if (b >= 0xC2 && b <= 0xDF) {
      len = 2;
    } else if (b >= 0xE0 && b <= 0xEF) {
      len = 3;
      if (b == 0xE0) lo = 0xA0;
      if (b == 0xED) hi = 0x9F;
    } else if (b >= 0xF0 && b <= 0xF4) {
      len = 4;
      if (b == 0xF0) lo = 0x90;
      if (b == 0xF4) hi = 0x8F;
    } else {
      return Utf8State::kInvalid;
    }
    for (std::size_t k = 1; k < len; ++k) {
      if (i + k >= n) return Utf8State::kIncomplete;
      const auto c = static_cast<unsigned char>(bytes[i + k]);
      const unsigned char min = k == 1 ? lo : 0x80;
      const unsigned char max = k == 1 ? hi : 0xBF;
      if (c < min || c > max) return Utf8State::kInvalid;
    }
    i += len;
  }
  return Utf8State::kValid;
}

TokenizerProfile TokenizerProfile::byte_level() {
  std::vector<std::string> vocab;
  vocab.reserve(256);
  for (int b = 0; b < 256; ++b) vocab.emplace_back(1, static_cast<char>(b));
  return from_parts(std::move(vocab), {});
}

TokenizerProfile TokenizerProfile::from_parts(std::vector<std::string> vocabulary,
                                              std::vector<MergeRule> merges) {
  TokenizerProfile p;
  p.vocab_ = std::move(vocabulary);
  p.merges_ = std::move(merges);
  p.build_indexes();
  return p;
}

TokenizerProfile TokenizerProfile::with_merges(
    std::span<const std::pair<std::string, std::string>> merges) {
  TokenizerProfile base = byte_level();
  std::vector<std::string> vocab = base.vocab_;
  std::map<std::string, TokenId> index;
  for (TokenId id = 0; id < vocab.size(); ++id) index[vocab[id]] = id;
  std::vector<MergeRule> rules;
  for (const auto& [left, right] : merges) {
    const auto l = index.find(left);
    const auto r = index.find(right);
    if (l == index.end() || r == index.end()) {
      throw VocabularyError("merge operand not in vocabulary: '" + left + "' + '" + right + "'");
    }
    const std::string merged = left + right;
    auto [it, inserted] = index.emplace(merged, static_cast<TokenId>(vocab.size()));
    if (inserted) vocab.push_back(merged);
    rules.push_back({l->second, r->second, it->second});
  }
  return from_parts(std::move(vocab), std::move(rules));
}

void TokenizerProfile::build_indexes() {
  if (vocab_.size() > std::numeric_limits<TokenId>::max()) {
    throw VocabularyError("vocabulary too large");
  }
  index_.clear();
  index_.reserve(vocab_.size());
  byte_ids_.fill(std::numeric_limits<TokenId>::max());
  std::array<bool, 256> have_byte{};
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    const std::string& bytes = vocab_[id];
    if (bytes.empty()) throw VocabularyError("token " + std::to_string(id) + " has no bytes");
    if (!index_.emplace(bytes, id).second) {
      throw VocabularyError("duplicate byte sequence for token " + std::to_string(id));
    }
    if (bytes.size() == 1) {
      const auto b = static_cast<unsigned char>(bytes[0]);
      byte_ids_[b] = id;
      have_byte[b] = true;
    }
  }
  for (int b = 0; b < 256; ++b) {
    if (!have_byte[b]) throw VocabularyError("vocabulary lacks single byte " + std::to_string(b));
  }

  merge_rank_.clear();
  for (std::uint32_t rank = 0; rank < merges_.size(); ++rank) {
    const MergeRule& m = merges_[rank];
    const auto n = vocab_.size();
    if (m.left >= n || m.right >= n || m.merged >= n) {
      throw VocabularyError("merge rule " + std::to_string(rank) + " references unknown id");
    }
    if (vocab_[m.merged] != vocab_[m.left] + vocab_[m.right]) {
      throw VocabularyError("merge rule " + std::to_string(rank) +
                            " output does not equal left||right");
    }
    if (!merge_rank_.emplace(pair_key(m.left, m.right), rank).second) {
      throw VocabularyError("duplicate merge pair at rank " + std::to_string(rank));
    }
  }

  anchor_.assign(vocab_.size(), false);
  incomplete_.assign(vocab_.size(), false);
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    anchor_[id] = all_space(vocab_[id]);
    incomplete_[id] = classify_utf8(vocab_[id]) != Utf8State::kValid;
  }
}

TokenizerProfile TokenizerProfile::parse(std::string_view vocab_text,
                                         std::string_view merges_text) {
  std::vector<std::string> vocab;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(vocab_text)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw VocabularyError("vocabulary line " + std::to_string(line_no) + ": missing TAB");
    }
    const auto id = parse_number<TokenId>(line.substr(0, tab), "vocabulary", line_no);
    if (id != vocab.size()) {
      throw VocabularyError("vocabulary line " + std::to_string(line_no) +
                            ": ids must be dense and ascending");
    }
    vocab.push_back(from_hex(line.substr(tab + 1), line_no));
  }

  std::vector<MergeRule> merges;
  line_no = 0;
  for (std::string_view line : split_lines(merges_text)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<TokenId, 3> f{};
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
      const std::size_t sp = k < 2 ? line.find(' ', pos) : line.size();
      if (sp == std::string_view::npos) {
        throw VocabularyError("merges line " + std::to_string(line_no) + ": expected 3 fields");
      }
      f[k] = parse_number<TokenId>(line.substr(pos, sp - pos), "merges", line_no);
      pos = sp + 1;
    }
    merges.push_back({f[0], f[1], f[2]});
  }
  return from_parts(std::move(vocab), std::move(merges));
}

TokenizerProfile TokenizerProfile::load(const std::filesystem::path& vocab_file,
                                        const std::filesystem::path& merges_file) {
  return parse(read_file(vocab_file), read_file(merges_file));
}

std::string TokenizerProfile::vocab_text() const {
  std::string out;
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    out += std::to_string(id);
    out += '\t';
    out += to_hex(vocab_[id]);
    out += '\n';
  }
  return out;
}

std::string TokenizerProfile::merges_text() const {
  std::string out;
  for (const MergeRule& m : merges_) {
    out += std::to_string(m.left) + ' ' + std::to_string(m.right) + ' ' +
           std::to_string(m.merged) + '\n';
  }
  return out;
}

void TokenizerProfile::save(const std::filesystem::path& vocab_file,
                            const std::filesystem::path& merges_file) const {
  write_file(vocab_file, vocab_text());
  write_file(merges_file, merges_text());
}

std::string_view TokenizerProfile::token_bytes(TokenId id) const {
  if (id >= vocab_.size()) throw VocabularyError("unknown token id " + std::to_string(id));
  return vocab_[id];
}

std::optional<TokenId> TokenizerProfile::find(std::string_view bytes) const {
  const auto it = index_.find(std::string(bytes));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenSeq TokenizerProfile::encode_segment(std::string_view segment) const {
  TokenSeq ids;
  ids.reserve(segment.size());
  for (char c : segment) ids.push_back(byte_ids_[static_cast<unsigned char>(c)]);
  if (merges_.empty()) return ids;

  while (ids.size() >= 2) {
    std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      const auto it = merge_rank_.find(pair_key(ids[i], ids[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank == std::numeric_limits<std::uint32_t>::max()) break;
    ids[best_pos] = merges_[best_rank].merged;
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
  }
  return ids;
}

TokenSeq TokenizerProfile::encode(std::string_view text) const {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t end = segment_end(text, i);
    const TokenSeq part = encode_segment(text.substr(i, end - i));
    out.insert(out.end(), part.begin(), part.end());
    i = end;
  }
  return out;
}

std::string TokenizerProfile::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += token_bytes(id);
  return out;
}

bool TokenizerProfile::is_incomplete(TokenId id) const {
  if (id >= vocab_.size()) throw VocabularyError("unknown token id " + std::to_string(id));
  return incomplete_[id];
}

bool TokenizerProfile::is_anchor(TokenId id) const {
  if (id >= vocab_.size()) throw VocabularyError("unknown token id " + std::to_string(id));
  return anchor_[id];
}

std::vector<TokenId> TokenizerProfile::anchors() const {
  std::vector<TokenId> out;
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    if (anchor_[id]) out.push_back(id);
  }
  return out;
}

TokenizerProfile train_bpe(std::string_view corpus, std::size_t target_vocab_size) {
  if (corpus.empty()) throw TrainingError("empty training corpus");
  if (target_vocab_size < 256) throw TrainingError("target vocabulary size must be >= 256");

  TokenizerProfile base = TokenizerProfile::byte_level();
  std::vector<std::string> vocab;
  vocab.reserve(target_vocab_size);
  for (TokenId id = 0; id < 256; ++id) vocab.emplace_back(base.token_bytes(id));
  std::map<std::string, TokenId> index;
  for (TokenId id = 0; id < vocab.size(); ++id) index[vocab[id]] = id;

  std::map<std::string, std::uint64_t> segment_counts;
  for (const Segment& s : pre_segment(corpus)) ++segment_counts[s.bytes];

  std::vector<std::pair<TokenSeq, std::uint64_t>> words;
  words.reserve(segment_counts.size());
  for (const auto& [bytes, count] : segment_counts) {
    TokenSeq ids;
    for (char c : bytes) ids.push_back(static_cast<unsigned char>(c));
    words.emplace_back(std::move(ids), count);
  }

  std::vector<MergeRule> merges;
  while (vocab.size() < target_vocab_size) {
    std::map<std::pair<TokenId, TokenId>, std::uint64_t> pairs;
    for (const auto& [ids, count] : words) {
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) pairs[{ids[i], ids[i + 1]}] += count;
    }
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged_bytes = vocab[left] + vocab[right];
    auto [slot, inserted] = index.emplace(merged_bytes, static_cast<TokenId>(vocab.size()));
    if (inserted) vocab.push_back(merged_bytes);
    const TokenId merged = slot->second;
    merges.push_back({left, right, merged});

    for (auto& [ids, count] : words) {
      TokenSeq next;
      next.reserve(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i + 1 < ids.size() && ids[i] == left && ids[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(ids[i]);
        }
      }
      ids = std::move(next);
    }
  }
  return TokenizerProfile::from_parts(std::move(vocab), std::move(merges));
}

void IncrementalTokenizer::append(std::string_view bytes) {
  text_ += bytes;
  std::string_view tail = std::string_view(text_).substr(stable_offset_);
  // Every segment but the last is final.
  const std::size_t last = last_segment_start(tail);
  if (last > 0) {
    const TokenSeq done = profile_->encode(tail.substr(0, last));
    stable_.insert(stable_.end(), done.begin(), done.end());
    stable_offset_ += last;
  }
}

TokenSeq IncrementalTokenizer::tokens() const {
  TokenSeq out = stable_;
  const TokenSeq tail = profile_->encode_segment(std::string_view(text_).substr(stable_offset_));
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

}  // namespace retoksync
