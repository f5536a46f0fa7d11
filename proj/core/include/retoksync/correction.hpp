#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "retoksync/bits.hpp"
#include "retoksync/tokenizer.hpp"

namespace retoksync {

// One receiver-view token as the sender predicts the receiver will see it:
// the fragment Dec extracts there and the payload bits that belong there.
struct FragmentRecord {
  TokenId token = 0;
  Bits received;
  Bits intended;
  bool skipped = false;

  friend bool operator==(const FragmentRecord&, const FragmentRecord&) = default;
};

// Records of all n samples of a group, concatenated in transmission order.
// sample_ends[i] is the exclusive end index of sample i.
struct GroupLedger {
  std::vector<FragmentRecord> records;
  std::vector<std::size_t> sample_ends;

  std::size_t size() const { return records.size(); }
};

struct CorrectionItem {
  std::size_t position = 0;
  Bits replacement;

  friend bool operator==(const CorrectionItem&, const CorrectionItem&) = default;
};

inline constexpr unsigned kCountFieldBits = 8;
inline constexpr std::size_t kMaxCorrectionItems = 255;

// One item per token whose received fragment differs from the intended one.
// Throws OverflowError past kMaxCorrectionItems.
std::vector<CorrectionItem> diff_group(const GroupLedger& ledger);

// Field width for the next position given the previous item (if any).
// First item: ceil(log2 L). After position p: ceil(log2(L - p - 1)).
unsigned position_width(std::size_t group_tokens, const std::size_t* previous);

// 8-bit count, then per item a position field (absolute for the first item,
// gap-minus-one afterwards, with shrinking widths) followed by the raw
// replacement bits. Throws RangeError / OverflowError on invalid input.
Bits encode_message(std::span<const CorrectionItem> items, std::size_t group_tokens);

// Inverse of encode_message. Replacement lengths come from the receiver's own
// per-token fragment lengths. Trailing bits after the last item are ignored.
std::vector<CorrectionItem> parse_message(const Bits& message,
                                          std::span<const std::size_t> fragment_lengths,
                                          std::size_t group_tokens);

// Substitutes fragments, re-concatenates, and splits at sample boundaries.
// Throws ProtocolError on bad positions or replacement lengths.
std::vector<Bits> apply_corrections(std::span<const CorrectionItem> items,
                                    std::span<const Bits> received,
                                    std::span<const std::size_t> sample_ends);

}  // namespace retoksync
