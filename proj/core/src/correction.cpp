#include "retoksync/correction.hpp"

#include "retoksync/errors.hpp"

namespace retoksync {

std::vector<CorrectionItem> diff_group(const GroupLedger& ledger) {
  std::vector<CorrectionItem> items;
  for (std::size_t i = 0; i < ledger.records.size(); ++i) {
    const FragmentRecord& r = ledger.records[i];
    if (r.received.size() != r.intended.size()) {
      throw ProtocolError("ledger record " + std::to_string(i) + " has mismatched lengths");
    }
    if (r.received == r.intended) continue;
    if (items.size() == kMaxCorrectionItems) {
      throw OverflowError("more than " + std::to_string(kMaxCorrectionItems) +
                          " erroneous tokens in one group; split the group");
    }
    items.push_back({i, r.intended});
  }
  return items;
}

unsigned position_width(std::size_t group_tokens, const std::size_t* previous) {
  if (previous == nullptr) return ceil_log2(group_tokens);
  if (*previous + 1 >= group_tokens) return 0;
  return ceil_log2(group_tokens - *previous - 1);
}

Bits encode_message(std::span<const CorrectionItem> items, std::size_t group_tokens) {
  if (items.size() > kMaxCorrectionItems) {
    throw OverflowError(std::to_string(items.size()) + " correction items exceed the count field");
  }
  BitWriter w;
  w.write(items.size(), kCountFieldBits);
  const std::size_t* previous = nullptr;
  for (const CorrectionItem& item : items) {
    if (item.position >= group_tokens) {
      throw RangeError("correction position " + std::to_string(item.position) +
                       " outside group of " + std::to_string(group_tokens) + " tokens");
    }
    if (previous != nullptr && item.position <= *previous) {
      throw RangeError("correction positions must be strictly ascending");
    }
    const unsigned width = position_width(group_tokens, previous);
    const std::size_t value = previous == nullptr ? item.position : item.position - *previous - 1;
    w.write(value, width);
    w.write(item.replacement);
    previous = &item.position;
  }
  return w.take();
}

std::vector<CorrectionItem> parse_message(const Bits& message,
                                          std::span<const std::size_t> fragment_lengths,
                                          std::size_t group_tokens) {
  if (fragment_lengths.size() < group_tokens) {
    throw ProtocolError("receiver ledger shorter than the group");
  }
  BitReader r(message);
  const std::size_t count = r.read(kCountFieldBits);
  std::vector<CorrectionItem> items;
  items.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t* previous = items.empty() ? nullptr : &items.back().position;
    const unsigned width = position_width(group_tokens, previous);
    const std::size_t value = r.read(width);
    const std::size_t position = previous == nullptr ? value : *previous + 1 + value;
    if (position >= group_tokens) {
      throw CorruptionError("decoded position " + std::to_string(position) +
                            " outside group of " + std::to_string(group_tokens) + " tokens");
    }
    items.push_back({position, r.read_bits(fragment_lengths[position])});
  }
  return items;
}

std::vector<Bits> apply_corrections(std::span<const CorrectionItem> items,
                                    std::span<const Bits> received,
                                    std::span<const std::size_t> sample_ends) {
  std::vector<Bits> fragments(received.begin(), received.end());
  for (const CorrectionItem& item : items) {
    if (item.position >= fragments.size()) {
      throw ProtocolError("correction position " + std::to_string(item.position) +
                          " outside the group");
    }
    if (item.replacement.size() != fragments[item.position].size()) {
      throw ProtocolError("replacement length differs from the fragment at position " +
                          std::to_string(item.position));
    }
    fragments[item.position] = item.replacement;
  }
  if (sample_ends.empty() || sample_ends.back() != fragments.size()) {
    throw ProtocolError("sample boundaries do not cover the group");
  }
  std::vector<Bits> payloads;
  payloads.reserve(sample_ends.size());
  std::size_t begin = 0;
  for (std::size_t end : sample_ends) {
    if (end < begin) throw ProtocolError("sample boundaries must be ascending");
    Bits payload;
    for (std::size_t i = begin; i < end; ++i) append(payload, fragments[i]);
    payloads.push_back(std::move(payload));
    begin = end;
  }
  return payloads;
}

}  // namespace retoksync
