#include "retoksync/toy.hpp"

#include <algorithm>
#include <charconv>

#include "retoksync/errors.hpp"

namespace retoksync::toy {
namespace {

constexpr std::string_view kCorpus = R"(The river runs past the old mill and into the town. In the morning the
fishermen walk down to the water and check their nets before the sun is
high. Children play on the bridge, and their voices carry over the water
to the houses on the other side.

There is a small bakery near the market square. The baker starts work
long before dawn, and by the time the first customers arrive the shelves
are full of bread, rolls, and sweet pastries. People say the bread is the
best in the region, and some of them travel from the nearby villages just
to buy it.

In the afternoon the market is busy. Farmers sell vegetables, eggs, and
cheese, while traders offer cloth, tools, and spices from distant places.
The air is filled with the smell of fresh herbs and the sound of people
bargaining over prices. When the bells ring in the evening, the stalls
close one after another, and the square slowly becomes quiet again.

Reading is one of the great pleasures of a quiet evening. A good book can
take the reader to another country, another century, or another world.
Some readers prefer history and biography, while others enjoy novels,
poetry, or stories of adventure. The library in the town keeps thousands
of books, and the librarian knows where every one of them belongs.

Learning a new language takes patience. At first the words seem strange
and the grammar feels difficult, but with practice the patterns become
familiar. Many students find that reading simple stories and listening to
conversations helps them more than memorizing long lists of rules.

The weather changes quickly in the mountains. A clear blue sky in the
morning can turn into heavy rain by noon, and travelers are wise to carry
warm clothing even in summer. Those who reach the top are rewarded with a
view of the valley, the winding river, and the distant hills.

Scientists study the natural world by observing, measuring, and testing
their ideas. A careful experiment can reveal patterns that were hidden
before, and a single result can change what we believe about nature.
Good research depends on honest reporting and on the willingness to
question earlier conclusions.

Music brings people together. In the summer there are concerts in the
park, where families sit on the grass and listen to bands play into the
night. Older residents remember the songs of their youth, and younger
people discover melodies they have never heard before.

春天来了，河边的柳树发出了新芽。早上，人们在公园里散步，孩子们在草地上玩耍。
我们喜欢读书，也喜欢听音乐。图书馆里有很多书，学生们每天下午都去那里学习。
这个城市很大，街道上有很多商店和饭馆。晚上，灯光照亮了整个城市。
今日は天気がいいので、公園を散歩しました。友達と一緒に本を読んで、音楽を聞きました。
)";

bool is_letter(std::string_view bytes) {
  return bytes.size() == 1 && bytes[0] >= 'a' && bytes[0] <= 'z';
}

bool is_printable(std::string_view bytes) {
  if (!is_decodable(bytes)) return false;
  return std::all_of(bytes.begin(), bytes.end(), [](char c) {
    const auto b = static_cast<unsigned char>(c);
    return b >= 0x20 ? b != 0x7f : (b == ' ' || b == '\n');
  });
}

template <typename Pred>
std::vector<TokenId> select(const TokenizerProfile& profile, Pred pred) {
  std::vector<TokenId> out;
  for (TokenId id = 0; id < profile.vocab_size(); ++id) {
    if (pred(profile.token_bytes(id))) out.push_back(id);
  }
  return out;
}

}  // namespace

TokenizerProfile clean_profile() { return TokenizerProfile::byte_level(); }

TokenizerProfile minimal_profile() {
  const std::vector<std::pair<std::string, std::string>> merges = {{"a", "b"}, {"b", "a"}};
  return TokenizerProfile::with_merges(merges);
}

TokenizerProfile sparse_profile() {
  const std::vector<std::pair<std::string, std::string>> merges = {
      {"t", "h"}, {"h", "e"}, {"i", "n"}, {"e", "r"}, {"a", "n"}, {"r", "e"}};
  return TokenizerProfile::with_merges(merges);
}

TokenizerProfile english_profile(std::size_t vocab_size) {
  return train_bpe(kCorpus, vocab_size);
}

std::string_view english_corpus() { return kCorpus; }

std::vector<std::string> english_contexts() {
  return {
      "The story begins here:",
      "Notes from the market,",
      "A letter to a friend.",
      "Weather report;",
      "Chapter one.",
      "From the library:",
      "An old song,",
      "Field notes.",
  };
}

TokenizerProfile builtin_profile(std::string_view name) {
  if (name == "clean") return clean_profile();
  if (name == "minimal") return minimal_profile();
  if (name == "sparse") return sparse_profile();
  if (name == "english") return english_profile();
  throw ConfigError("unknown built-in profile '" + std::string(name) +
                    "' (expected clean, minimal, sparse or english)");
}

std::vector<TokenId> letters_slice(const TokenizerProfile& profile) {
  return select(profile, is_letter);
}

std::vector<TokenId> merged_slice(const TokenizerProfile& profile) {
  return select(profile, [](std::string_view b) { return b.size() > 1; });
}

std::vector<TokenId> printable_slice(const TokenizerProfile& profile) {
  return select(profile, is_printable);
}

std::vector<TokenId> resolve_slice(const TokenizerProfile& profile, std::string_view spec) {
  if (spec == "all") return select(profile, [](std::string_view) { return true; });
  if (spec == "letters") return letters_slice(profile);
  if (spec == "merged") return merged_slice(profile);
  if (spec == "printable") return printable_slice(profile);
  if (spec == "letters+merged") {
    return select(profile, [](std::string_view b) { return is_letter(b) || b.size() > 1; });
  }
  if (spec.starts_with("ids:")) {
    std::vector<TokenId> ids;
    std::string_view rest = spec.substr(4);
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      const std::string_view field = rest.substr(0, comma);
      TokenId id = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), id);
      if (ec != std::errc() || ptr != field.data() + field.size() || id >= profile.vocab_size()) {
        throw ConfigError("bad token id '" + std::string(field) + "' in slice spec");
      }
      ids.push_back(id);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (ids.empty()) throw ConfigError("empty id list in slice spec");
    return ids;
  }
  throw ConfigError("unknown slice '" + std::string(spec) + "'");
}

}  // namespace retoksync::toy
