#include "slant/textprep.hpp"

#include <fstream>

#include "slant/error.hpp"

namespace slant::textprep {

namespace {

// ASCII spelling for U+00C0..U+017F; empty entries are dropped.
constexpr const char* kLatin[] = {
    // U+00C0
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "ss",
    // U+00E0
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",
    // U+0100
    "a", "a", "a", "a", "a", "a", "c", "c", "c", "c", "c", "c", "c", "c", "d", "d",
    "d", "d", "e", "e", "e", "e", "e", "e", "e", "e", "e", "e", "g", "g", "g", "g",
    // U+0120
    "g", "g", "g", "g", "h", "h", "h", "h", "i", "i", "i", "i", "i", "i", "i", "i",
    "i", "i", "ij", "ij", "j", "j", "k", "k", "k", "l", "l", "l", "l", "l", "l", "l",
    // U+0140
    "l", "l", "l", "n", "n", "n", "n", "n", "n", "n", "n", "n", "o", "o", "o", "o",
    "o", "o", "oe", "oe", "r", "r", "r", "r", "r", "r", "s", "s", "s", "s", "s", "s",
    // U+0160
    "s", "s", "t", "t", "t", "t", "t", "t", "u", "u", "u", "u", "u", "u", "u", "u",
    "u", "u", "u", "u", "w", "w", "y", "y", "y", "z", "z", "z", "z", "z", "z", "s",
};

// Decodes one UTF-8 sequence starting at text[i]; advances i. Invalid bytes
// decode to U+FFFD.
char32_t next_codepoint(std::string_view text, std::size_t& i) {
  const auto lead = static_cast<unsigned char>(text[i++]);
  if (lead < 0x80) return lead;
  int extra = 0;
  char32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    return 0xFFFD;
  }
  for (int n = 0; n < extra; ++n) {
    if (i >= text.size() || (static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) return 0xFFFD;
    cp = (cp << 6) | (static_cast<unsigned char>(text[i++]) & 0x3F);
  }
  return cp;
}

}  // namespace

StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read stopword list " + path.string());
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.insert(line);
  }
  return out;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet set = load_stopwords(std::filesystem::path(SLANT_DATA_DIR) / "stopwords.txt");
  return set;
}

TokenSequence normalize(std::string_view text, const StopwordSet& stopwords) {
  std::string ascii;
  ascii.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp = next_codepoint(text, i);
    if (cp < 0x80) {
      auto c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      ascii += (c >= 'a' && c <= 'z') ? c : ' ';
    } else if (cp >= 0xC0 && cp <= 0x17F) {
      ascii += kLatin[cp - 0xC0];
      if (*kLatin[cp - 0xC0] == '\0') ascii += ' ';
    } else {
      ascii += ' ';
    }
  }
  TokenSequence out;
  std::size_t pos = 0;
  while (pos < ascii.size()) {
    while (pos < ascii.size() && ascii[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < ascii.size() && ascii[end] != ' ') ++end;
    if (end - pos > 1) {
      std::string tok = ascii.substr(pos, end - pos);
      if (!stopwords.count(tok)) out.push_back(std::move(tok));
    }
    pos = end;
  }
  return out;
}

TokenSequence stem_all(std::span<const std::string> tokens) {
  TokenSequence out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(stem(t));
  return out;
}

BigramSequence to_bigrams(std::span<const std::string> stems) {
  BigramSequence out;
  if (stems.size() < 2) return out;
  out.reserve(stems.size() - 1);
  for (std::size_t i = 0; i + 1 < stems.size(); ++i) out.push_back(stems[i] + ' ' + stems[i + 1]);
  return out;
}

BigramSequence bigrams_of(std::string_view text, const StopwordSet& stopwords) {
  auto stems = stem_all(normalize(text, stopwords));
  return to_bigrams(stems);
}

TokenSequence stems_of(std::string_view text, const StopwordSet& stopwords) {
  return stem_all(normalize(text, stopwords));
}

}  // namespace slant::textprep
