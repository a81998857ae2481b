#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace slant::textprep {

using StopwordSet = std::unordered_set<std::string>;

// Lowercase alphabetic tokens with stopwords removed.
using TokenSequence = std::vector<std::string>;
// "stemA stemB" strings, one per adjacent stem pair.
using BigramSequence = std::vector<std::string>;

/// One token per line; blank lines and lines starting with '#' are ignored.
StopwordSet load_stopwords(const std::filesystem::path& path);

/// The versioned list shipped in data/stopwords.txt.
const StopwordSet& default_stopwords();

/// Lowercases, transliterates Latin letters to ASCII (dropping other
/// non-ASCII), turns every non-letter into a space, splits on whitespace and
/// removes stopwords and single-letter tokens.
TokenSequence normalize(std::string_view text, const StopwordSet& stopwords);

/// Porter (1980) stemmer, reference C behaviour. Input must be lowercase a-z.
std::string stem(std::string_view token);

TokenSequence stem_all(std::span<const std::string> tokens);

BigramSequence to_bigrams(std::span<const std::string> stems);

/// normalize -> stem -> bigrams.
BigramSequence bigrams_of(std::string_view text, const StopwordSet& stopwords);

/// normalize -> stem (the unigram stream the topic models use).
TokenSequence stems_of(std::string_view text, const StopwordSet& stopwords);

}  // namespace slant::textprep
