#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slant::corpus {

enum class Source { Fnc, CnnMsnbc, Newspaper };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);

struct Document {
  std::string id;
  Source source = Source::Newspaper;
  std::optional<std::string> outlet_id;
  std::chrono::year_month_day date{};
  std::string text;
};

// One window of a document. `fnc` is the training label: set iff the parent
// document came from a labeled (transcript) corpus.
struct Snippet {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
  std::size_t word_count = 0;
  std::optional<bool> fnc;
  std::optional<std::string> outlet_id;
  std::chrono::year_month_day date{};

  /// "<doc_id>#<index>", unique across a corpus.
  std::string id() const;
};

enum class Endorsement { Dem, Rep, None };

std::string_view to_string(Endorsement e);
Endorsement parse_endorsement(std::string_view s);

struct Outlet {
  std::string outlet_id;
  std::string name;
  Endorsement endorsement_1996 = Endorsement::None;
  std::optional<std::string> headquarters_county;
};

// Channel order used by every triple below.
enum Channel : std::size_t { kFnc = 0, kCnn = 1, kMsnbc = 2 };

struct CountyRecord {
  std::string county_id;
  std::string state;
  std::array<double, 3> positions{};
  std::array<double, 3> ratings{};
  std::map<std::string, double> demographics;
  std::array<double, 3> access_shares{};
  double population = 0;
  double surveyed_households = 0;
};

struct CirculationLink {
  std::string outlet_id;
  std::string county_id;
  double circulation = 0;
  std::optional<double> circulation_1995;
};

struct PanelInputs {
  std::vector<CountyRecord> counties;
  std::vector<CirculationLink> links;
  std::vector<Outlet> outlets;
};

struct LoadResult {
  std::vector<Document> documents;
  std::size_t skipped = 0;
};

std::chrono::year_month_day parse_date(std::string_view iso);
std::string format_date(const std::chrono::year_month_day& d);

/// Reads line-delimited JSON {id, date, text, outlet_id?}. Malformed or
/// duplicate-id lines are skipped and counted; an unreadable file throws.
/// Newspaper documents without outlet_id count as malformed.
LoadResult load_corpus(const std::filesystem::path& path, Source source);

inline LoadResult load_labeled_corpus(const std::filesystem::path& path, Source source_label) {
  return load_corpus(path, source_label);
}

void write_corpus(const std::filesystem::path& path, std::span<const Document> docs);

inline constexpr std::size_t kDefaultWindow = 80;

/// Splits on whitespace into consecutive non-overlapping windows. A trailing
/// partial window survives only with at least window/2 words, except that a
/// document shorter than one window is returned whole.
std::vector<Snippet> segment(const Document& document, std::size_t window = kDefaultWindow);

/// Undersamples the majority class uniformly without replacement so both
/// classes have min(count) snippets. Selected snippets keep input order.
std::vector<Snippet> balance_sample(std::span<const Snippet> snippets, std::uint64_t seed);

// Snippet stores (prepared stage): JSONL with doc_id/index/text/label/outlet_id/date.
void write_snippets(const std::filesystem::path& path, std::span<const Snippet> snippets);
std::vector<Snippet> read_snippets(const std::filesystem::path& path);

/// Loads counties.csv, circulation.csv, outlets.csv and checks key integrity:
/// every link must name a known county and outlet, and (outlet, county) pairs are unique.
PanelInputs load_panel_inputs(const std::filesystem::path& county_path,
                              const std::filesystem::path& circulation_path,
                              const std::filesystem::path& outlet_path);

void write_panel_inputs(const PanelInputs& inputs, const std::filesystem::path& county_path,
                        const std::filesystem::path& circulation_path,
                        const std::filesystem::path& outlet_path);

}  // namespace slant::corpus
