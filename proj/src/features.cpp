#include "slant/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/csv.hpp"
#include "slant/error.hpp"
#include "slant/hashing.hpp"

namespace slant::features {

std::vector<std::string> Vocabulary::term_list() const {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& [t, f] : terms) out.push_back(t);
  return out;
}

namespace {

std::unordered_map<std::string, std::uint64_t> total_counts(std::span<const TermSequence> docs) {
  std::unordered_map<std::string, std::uint64_t> c;
  for (const auto& d : docs)
    for (const auto& t : d) ++c[t];
  return c;
}

}  // namespace

Vocabulary build_vocabulary(std::span<const TermSequence> fnc_docs,
                            std::span<const TermSequence> cnn_docs, std::uint64_t threshold) {
  if (fnc_docs.empty() || cnn_docs.empty()) throw Error("build_vocabulary: empty corpus");
  auto fnc = total_counts(fnc_docs);
  auto cnn = total_counts(cnn_docs);
  Vocabulary v;
  v.threshold = threshold;
  for (const auto& [term, nf] : fnc) {
    if (nf <= threshold) continue;
    auto it = cnn.find(term);
    if (it == cnn.end() || it->second <= threshold) continue;
    v.terms.emplace(term, TermFrequency{nf, it->second});
  }
  if (v.terms.empty())
    throw Error(fmt::format("vocabulary is empty: no term appears more than {} times in both corpora", threshold));
  return v;
}

CountMatrix count_terms(std::span<const TermSequence> docs, const std::vector<std::string>& terms) {
  std::unordered_map<std::string, int> index;
  index.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) index.emplace(terms[i], static_cast<int>(i));

  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < docs.size(); ++r)
    for (const auto& t : docs[r])
      if (auto it = index.find(t); it != index.end())
        trip.emplace_back(static_cast<int>(r), it->second, 1.0);
  CountMatrix m(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(terms.size()));
  m.setFromTriplets(trip.begin(), trip.end());  // duplicates are summed
  return m;
}

std::vector<double> chi2_scores(const CountMatrix& counts, std::span<const int> labels, Chi2Mode mode) {
  if (static_cast<std::size_t>(counts.rows()) != labels.size())
    throw Error("chi2_scores: label count does not match rows");
  const auto n = static_cast<double>(labels.size());
  const auto n1 = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw Error("chi2_scores: both classes must be present");

  std::vector<double> obs1(static_cast<std::size_t>(counts.cols()), 0.0);
  std::vector<double> obs0(obs1.size(), 0.0);
  for (Eigen::Index r = 0; r < counts.outerSize(); ++r) {
    auto& target = labels[static_cast<std::size_t>(r)] == 1 ? obs1 : obs0;
    for (CountMatrix::InnerIterator it(counts, r); it; ++it) {
      if (it.value() == 0) continue;
      target[static_cast<std::size_t>(it.col())] += mode == Chi2Mode::Presence ? 1.0 : it.value();
    }
  }
  std::vector<double> out(obs1.size(), 0.0);
  for (std::size_t f = 0; f < out.size(); ++f) {
    const double total = obs1[f] + obs0[f];
    if (total <= 0) continue;
    const double e1 = total * n1 / n;
    const double e0 = total * n0 / n;
    out[f] = (obs1[f] - e1) * (obs1[f] - e1) / e1 + (obs0[f] - e0) * (obs0[f] - e0) / e0;
  }
  return out;
}

std::uint64_t FeatureSelector::id() const {
  if (id_) return *id_;
  std::string blob;
  for (std::size_t i = 0; i < selected.size(); ++i)
    blob += fmt::format("{}\t{}\n", selected[i], i < scale.size() ? scale[i] : 1.0);
  id_ = fingerprint64(blob);
  return *id_;
}

int FeatureSelector::index_of(const std::string& term) const {
  if (index_.size() != selected.size()) {
    index_.clear();
    index_.reserve(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) index_.emplace(selected[i], static_cast<int>(i));
  }
  auto it = index_.find(term);
  return it == index_.end() ? -1 : it->second;
}

void FeatureSelector::set_scale(std::vector<double> s) {
  if (s.size() != selected.size()) throw Error("set_scale: length differs from k");
  scale = std::move(s);
  invalidate();
}

void FeatureSelector::invalidate() {
  index_.clear();
  id_.reset();
}

FeatureSelector select_top_k(const std::vector<std::string>& terms, std::span<const double> scores,
                             std::size_t k) {
  if (terms.size() != scores.size()) throw Error("select_top_k: terms and scores differ in length");
  if (k == 0) throw Error("select_top_k: k must be positive");
  if (k > terms.size())
    throw Error(fmt::format("select_top_k: k = {} exceeds vocabulary size {}", k, terms.size()));
  std::vector<std::size_t> order(terms.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return terms[a] < terms[b];
  });
  FeatureSelector s;
  for (std::size_t i = 0; i < k; ++i) {
    s.selected.push_back(terms[order[i]]);
    s.chi2.push_back(scores[order[i]]);
  }
  s.scale.assign(k, 1.0);
  return s;
}

ScalerFit fit_scaler(const CountMatrix& training_counts) {
  if (training_counts.rows() == 0) throw Error("fit_scaler: empty training set");
  const auto n = static_cast<double>(training_counts.rows());
  const auto k = static_cast<std::size_t>(training_counts.cols());
  std::vector<double> sum(k, 0.0), sumsq(k, 0.0);
  for (Eigen::Index r = 0; r < training_counts.outerSize(); ++r)
    for (CountMatrix::InnerIterator it(training_counts, r); it; ++it) {
      sum[static_cast<std::size_t>(it.col())] += it.value();
      sumsq[static_cast<std::size_t>(it.col())] += it.value() * it.value();
    }
  ScalerFit fit;
  fit.scale.assign(k, 1.0);
  for (std::size_t b = 0; b < k; ++b) {
    const double mean = sum[b] / n;
    const double var = std::max(0.0, sumsq[b] / n - mean * mean);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      ++fit.degenerate;
      continue;
    }
    fit.scale[b] = 1.0 / sd;
  }
  if (fit.degenerate > 0) spdlog::warn("fit_scaler: {} zero-variance feature(s) left unscaled", fit.degenerate);
  return fit;
}

FeatureVector vectorize(std::span<const std::string> terms, const FeatureSelector& selector) {
  std::map<int, double> acc;
  for (const auto& t : terms) {
    int i = selector.index_of(t);
    if (i >= 0) acc[i] += 1.0;
  }
  FeatureVector v;
  v.selector_id = selector.id();
  v.entries.reserve(acc.size());
  for (const auto& [i, c] : acc) v.entries.emplace_back(i, c * selector.scale[static_cast<std::size_t>(i)]);
  return v;
}

FeatureMatrix vectorize_all(std::span<const TermSequence> docs, const FeatureSelector& selector) {
  FeatureMatrix m;
  m.selector_id = selector.id();
  m.X = count_terms(docs, selector.selected);
  for (Eigen::Index r = 0; r < m.X.outerSize(); ++r)
    for (CountMatrix::InnerIterator it(m.X, r); it; ++it)
      it.valueRef() *= selector.scale[static_cast<std::size_t>(it.col())];
  return m;
}

void save_selector(const FeatureSelector& selector, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "#format\tslant-selector-v1\n";
  out << fmt::format("#k\t{}\n#threshold\t{}\n#corpus_hash\t{}\n#id\t{}\n", selector.k(),
                     selector.threshold, selector.corpus_hash.empty() ? "-" : selector.corpus_hash,
                     to_hex64(selector.id()));
  for (std::size_t i = 0; i < selector.k(); ++i)
    out << fmt::format("{}\t{}\t{}\n", selector.selected[i], selector.chi2[i], selector.scale[i]);
}

FeatureSelector load_selector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read selector " + path.string());
  FeatureSelector s;
  std::string line;
  std::size_t k = 0;
  std::string id_hex;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string part;
    while (std::getline(ss, part, '\t')) f.push_back(part);
    if (line.front() == '#') {
      if (f.size() < 2) continue;
      if (f[0] == "#format" && f[1] != "slant-selector-v1") throw Error("unsupported selector format " + f[1]);
      if (f[0] == "#k") k = std::stoull(f[1]);
      if (f[0] == "#threshold") s.threshold = std::stoull(f[1]);
      if (f[0] == "#corpus_hash") s.corpus_hash = f[1] == "-" ? "" : f[1];
      if (f[0] == "#id") id_hex = f[1];
      continue;
    }
    if (f.size() != 3) throw Error("malformed selector line: " + line);
    s.selected.push_back(f[0]);
    s.chi2.push_back(parse_double(f[1], "chi2"));
    s.scale.push_back(parse_double(f[2], "scale"));
  }
  if (s.k() != k) throw Error(fmt::format("selector header says k = {}, file has {}", k, s.k()));
  if (!id_hex.empty() && from_hex64(id_hex) != s.id()) throw Error("selector id does not match its contents");
  s.invalidate();
  return s;
}

}  // namespace slant::features
