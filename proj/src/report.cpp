#include <algorithm>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/csv.hpp"
#include "slant/error.hpp"
#include "slant/hashing.hpp"
#include "slant/pipeline.hpp"

namespace slant::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> weight_balanced_bins(std::span<const double> x, std::span<const double> w, std::size_t bins) {
  if (x.size() != w.size()) throw Error("binscatter: x and weight lengths differ");
  if (bins == 0) throw ValidationError("binscatter needs at least one bin");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> bin(x.size(), 0);
  double cum = 0;
  for (auto i : order) {
    const double mid = cum + 0.5 * w[i];
    cum += w[i];
    const auto b = total > 0 ? static_cast<std::size_t>(mid / total * static_cast<double>(bins)) : 0;
    bin[i] = std::min(b, bins - 1);
  }
  return bin;
}

std::vector<BinscatterPoint> binscatter(const econometrics::Table& table, const Binscatter& spec) {
  econometrics::RegressionSpec rs;
  rs.name = spec.name;
  rs.kind = econometrics::Kind::Ols;
  rs.outcome = spec.y;
  rs.endogenous = spec.x;
  rs.instruments.clear();
  rs.clusters.clear();
  rs.fe = spec.fe;
  rs.controls = spec.controls;
  rs.weight = spec.weight;
  rs.standardize = spec.standardize;
  const auto d = econometrics::make_design(table, rs);
  // residualize drops the x column, so this projects out FE and controls only
  const Eigen::VectorXd ry = econometrics::residualize(d, d.y);
  const Eigen::VectorXd rx = econometrics::residualize(d, d.endog.col(0));
  const auto n = static_cast<std::size_t>(rx.size());
  const auto bin = weight_balanced_bins(std::span<const double>(rx.data(), n), std::span<const double>(d.w.data(), n), spec.bins);
  std::vector<BinscatterPoint> pts(spec.bins);
  for (std::size_t b = 0; b < spec.bins; ++b) pts[b].bin = b;
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = pts[bin[i]];
    const double wi = d.w[static_cast<Eigen::Index>(i)];
    p.x += wi * rx[static_cast<Eigen::Index>(i)];
    p.y += wi * ry[static_cast<Eigen::Index>(i)];
    p.weight += wi;
    ++p.count;
  }
  std::vector<BinscatterPoint> out;
  for (auto& p : pts) {
    if (p.count == 0) continue;
    p.x /= p.weight;
    p.y /= p.weight;
    out.push_back(p);
  }
  return out;
}

void cmd_report(const PipelineConfig& c) {
  const auto trn = stage_dir(c, "train");
  if (!fs::exists(trn / "manifest.json")) throw Error("missing output of stage 'train'; run `slant train` first");
  const auto dir = stage_dir(c, "report");
  fs::create_directories(dir);
  std::vector<fs::path> outputs;

  std::ifstream in(trn / "eval.json");
  const json ev = json::parse(in);
  {
    std::ofstream out(dir / "calibration.csv");
    out << csv_line({"bin", "lower", "upper", "mean_prediction", "rate", "count"});
    std::size_t i = 0;
    for (const auto& b : ev.at("calibration")) {
      const bool empty = b.at("empty").get<bool>();
      out << csv_line({std::to_string(i++), format_double(b.at("lower").get<double>()), format_double(b.at("upper").get<double>()),
                       empty ? "" : format_double(b.at("mean_prediction").get<double>()),
                       empty ? "" : format_double(b.at("rate").get<double>()), std::to_string(b.at("count").get<std::size_t>())});
    }
    outputs.push_back(dir / "calibration.csv");
  }
  {
    std::ofstream out(dir / "confusion.csv");
    out << csv_line({"actual", "predicted_cnn_msnbc", "predicted_fnc"});
    const auto& cm = ev.at("confusion");
    out << csv_line({"cnn_msnbc", std::to_string(cm[0][0].get<std::size_t>()), std::to_string(cm[0][1].get<std::size_t>())});
    out << csv_line({"fnc", std::to_string(cm[1][0].get<std::size_t>()), std::to_string(cm[1][1].get<std::size_t>())});
    outputs.push_back(dir / "confusion.csv");
  }
  {
    const auto selector = features::load_selector(trn / "selector.tsv");
    const auto model = classifier::load_model(trn / "model.tsv", selector);
    const auto ranked = classifier::rank_features(model, selector);
    const std::size_t n = std::min(c.top_bigrams, ranked.size() / 2);
    std::ofstream out(dir / "distinctive_bigrams.csv");
    out << csv_line({"channel", "rank", "term", "coefficient"});
    for (std::size_t i = 0; i < n; ++i) out << csv_line({"fnc", std::to_string(i + 1), ranked[i].first, format_double(ranked[i].second)});
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = ranked[ranked.size() - 1 - i];
      out << csv_line({"cnn_msnbc", std::to_string(i + 1), r.first, format_double(r.second)});
    }
    outputs.push_back(dir / "distinctive_bigrams.csv");
  }
  if (fs::exists(stage_dir(c, "score") / "manifest.json") && !c.binscatters.empty()) {
    const auto table = assemble_panel(c);
    for (const auto& b : c.binscatters) {
      const auto pts = binscatter(table, b);
      const auto path = dir / fmt::format("binscatter_{}.csv", b.name);
      std::ofstream out(path);
      out << csv_line({"bin", "x", "y", "weight", "count"});
      for (const auto& p : pts)
        out << csv_line({std::to_string(p.bin), format_double(p.x), format_double(p.y), format_double(p.weight), std::to_string(p.count)});
      outputs.push_back(path);
    }
  } else {
    spdlog::warn("report: no score stage output; skipping binscatters");
  }
  json manifest;
  manifest["command"] = "report";
  manifest["version"] = std::string(kVersion);
  manifest["seed"] = c.seed;
  manifest["config_hash"] = sha256_hex(c.raw.dump());
  manifest["inputs"] = {{"eval", sha256_file(trn / "eval.json")}, {"model", sha256_file(trn / "model.tsv")}};
  json outs = json::object();
  for (const auto& p : outputs) outs[p.filename().string()] = sha256_file(p);
  manifest["outputs"] = outs;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  spdlog::info("report: wrote {} file(s) to {}", outputs.size(), dir.string());
}

}  // namespace slant::pipeline
