#include <iostream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "slant/error.hpp"
#include "slant/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Measure outlet slant from text and estimate its response to cable news exposure"};
  app.set_version_flag("--version", std::string(slant::pipeline::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();

  const std::vector<std::pair<std::string, std::string>> commands{
      {"prepare", "segment transcripts and articles, balance the training sample"},
      {"train", "select features, tune and fit the classifier, evaluate on the test split"},
      {"topics", "fit the topic model on articles and classify locality"},
      {"score", "score newspaper snippets and aggregate outlet slant"},
      {"regress", "build the panel and run the regression table"},
      {"report", "calibration, confusion, distinctive bigrams and binscatters"},
      {"simulate", "write a synthetic corpus and panel with known ground truth"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config key, e.g. --set classifier.folds=10");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    const auto config = slant::pipeline::load_config(config_path, overrides);
    slant::pipeline::run_command(app.get_subcommands().front()->get_name(), config);
  } catch (const slant::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
