#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "slant/corpus.hpp"
#include "slant/scoring.hpp"

namespace slant::econometrics {

/// fnc - 0.5 (cnn + msnbc); used for both viewership and channel positions.
double relative_measure(double fnc, double cnn, double msnbc);

/// Divides by the sample SD (n-1 divisor) without demeaning. With weights the
/// weighted SD is used instead. Throws on a constant column.
Eigen::VectorXd standardize(const Eigen::VectorXd& column, const Eigen::VectorXd* weights = nullptr);

// One newspaper-county observation.
struct PanelRow {
  std::string outlet_id;
  std::string newspaper;  // outlet name; editions of one paper share it
  std::string county_id;
  std::string state;
  double slant = 0;
  std::optional<double> slant_local;
  std::optional<double> slant_nonlocal;
  std::array<double, 3> viewership{};
  std::array<double, 3> position{};
  std::map<std::string, double> controls;  // NaN marks a missing value
  double circulation = 0;
  std::optional<double> circulation_1995;
  double population = 0;
  double surveyed_households = 0;
  bool headquarters = false;
  corpus::Endorsement endorsement = corpus::Endorsement::None;
  double rep_vote_1996 = std::numeric_limits<double>::quiet_NaN();
};

// Named groups of control columns, expanded from "@demographics" etc.
struct ControlGroups {
  std::vector<std::string> demographics;
  std::vector<std::string> channel;
  std::vector<std::string> language;
  std::vector<std::string> topics;
};

struct Panel {
  std::vector<PanelRow> rows;
  ControlGroups groups;
};

struct PanelOptions {
  std::string vote_column = "rep_vote_1996";
};

/// Joins counties, circulation links, outlets and outlet-level slant (plus
/// optional language and topic covariates) into newspaper-county rows, sorted
/// by (outlet_id, county_id). Links whose outlet has no ALL slant are dropped.
Panel build_panel(const corpus::PanelInputs& inputs, std::span<const scoring::SlantRecord> slants,
                  const std::map<std::string, scoring::LanguageControls>* language = nullptr,
                  const std::map<std::string, Eigen::VectorXd>* topics = nullptr,
                  const PanelOptions& options = {});

// Column store over which regressions are specified.
struct Table {
  std::map<std::string, Eigen::VectorXd> numeric;
  std::map<std::string, std::vector<std::string>> text;
  ControlGroups groups;

  std::size_t rows() const;
  bool has(const std::string& name) const;
  const Eigen::VectorXd& num(const std::string& name) const;
  const std::vector<std::string>& str(const std::string& name) const;
  /// Text view of any column (numbers formatted), used for FE and clusters.
  std::vector<std::string> labels(const std::string& name) const;
  Table select(const std::vector<std::size_t>& rows) const;
};

/// Numeric columns: slant[_local|_nonlocal], viewership[_fnc_cnn|_fnc_msnbc|_fnc|_cnn|_msnbc],
/// the same for position plus position_cnn_msnbc, weights (circulation,
/// circulation_1995, share_surveyed, share_population, unit), headquarters,
/// rep_vote_1996 and every control. Text columns: outlet_id, newspaper,
/// county_id, state, endorsement.
Table panel_table(const Panel& panel);

struct RowFilter {
  std::string column;
  std::optional<std::string> equals;
  std::optional<int> tercile;  // 1..3 over unweighted terciles of the column
};

enum class Kind { Ols, FirstStage, ReducedForm, Tsls, Identification };

std::string_view to_string(Kind k);
Kind parse_kind(std::string_view s);

struct RegressionSpec {
  std::string name;
  Kind kind = Kind::Tsls;
  std::string outcome = "slant";
  std::string endogenous = "viewership";
  std::vector<std::string> instruments{"position"};
  std::optional<std::string> fe = "state";
  std::vector<std::string> controls;  // may contain @group references
  std::string weight = "circulation";
  std::vector<std::string> clusters{"newspaper", "county_id"};
  bool standardize = true;
  bool weighted_sd = false;
  std::vector<RowFilter> filters;
};

RegressionSpec parse_spec(const nlohmann::json& j);
nlohmann::json to_json(const RegressionSpec& spec);

struct FirstStage {
  Eigen::VectorXd delta;  // coefficients on the excluded instruments
  Eigen::MatrixXd cov;
  double f = 0;
};

struct FitResult {
  std::vector<std::string> names;  // slope names; names[0] is the coefficient of interest
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;      // reported: symmetric, PSD after clipping
  Eigen::MatrixXd cov_raw;  // before clipping
  bool clipped = false;
  double theta = 0;
  double se = 0;
  std::optional<FirstStage> first_stage;
  std::map<std::string, double> fixed_effects;  // absorbed group intercepts
  Eigen::VectorXd residuals;
  Eigen::VectorXd fitted;
  std::size_t n = 0;
  std::vector<std::size_t> n_clusters;
  std::size_t dropped = 0;  // listwise deletions
  bool weak = false;        // first-stage F below 10
};

// Estimation inputs after column lookup. Slopes are [endogenous..., exogenous...].
struct Design {
  Eigen::VectorXd y;
  Eigen::MatrixXd endog;       // n x e
  Eigen::MatrixXd exog;        // n x c
  Eigen::MatrixXd instruments; // n x l (tsls only)
  Eigen::VectorXd w;
  std::vector<int> groups;     // FE group per row; all zero means intercept only
  int n_groups = 1;
  std::vector<std::string> group_labels;  // label of each group id
  std::vector<std::string> endog_names, exog_names, instrument_names;
  std::vector<std::vector<int>> clusters;  // one or two id vectors
};

/// Subtracts weighted group means from every column.
Eigen::MatrixXd within(const Eigen::MatrixXd& m, std::span<const int> groups, int n_groups, const Eigen::VectorXd& w);

/// Weighted least squares of y on [endog, exog] with absorbed groups.
FitResult wls(const Design& d);

/// Residuals of v on d.exog with d's absorbed groups and weights.
Eigen::VectorXd residualize(const Design& d, const Eigen::VectorXd& v);

/// Two-stage least squares instrumenting endog with [instruments, exog].
FitResult tsls(const Design& d);

/// Cluster-robust sandwich from bread (R'WR)^-1 and scores w_i r_i u_i.
/// Two dimensions combine as V_A + V_B - V_AB; each component gets
/// G/(G-1) (n-1)/(n-k).
Eigen::MatrixXd cluster_cov(const Eigen::MatrixXd& regressors, const Eigen::MatrixXd& bread,
                            const Eigen::VectorXd& residuals, const Eigen::VectorXd& w,
                            std::span<const std::vector<int>> clusters, std::size_t k);

/// Clusters as dense ids; the intersection of two dimensions.
std::vector<int> encode(std::span<const std::string> labels);
std::vector<int> intersect(std::span<const int> a, std::span<const int> b);

/// Eigenvalues below zero set to zero. Returns whether anything changed.
bool clip_psd(Eigen::MatrixXd& cov);

/// Clustered Wald statistic on the excluded instruments divided by their count.
double first_stage_f(const FitResult& fit);

/// Estimation sample for a spec: filters, listwise deletion, zero weights,
/// optional standardization. Throws ValidationError on unknown columns.
Design make_design(const Table& table, const RegressionSpec& spec, std::size_t* dropped = nullptr);

FitResult run(const Table& table, const RegressionSpec& spec);

struct IdentificationResult {
  FitResult viewership;
  FitResult slant;
};

/// Step 1: WLS of viewership and of slant on the covariates with FE. Step 2:
/// each fitted prediction regressed on the instrument with FE and weights.
FitResult identification_step(const Table& table, const RegressionSpec& spec);
IdentificationResult identification_check(const Table& table, const RegressionSpec& spec);

struct TableRow {
  std::string name;
  Kind kind = Kind::Tsls;
  std::string outcome;
  std::string regressor;
  FitResult fit;
};

std::vector<TableRow> run_table(const Table& table, std::span<const RegressionSpec> specs);
void write_table_csv(const std::filesystem::path& path, std::span<const TableRow> rows);
void write_table_json(const std::filesystem::path& path, std::span<const TableRow> rows);

}  // namespace slant::econometrics
