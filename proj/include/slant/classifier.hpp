#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slant/features.hpp"

namespace slant::classifier {

using features::CountMatrix;
using features::FeatureMatrix;
using features::FeatureVector;

// SquaredL2: lambda * ||psi||^2 (Ridge). L2Norm: lambda * ||psi||, the
// objective exactly as printed with the unsquared norm.
enum class Penalty { SquaredL2, L2Norm };

struct LogisticModel {
  Eigen::VectorXd psi;
  double intercept = 0;
  bool fit_intercept = true;
  double lambda = 0;
  Penalty penalty = Penalty::SquaredL2;
  std::size_t train_size = 0;
  std::uint64_t selector_id = 0;
  bool converged = false;
  int iterations = 0;
  double initial_loss = 0;
  double final_loss = 0;
};

struct LossGradient {
  double loss = 0;
  Eigen::VectorXd grad_psi;
  double grad_intercept = 0;  // zero when the intercept is not fitted

  double norm() const;
};

/// Penalized mean log-loss and its exact gradient. The intercept is never
/// penalized. For L2Norm at psi = 0 the penalty contributes the zero subgradient.
/// Throws on non-finite features or mismatched dimensions.
LossGradient loss_and_gradient(const LogisticModel& model, const CountMatrix& X, std::span<const int> y);

struct TrainOptions {
  double lambda = 0;
  double tol = 1e-8;
  int max_iter = 1000;
  bool fit_intercept = true;
  Penalty penalty = Penalty::SquaredL2;
};

/// Damped Newton from psi = 0, intercept = 0. Stops when the gradient norm is
/// below tol; otherwise returns the last iterate with converged = false.
LogisticModel train(const CountMatrix& X, std::span<const int> y, const TrainOptions& options);
LogisticModel train(const FeatureMatrix& X, std::span<const int> y, const TrainOptions& options);

struct CvResult {
  double best_lambda = 0;
  std::vector<double> lambdas;                    // ascending
  std::vector<double> mean_accuracy;              // per lambda
  std::vector<std::vector<double>> fold_accuracy;  // per lambda, per fold
};

/// Stratified k-fold grid search. Highest mean accuracy wins; ties go to the
/// smaller lambda. Throws if a fold would lack either class.
CvResult cross_validate(const CountMatrix& X, std::span<const int> y, std::vector<double> lambda_grid,
                        int folds, std::uint64_t seed, const TrainOptions& base);

double sigmoid(double z);

/// Throws slant::Error when the vector was built with a different selector.
double predict_proba(const LogisticModel& model, const FeatureVector& x);
Eigen::VectorXd predict_proba(const LogisticModel& model, const FeatureMatrix& X);
Eigen::VectorXd predict_proba(const LogisticModel& model, const CountMatrix& X);

struct CalibrationBin {
  double lower = 0;
  double upper = 0;
  double mean_prediction = 0;
  double rate = 0;
  std::size_t count = 0;
  bool empty = true;
};

inline constexpr std::size_t kCalibrationBins = 20;

struct EvalReport {
  double accuracy = 0;
  std::vector<double> fold_accuracies;
  // confusion[actual][predicted], index 0 = CNN/MSNBC, 1 = FNC.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::array<CalibrationBin, kCalibrationBins> calibration{};
};

/// Class FNC iff p > 0.5; calibration bins [0.05 i, 0.05 (i+1)).
EvalReport evaluate(std::span<const double> probabilities, std::span<const int> y);
EvalReport evaluate(const LogisticModel& model, const FeatureMatrix& X, std::span<const int> y);

/// Terms paired with their coefficient, most FNC-predictive first.
std::vector<std::pair<std::string, double>> rank_features(const LogisticModel& model,
                                                           const features::FeatureSelector& selector);

/// Header lines ('#key<TAB>value') then "term<TAB>psi" per selected feature.
void save_model(const LogisticModel& model, const features::FeatureSelector& selector,
                const std::filesystem::path& path);
/// Checks that the file's terms and selector id match `selector`.
LogisticModel load_model(const std::filesystem::path& path, const features::FeatureSelector& selector);

}  // namespace slant::classifier
