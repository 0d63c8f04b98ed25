#pragma once

// Binary classifiers over dense features: L2-regularized logistic regression
// (SGD) and a one-hidden-layer ReLU network (Adam), plus evaluation.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chronoshift {

enum class ModelKind { kLogReg, kMlp };

struct LogRegConfig {
  double lr = 0.05;
  int epochs = 100;
  double l2 = 1e-3;
  std::uint64_t seed = 1;
};

struct MlpConfig {
  int hidden = 100;
  double lr = 1e-3;
  int epochs = 100;
  int batch = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

struct TrainConfig {
  LogRegConfig logreg;
  MlpConfig mlp;
};

// Per-column z-scoring of selected columns, fitted on training rows only.
struct FeatureScaler {
  std::vector<Eigen::Index> columns;
  std::vector<double> mean;
  std::vector<double> sd;

  static FeatureScaler fit(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& columns);
  void apply(Eigen::MatrixXd& x) const;
  void apply(Eigen::VectorXd& row) const;
};

struct MlpParams {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;
};

struct ClassifierModel {
  ModelKind kind = ModelKind::kLogReg;
  Eigen::Index input_dim = 0;
  FeatureScaler scaler;
  Eigen::VectorXd weights;  // logreg
  double bias = 0.0;        // logreg
  MlpParams mlp;
};

double sigmoid(double x);

// Mean binary cross-entropy + 0.5 * l2 * ||w||^2 (biases unpenalized) and its
// gradient, on already-scaled features.
double logreg_loss(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y, double l2, Eigen::VectorXd* grad_w = nullptr,
                   double* grad_b = nullptr);
double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2,
                MlpParams* grad = nullptr);

// `scaled_columns` are z-scored with statistics from `x`. Throws on a
// single-class label vector; the MLP throws numerical if the loss diverges.
ClassifierModel train_logreg(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const LogRegConfig& config,
                             const std::vector<Eigen::Index>& scaled_columns = {});
ClassifierModel train_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpConfig& config,
                          const std::vector<Eigen::Index>& scaled_columns = {});
ClassifierModel train_model(ModelKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const TrainConfig& config, const std::vector<Eigen::Index>& scaled_columns = {});

// Probability of the positive class for raw (unscaled) features.
double predict(const ClassifierModel& model, const Eigen::VectorXd& features);
Eigen::VectorXd predict_batch(const ClassifierModel& model, const Eigen::MatrixXd& x);

// Rank-based AUC; tied scores share their average rank.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fold id per example: each class is shuffled with `seed` then dealt round-robin.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);

struct FoldMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
};

struct EvalReport {
  ModelKind kind = ModelKind::kLogReg;
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldMetrics> per_fold;
  FoldMetrics mean;
};

// Metrics at threshold 0.5; precision is 0 when nothing is predicted positive.
FoldMetrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels);

EvalReport cross_validate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, ModelKind kind,
                          const TrainConfig& config, int folds, std::uint64_t seed,
                          const std::vector<Eigen::Index>& scaled_columns = {});

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Binary payload (kind, dims, scaler, weights) used inside model files.
void write_classifier(std::ostream& out, const ClassifierModel& model);
ClassifierModel read_classifier(std::istream& in);

}  // namespace chronoshift
