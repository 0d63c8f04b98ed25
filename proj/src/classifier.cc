#include "chronoshift/classifier.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_training_set(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Require(x.rows() == y.size() && x.rows() > 0, errc::kInvalidArgument,
          "training set: feature rows and labels differ in count or are empty");
  Require(x.allFinite(), errc::kNumerical, "training set has non-finite features");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Require(y(i) == 0.0 || y(i) == 1.0, errc::kInvalidArgument, "labels must be 0 or 1");
    (y(i) == 1.0 ? pos : neg) = true;
  }
  Require(pos && neg, errc::kInvalidArgument, "training set contains a single class");
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  Require(static_cast<bool>(in), errc::kFormat, "truncated classifier payload");
  return value;
}

void put_doubles(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) put<double>(out, data[i]);
}

void get_doubles(std::istream& in, double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = get<double>(in);
}

struct Adam {
  explicit Adam(double lr) : lr(lr) {}
  void step(Eigen::Ref<Eigen::VectorXd> param, const Eigen::VectorXd& grad, Eigen::VectorXd& m,
            Eigen::VectorXd& v) const {
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
  double lr;
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int t = 0;
};

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& columns) {
  FeatureScaler s;
  s.columns = columns;
  for (auto c : columns) {
    Require(c >= 0 && c < x.cols(), errc::kInvalidArgument, "scaled column out of range");
    const double m = x.col(c).mean();
    const double var = (x.col(c).array() - m).square().mean();
    s.mean.push_back(m);
    s.sd.push_back(var > 0 ? std::sqrt(var) : 1.0);
  }
  return s;
}

void FeatureScaler::apply(Eigen::MatrixXd& x) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    x.col(columns[i]) = (x.col(columns[i]).array() - mean[i]) / sd[i];
}

void FeatureScaler::apply(Eigen::VectorXd& row) const {
  for (std::size_t i = 0; i < columns.size(); ++i) row(columns[i]) = (row(columns[i]) - mean[i]) / sd[i];
}

double logreg_loss(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   double l2, Eigen::VectorXd* grad_w, double* grad_b) {
  const Eigen::VectorXd z = (x * w).array() + b;
  const double n = static_cast<double>(x.rows());
  double loss = 0.0;
  Eigen::VectorXd dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += softplus(z(i)) - y(i) * z(i);
    dz(i) = (sigmoid(z(i)) - y(i)) / n;
  }
  loss = loss / n + 0.5 * l2 * w.squaredNorm();
  if (grad_w) *grad_w = x.transpose() * dz + l2 * w;
  if (grad_b) *grad_b = dz.sum();
  return loss;
}

double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2,
                MlpParams* grad) {
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd z = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
  const Eigen::MatrixXd h = z.cwiseMax(0.0);
  const Eigen::VectorXd logit = (h * p.w2).array() + p.b2;
  double loss = 0.0;
  Eigen::VectorXd dlogit(logit.size());
  for (Eigen::Index i = 0; i < logit.size(); ++i) {
    loss += softplus(logit(i)) - y(i) * logit(i);
    dlogit(i) = (sigmoid(logit(i)) - y(i)) / n;
  }
  loss = loss / n + 0.5 * l2 * (p.w1.squaredNorm() + p.w2.squaredNorm());
  if (grad) {
    grad->w2 = h.transpose() * dlogit + l2 * p.w2;
    grad->b2 = dlogit.sum();
    const Eigen::MatrixXd dz = ((dlogit * p.w2.transpose()).array() * (z.array() > 0.0).cast<double>()).matrix();
    grad->w1 = dz.transpose() * x + l2 * p.w1;
    grad->b1 = dz.colwise().sum().transpose();
  }
  return loss;
}

ClassifierModel train_logreg(const Eigen::MatrixXd& x_raw, const Eigen::VectorXd& y,
                             const LogRegConfig& config, const std::vector<Eigen::Index>& scaled_columns) {
  check_training_set(x_raw, y);
  Require(config.lr > 0 && config.epochs >= 0 && config.l2 >= 0, errc::kConfig,
          "logreg config: lr must be > 0, epochs and l2 >= 0");
  ClassifierModel model;
  model.kind = ModelKind::kLogReg;
  model.input_dim = x_raw.cols();
  model.scaler = FeatureScaler::fit(x_raw, scaled_columns);
  Eigen::MatrixXd x = x_raw;
  model.scaler.apply(x);

  model.weights = Eigen::VectorXd::Zero(x.cols());
  std::mt19937_64 rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (auto i : shuffled(x.rows(), rng)) {
      const double g = sigmoid(x.row(i).dot(model.weights) + model.bias) - y(i);
      // Proximal step for the L2 term keeps the update stable for any l2.
      model.weights = (model.weights - config.lr * g * x.row(i).transpose()) / (1.0 + config.lr * config.l2);
      model.bias -= config.lr * g;
    }
  }
  Require(model.weights.allFinite() && std::isfinite(model.bias), errc::kNumerical,
          "logreg training diverged");
  return model;
}

ClassifierModel train_mlp(const Eigen::MatrixXd& x_raw, const Eigen::VectorXd& y, const MlpConfig& config,
                          const std::vector<Eigen::Index>& scaled_columns) {
  check_training_set(x_raw, y);
  Require(config.hidden >= 1 && config.lr > 0 && config.epochs >= 0 && config.batch >= 1 && config.l2 >= 0,
          errc::kConfig, "mlp config: hidden, batch >= 1; lr > 0; epochs, l2 >= 0");
  ClassifierModel model;
  model.kind = ModelKind::kMlp;
  model.input_dim = x_raw.cols();
  model.scaler = FeatureScaler::fit(x_raw, scaled_columns);
  Eigen::MatrixXd x = x_raw;
  model.scaler.apply(x);

  const Eigen::Index in = x.cols(), hid = config.hidden;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpParams& p = model.mlp;
  p.w1.resize(hid, in);
  const double s1 = std::sqrt(2.0 / static_cast<double>(in));
  for (Eigen::Index i = 0; i < hid; ++i)
    for (Eigen::Index j = 0; j < in; ++j) p.w1(i, j) = s1 * normal(rng);
  p.b1 = Eigen::VectorXd::Zero(hid);
  p.w2.resize(hid);
  const double s2 = std::sqrt(1.0 / static_cast<double>(hid));
  for (Eigen::Index i = 0; i < hid; ++i) p.w2(i) = s2 * normal(rng);
  p.b2 = 0.0;

  Adam adam(config.lr);
  Eigen::VectorXd m_w1 = Eigen::VectorXd::Zero(hid * in), v_w1 = m_w1;
  Eigen::VectorXd m_b1 = Eigen::VectorXd::Zero(hid), v_b1 = m_b1, m_w2 = m_b1, v_w2 = m_b1;
  Eigen::VectorXd m_b2 = Eigen::VectorXd::Zero(1), v_b2 = m_b2;
  MlpParams g;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(x.rows(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      Eigen::MatrixXd xb(end - start, in);
      Eigen::VectorXd yb(end - start);
      for (std::size_t r = start; r < end; ++r) {
        xb.row(r - start) = x.row(order[r]);
        yb(r - start) = y(order[r]);
      }
      epoch_loss += mlp_loss(p, xb, yb, config.l2, &g) * static_cast<double>(end - start);
      ++adam.t;
      adam.step(Eigen::Map<Eigen::VectorXd>(p.w1.data(), p.w1.size()),
                Eigen::Map<const Eigen::VectorXd>(g.w1.data(), g.w1.size()), m_w1, v_w1);
      adam.step(p.b1, g.b1, m_b1, v_b1);
      adam.step(p.w2, g.w2, m_w2, v_w2);
      Eigen::VectorXd b2(1), gb2(1);
      b2(0) = p.b2;
      gb2(0) = g.b2;
      adam.step(b2, gb2, m_b2, v_b2);
      p.b2 = b2(0);
    }
    Require(std::isfinite(epoch_loss), errc::kNumerical,
            "mlp training diverged at epoch " + std::to_string(epoch) + " (loss is not finite)");
  }
  return model;
}

ClassifierModel train_model(ModelKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const TrainConfig& config, const std::vector<Eigen::Index>& scaled_columns) {
  return kind == ModelKind::kLogReg ? train_logreg(x, y, config.logreg, scaled_columns)
                                    : train_mlp(x, y, config.mlp, scaled_columns);
}

Eigen::VectorXd predict_batch(const ClassifierModel& model, const Eigen::MatrixXd& x_raw) {
  Require(x_raw.cols() == model.input_dim, errc::kInvalidArgument,
          "feature length " + std::to_string(x_raw.cols()) + " does not match model input " +
              std::to_string(model.input_dim));
  Eigen::MatrixXd x = x_raw;
  model.scaler.apply(x);
  Eigen::VectorXd logit;
  if (model.kind == ModelKind::kLogReg) {
    logit = (x * model.weights).array() + model.bias;
  } else {
    const auto& p = model.mlp;
    const Eigen::MatrixXd h = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
    logit = (h * p.w2).array() + p.b2;
  }
  return logit.unaryExpr([](double z) { return sigmoid(z); });
}

double predict(const ClassifierModel& model, const Eigen::VectorXd& features) {
  return predict_batch(model, features.transpose())(0);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  Require(scores.size() == labels.size(), errc::kInvalidArgument, "auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t r = i; r < j; ++r)
      if (labels[order[r]] == 1) rank_sum += avg_rank;
    i = j;
  }
  for (int l : labels) {
    Require(l == 0 || l == 1, errc::kInvalidArgument, "auc: labels must be 0 or 1");
    pos += l;
  }
  const std::size_t neg = labels.size() - pos;
  Require(pos > 0 && neg > 0, errc::kInvalidArgument, "auc: both classes must be present");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(neg));
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  Require(folds >= 2, errc::kInvalidArgument, "need at least 2 folds");
  std::vector<int> out(labels.size(), -1);
  std::mt19937_64 rng(seed);
  int next = 0;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    Require(idx.size() >= static_cast<std::size_t>(folds), errc::kInvalidArgument,
            "class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                " examples, fewer than " + std::to_string(folds) + " folds");
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) {
      out[i] = next;
      next = (next + 1) % folds;
    }
  }
  for (int f : out) Require(f >= 0, errc::kInvalidArgument, "labels must be 0 or 1");
  return out;
}

FoldMetrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= 0.5;
    if (predicted && labels[i] == 1) ++tp;
    else if (predicted) ++fp;
    else if (labels[i] == 1) ++fn;
    else ++tn;
  }
  FoldMetrics m;
  const double n = static_cast<double>(labels.size());
  m.accuracy = static_cast<double>(tp + tn) / n;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.auc = auc(probabilities, labels);
  return m;
}

EvalReport cross_validate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, ModelKind kind,
                          const TrainConfig& config, int folds, std::uint64_t seed,
                          const std::vector<Eigen::Index>& scaled_columns) {
  Require(x.rows() == y.size(), errc::kInvalidArgument, "cross validation: rows and labels differ");
  std::vector<int> labels(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) labels[i] = static_cast<int>(y(i));
  const auto assignment = stratified_folds(labels, folds, seed);

  EvalReport report;
  report.kind = kind;
  report.folds = folds;
  report.seed = seed;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (std::size_t i = 0; i < assignment.size(); ++i) (assignment[i] == f ? test : train).push_back(i);
    const Eigen::MatrixXd xtr = x(train, Eigen::all), xte = x(test, Eigen::all);
    const Eigen::VectorXd ytr = y(train);
    const ClassifierModel model = train_model(kind, xtr, ytr, config, scaled_columns);
    const Eigen::VectorXd p = predict_batch(model, xte);
    std::vector<double> probs(p.data(), p.data() + p.size());
    std::vector<int> truth;
    for (auto i : test) truth.push_back(labels[i]);
    report.per_fold.push_back(evaluate(probs, truth));
  }
  for (const auto& m : report.per_fold) {
    report.mean.accuracy += m.accuracy / folds;
    report.mean.precision += m.precision / folds;
    report.mean.recall += m.recall / folds;
    report.mean.f1 += m.f1 / folds;
    report.mean.auc += m.auc / folds;
  }
  return report;
}

std::string to_string(ModelKind kind) { return kind == ModelKind::kLogReg ? "logreg" : "mlp"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "logreg") return ModelKind::kLogReg;
  if (name == "mlp") return ModelKind::kMlp;
  throw Error(errc::kInvalidArgument, "unknown model kind '" + name + "' (expected logreg or mlp)");
}

void write_classifier(std::ostream& out, const ClassifierModel& model) {
  put<std::uint8_t>(out, model.kind == ModelKind::kLogReg ? 0 : 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.scaler.columns.size()));
  for (std::size_t i = 0; i < model.scaler.columns.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.scaler.columns[i]));
    put<double>(out, model.scaler.mean[i]);
    put<double>(out, model.scaler.sd[i]);
  }
  if (model.kind == ModelKind::kLogReg) {
    put_doubles(out, model.weights.data(), model.weights.size());
    put<double>(out, model.bias);
  } else {
    const auto& p = model.mlp;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.w1.rows()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w1 = p.w1;
    put_doubles(out, w1.data(), w1.size());
    put_doubles(out, p.b1.data(), p.b1.size());
    put_doubles(out, p.w2.data(), p.w2.size());
    put<double>(out, p.b2);
  }
}

ClassifierModel read_classifier(std::istream& in) {
  ClassifierModel model;
  const auto kind = get<std::uint8_t>(in);
  Require(kind <= 1, errc::kFormat, "unknown classifier kind tag " + std::to_string(kind));
  model.kind = kind == 0 ? ModelKind::kLogReg : ModelKind::kMlp;
  model.input_dim = get<std::uint32_t>(in);
  const auto ncols = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < ncols; ++i) {
    model.scaler.columns.push_back(get<std::uint32_t>(in));
    model.scaler.mean.push_back(get<double>(in));
    model.scaler.sd.push_back(get<double>(in));
  }
  if (model.kind == ModelKind::kLogReg) {
    model.weights.resize(model.input_dim);
    get_doubles(in, model.weights.data(), model.input_dim);
    model.bias = get<double>(in);
  } else {
    auto& p = model.mlp;
    const auto hidden = get<std::uint32_t>(in);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w1(hidden, model.input_dim);
    get_doubles(in, w1.data(), w1.size());
    p.w1 = w1;
    p.b1.resize(hidden);
    get_doubles(in, p.b1.data(), hidden);
    p.w2.resize(hidden);
    get_doubles(in, p.w2.data(), hidden);
    p.b2 = get<double>(in);
  }
  return model;
}

}  // namespace chronoshift
