#include "ipakit/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ipakit/error.hpp"
#include "ipakit/random.hpp"

namespace ipakit {

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DataError("mse_loss: shape mismatch");
  if (pred.size() == 0) throw DataError("mse_loss: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

template <typename Scalar>
Adam<Scalar>::Adam(std::vector<std::pair<std::string, Matrix*>> tensors, double learning_rate)
    : tensors_(std::move(tensors)), lr_(learning_rate) {
  for (const auto& [name, m] : tensors_) {
    m_.push_back(Matrix::Zero(m->rows(), m->cols()));
    v_.push_back(Matrix::Zero(m->rows(), m->cols()));
  }
}

template <typename Scalar>
void Adam<Scalar>::step(const std::vector<std::pair<std::string, const Matrix*>>& grads) {
  ++t_;
  const auto b1 = static_cast<Scalar>(kBeta1), b2 = static_cast<Scalar>(kBeta2);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(kBeta1, static_cast<double>(t_)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(kBeta2, static_cast<double>(t_)));
  const auto lr = static_cast<Scalar>(lr_), eps = static_cast<Scalar>(kEpsilon);
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto it = std::find_if(grads.begin(), grads.end(), [&](const auto& g) { return g.first == tensors_[i].first; });
    if (it == grads.end()) continue;
    const Matrix& g = *it->second;
    m_[i] = b1 * m_[i] + (1 - b1) * g;
    v_[i] = b2 * v_[i] + (1 - b2) * g.cwiseProduct(g);
    auto& p = *tensors_[i].second;
    p.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

Eigen::MatrixXf teacher_targets(const std::vector<CorpusPair>& pairs, const TeacherTable& teacher) {
  Eigen::MatrixXf out(static_cast<Eigen::Index>(pairs.size()), teacher.dim());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto* v = teacher.find(pairs[i].text);
    if (!v) throw DataError("no teacher vector for '" + pairs[i].text + "'");
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXf>(v->data(), teacher.dim());
  }
  return out;
}

double evaluate_mse(const StudentModel<float>& model, const std::vector<CorpusPair>& pairs,
                    const TeacherTable& teacher) {
  const Eigen::MatrixXf targets = teacher_targets(pairs, teacher);
  Eigen::MatrixXd pred(targets.rows(), targets.cols());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    pred.row(static_cast<Eigen::Index>(i)) = model.forward(model.encode(pairs[i].pronunciation)).cast<double>();
  return mse_loss(pred, targets.cast<double>());
}

TrainLog train(StudentModel<float>& model, const std::vector<CorpusPair>& train_pairs,
               const TeacherTable& teacher, const std::vector<CorpusPair>& val_pairs,
               const EpochCallback& on_epoch) {
  const StudentConfig& config = model.config();
  config.validate();
  if (train_pairs.empty()) throw DataError("empty training corpus");
  if (static_cast<int>(teacher.dim()) != config.teacher_dim)
    throw DataError("teacher dim " + std::to_string(teacher.dim()) + " does not match model teacher_dim " +
                    std::to_string(config.teacher_dim));

  TrainLog log;
  const Eigen::MatrixXf targets = teacher_targets(train_pairs, teacher);
  std::vector<TokenIds> ids;
  ids.reserve(train_pairs.size());
  for (const auto& p : train_pairs) {
    bool cut = false;
    ids.push_back(model.encode(p.pronunciation, &cut));
    log.truncated += cut;
  }
  if (!val_pairs.empty()) teacher_targets(val_pairs, teacher);

  Adam<float> adam(model.trainable(), config.learning_rate);
  std::seed_seq seq{config.seed, std::uint64_t{1}};
  Rng rng(seq);
  std::vector<std::size_t> order(train_pairs.size());
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<TokenIds> batch;
      Eigen::MatrixXf batch_targets(static_cast<Eigen::Index>(end - start), targets.cols());
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(ids[order[k]]);
        batch_targets.row(static_cast<Eigen::Index>(k - start)) = targets.row(static_cast<Eigen::Index>(order[k]));
      }
      auto grads = model.params().zeros_like();
      const float loss = model.loss_and_gradient(batch, batch_targets, grads);
      if (!std::isfinite(loss))
        throw DataError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                        std::to_string(log.steps + 1));
      std::vector<std::pair<std::string, const Eigen::MatrixXf*>> named_grads;
      for (const auto& [name, m] : grads.named())
        if (model.is_trainable(name)) named_grads.emplace_back(name, m);
      adam.step(named_grads);
      ++log.steps;
      weighted += static_cast<double>(loss) * static_cast<double>(end - start);
    }
    EpochLog entry{epoch, weighted / static_cast<double>(order.size()), std::nullopt};
    if (!val_pairs.empty()) entry.val_mse = evaluate_mse(model, val_pairs, teacher);
    log.epochs.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

GradCheckResult grad_check(StudentModel<double>& model, const std::vector<TokenIds>& batch,
                           const Eigen::MatrixXd& targets, double eps) {
  auto analytic = model.params().zeros_like();
  model.loss_and_gradient(batch, targets, analytic);
  auto scratch = model.params().zeros_like();
  auto loss_at = [&] { return model.loss_and_gradient(batch, targets, scratch); };

  GradCheckResult result;
  auto grads = analytic.named();
  auto params = model.params().named();
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::string& name = params[t].first;
    if (!model.is_trainable(name)) continue;
    Eigen::MatrixXd& p = *params[t].second;
    const Eigen::MatrixXd& ga = *grads[t].second;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double saved = p(i);
      p(i) = saved + eps;
      const double up = loss_at();
      p(i) = saved - eps;
      const double down = loss_at();
      p(i) = saved;
      const double gn = (up - down) / (2 * eps);
      const double err = std::abs(ga(i) - gn) / (std::abs(ga(i)) + std::abs(gn) + 1e-12);
      ++result.checked;
      if (result.worst_index < 0 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace ipakit
