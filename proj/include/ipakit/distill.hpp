#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ipakit/lexicon.hpp"
#include "ipakit/student.hpp"
#include "ipakit/teacher_io.hpp"

namespace ipakit {

/// Mean over rows and columns of the squared difference.
double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// Adam with bias correction over a fixed list of tensors.
template <typename Scalar>
class Adam {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Adam(std::vector<std::pair<std::string, Matrix*>> tensors, double learning_rate);

  /// `grads` are looked up by name; tensors without a gradient are left alone.
  void step(const std::vector<std::pair<std::string, const Matrix*>>& grads);
  long steps() const noexcept { return t_; }

 private:
  std::vector<std::pair<std::string, Matrix*>> tensors_;
  std::vector<Matrix> m_, v_;
  double lr_;
  long t_ = 0;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  std::optional<double> val_mse;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t steps = 0;
  std::size_t truncated = 0;  // sequences cut to max_len
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch Adam on the MSE between student outputs and teacher vectors,
/// shuffling the training pairs each epoch from config().seed. Hyperparameters
/// come from model.config(). Throws DataError when a text has no teacher
/// vector or the loss becomes non-finite.
TrainLog train(StudentModel<float>& model, const std::vector<CorpusPair>& train_pairs,
               const TeacherTable& teacher, const std::vector<CorpusPair>& val_pairs = {},
               const EpochCallback& on_epoch = {});

/// Rows of teacher vectors for the pair texts, in order.
Eigen::MatrixXf teacher_targets(const std::vector<CorpusPair>& pairs, const TeacherTable& teacher);

/// MSE of the model's outputs on the pairs against the teacher.
double evaluate_mse(const StudentModel<float>& model, const std::vector<CorpusPair>& pairs,
                    const TeacherTable& teacher);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  std::size_t checked = 0;
};

/// Central finite differences against the analytic gradient for every entry
/// of every trainable tensor; error |ga - gn| / (|ga| + |gn| + 1e-12).
GradCheckResult grad_check(StudentModel<double>& model, const std::vector<TokenIds>& batch,
                           const Eigen::MatrixXd& targets, double eps = 1e-3);

}  // namespace ipakit
