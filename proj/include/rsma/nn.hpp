#ifndef RSMA_NN_HPP_
#define RSMA_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "rsma/rng.hpp"
#include "rsma/types.hpp"

namespace rsma {

// One affine layer y = W x + b inside a flat parameter vector. W is stored
// column-major (out x in) at `weight_offset`, b at `bias_offset`.
struct DenseLayer {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Eigen::Index weight_offset = 0;
  Eigen::Index bias_offset = 0;

  Eigen::Index size() const { return in * out + out; }

  Eigen::Map<const MatrixXd> weight(const VectorXd& theta) const {
    return {theta.data() + weight_offset, out, in};
  }
  Eigen::Map<MatrixXd> weight(VectorXd& theta) const {
    return {theta.data() + weight_offset, out, in};
  }
  Eigen::Map<const VectorXd> bias(const VectorXd& theta) const {
    return {theta.data() + bias_offset, out};
  }
  Eigen::Map<VectorXd> bias(VectorXd& theta) const {
    return {theta.data() + bias_offset, out};
  }
};

// Dense stack with tanh on every layer except the last, which is linear.
// Layers only describe where their parameters live; the values are owned by
// whoever holds the flat vector.
class Mlp {
 public:
  Mlp() = default;
  // Appends layers sized sizes[0] -> sizes[1] -> ... starting at `offset`.
  Mlp(const std::vector<Eigen::Index>& sizes, Eigen::Index offset);

  // Per-layer inputs from the last forward, needed by backward.
  struct Tape {
    std::vector<MatrixXd> inputs;
    MatrixXd output;
    bool recorded = false;
  };

  Eigen::Index input_dim() const { return layers_.front().in; }
  Eigen::Index output_dim() const { return layers_.back().out; }
  Eigen::Index size() const;
  Eigen::Index end_offset() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  bool activate_last() const { return activate_last_; }
  void set_activate_last(bool value) { activate_last_ = value; }

  // Columns of `x` are samples.
  MatrixXd forward(const VectorXd& theta, const MatrixXd& x, Tape* tape) const;

  // Accumulates dL/dtheta into `grad` and returns dL/dx.
  MatrixXd backward(const VectorXd& theta, const Tape& tape,
                    const MatrixXd& d_output, VectorXd& grad) const;

  void initialize(VectorXd& theta, Rng& rng, double last_layer_gain) const;

 private:
  std::vector<DenseLayer> layers_;
  bool activate_last_ = false;
};

struct NetArchitecture {
  Eigen::Index observation_dim = 8;
  Eigen::Index action_dim = 9;
  std::vector<Eigen::Index> hidden = {64, 64};
  // Policy mean and value read from the same trunk when true.
  bool shared_trunk = true;
  double init_log_std = -0.5;

  bool operator==(const NetArchitecture&) const = default;
};

struct NetOutput {
  MatrixXd mean;        // action_dim x batch
  Eigen::RowVectorXd value;  // 1 x batch
};

// Policy mean head, state-value head and a state-independent log-std vector.
//
// Flat parameter order: [policy trunk][value trunk, only when not shared]
// [mean head][value head][log_std].
class PolicyValueNet {
 public:
  struct Tape {
    Mlp::Tape policy_trunk;
    Mlp::Tape value_trunk;
    Mlp::Tape mean_head;
    Mlp::Tape value_head;
    bool recorded = false;
  };

  PolicyValueNet() = default;
  PolicyValueNet(const NetArchitecture& arch, Rng& rng);

  const NetArchitecture& architecture() const { return arch_; }
  Eigen::Index num_params() const { return params_.size(); }
  const VectorXd& params() const { return params_; }
  VectorXd& params() { return params_; }
  void set_params(const VectorXd& params);

  Eigen::Map<const VectorXd> log_std() const {
    return {params_.data() + log_std_offset_, arch_.action_dim};
  }
  Eigen::Index log_std_offset() const { return log_std_offset_; }

  NetOutput forward(const MatrixXd& observations, Tape* tape = nullptr) const;
  NetOutput forward(const VectorXd& observation) const;

  // Gradient of a scalar loss given its partials with respect to the mean
  // and value outputs of the recorded forward. log_std partials are not
  // included; add them at log_std_offset().
  VectorXd backward(const Tape& tape, const MatrixXd& d_mean,
                    const Eigen::RowVectorXd& d_value) const;

 private:
  NetArchitecture arch_;
  VectorXd params_;
  Mlp policy_trunk_;
  Mlp value_trunk_;
  Mlp mean_head_;
  Mlp value_head_;
  Eigen::Index log_std_offset_ = 0;
};

// Diagonal Gaussian log-density in logit space:
//   sum_d -(x_d - m_d)^2 / (2 sigma_d^2) - log sigma_d - log(2 pi) / 2
double gaussian_log_prob(const VectorXd& mean, const VectorXd& log_std,
                         const VectorXd& sample);
double gaussian_entropy(const VectorXd& log_std);
VectorXd sample_gaussian(const VectorXd& mean, const VectorXd& log_std,
                         Rng& rng);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. With beta1 = beta2 = 0 and a large epsilon the
// step degenerates to plain gradient descent scaled by learning_rate/epsilon;
// use plain_sgd for the literal rule.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, Eigen::Index size, bool plain_sgd = false);

  // theta <- theta - step(grad). Throws TrainingDivergenceError on a
  // non-finite gradient or if the update produces a non-finite parameter.
  void step(VectorXd& theta, const VectorXd& grad);

  const AdamConfig& config() const { return config_; }
  bool plain_sgd() const { return plain_sgd_; }
  std::int64_t steps() const { return t_; }
  const VectorXd& first_moment() const { return m_; }
  const VectorXd& second_moment() const { return v_; }
  void restore(std::int64_t t, VectorXd m, VectorXd v);

 private:
  AdamConfig config_;
  bool plain_sgd_ = false;
  VectorXd m_;
  VectorXd v_;
  std::int64_t t_ = 0;
};

// Binary checkpoint, all integers and floats little-endian:
//   char[8]  magic "RSMANET\0"
//   u32      format version (1)
//   u32      observation_dim, action_dim, shared_trunk, hidden layer count
//   u32[n]   hidden layer widths
//   f64      init_log_std
//   u64      parameter count P
//   i64      Adam step count
//   f64[P]   parameters, then Adam first moment, then Adam second moment
void save_checkpoint(const std::filesystem::path& path,
                     const PolicyValueNet& net, const Adam& adam);
void load_checkpoint(const std::filesystem::path& path, PolicyValueNet& net,
                     Adam& adam);

namespace le {
void write_u32(std::ostream& out, std::uint32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
void write_f64(std::ostream& out, double value);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
}  // namespace le

}  // namespace rsma

#endif  // RSMA_NN_HPP_
