#include "rsma/nn.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "rsma/errors.hpp"

namespace rsma {

namespace {

constexpr std::array<char, 8> kCheckpointMagic = {'R', 'S', 'M', 'A',
                                                  'N', 'E', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

Mlp::Mlp(const std::vector<Eigen::Index>& sizes, Eigen::Index offset) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("Mlp: need at least input and output sizes");
  }
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer layer;
    layer.in = sizes[i];
    layer.out = sizes[i + 1];
    layer.weight_offset = offset;
    layer.bias_offset = offset + layer.in * layer.out;
    offset += layer.size();
    layers_.push_back(layer);
  }
}

Eigen::Index Mlp::size() const {
  Eigen::Index total = 0;
  for (const auto& layer : layers_) total += layer.size();
  return total;
}

Eigen::Index Mlp::end_offset() const {
  return layers_.empty() ? 0 : layers_.back().bias_offset + layers_.back().out;
}

MatrixXd Mlp::forward(const VectorXd& theta, const MatrixXd& x,
                      Tape* tape) const {
  if (x.rows() != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input has " +
                                std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  }
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->inputs.reserve(layers_.size());
  }
  MatrixXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& layer = layers_[i];
    if (tape != nullptr) tape->inputs.push_back(h);
    MatrixXd z = layer.weight(theta) * h;
    z.colwise() += layer.bias(theta);
    const bool last = i + 1 == layers_.size();
    h = (last && !activate_last_) ? std::move(z) : MatrixXd(z.array().tanh());
  }
  if (tape != nullptr) {
    tape->output = h;
    tape->recorded = true;
  }
  return h;
}

MatrixXd Mlp::backward(const VectorXd& theta, const Tape& tape,
                       const MatrixXd& d_output, VectorXd& grad) const {
  if (!tape.recorded) {
    throw UsageError("Mlp::backward called without a recorded forward pass");
  }
  MatrixXd delta = d_output;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const DenseLayer& layer = layers_[idx];
    const bool last = idx + 1 == layers_.size();
    if (!last || activate_last_) {
      // tanh' = 1 - y^2, where y is this layer's output.
      const MatrixXd& y = (idx + 1 < layers_.size()) ? tape.inputs[idx + 1]
                                                     : tape.output;
      delta.array() *= 1.0 - y.array().square();
    }
    const MatrixXd& input = tape.inputs[idx];
    layer.weight(grad) += delta * input.transpose();
    layer.bias(grad) += delta.rowwise().sum();
    delta = layer.weight(theta).transpose() * delta;
  }
  return delta;
}

void Mlp::initialize(VectorXd& theta, Rng& rng, double last_layer_gain) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& layer = layers_[i];
    const bool last = i + 1 == layers_.size();
    const double scale = (last ? last_layer_gain : 1.0) /
                         std::sqrt(static_cast<double>(layer.in));
    auto w = layer.weight(theta);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * rng.normal();
    }
    layer.bias(theta).setZero();
  }
}

PolicyValueNet::PolicyValueNet(const NetArchitecture& arch, Rng& rng)
    : arch_(arch) {
  if (arch.observation_dim < 1 || arch.action_dim < 1) {
    throw std::invalid_argument("PolicyValueNet: dimensions must be positive");
  }
  Eigen::Index offset = 0;
  std::vector<Eigen::Index> trunk_sizes = {arch.observation_dim};
  trunk_sizes.insert(trunk_sizes.end(), arch.hidden.begin(), arch.hidden.end());
  const Eigen::Index features = trunk_sizes.back();
  if (!arch.hidden.empty()) {
    policy_trunk_ = Mlp(trunk_sizes, offset);
    policy_trunk_.set_activate_last(true);
    offset += policy_trunk_.size();
    if (!arch.shared_trunk) {
      value_trunk_ = Mlp(trunk_sizes, offset);
      value_trunk_.set_activate_last(true);
      offset += value_trunk_.size();
    }
  }
  mean_head_ = Mlp({features, arch.action_dim}, offset);
  offset += mean_head_.size();
  value_head_ = Mlp({features, 1}, offset);
  offset += value_head_.size();
  log_std_offset_ = offset;
  params_ = VectorXd::Zero(offset + arch.action_dim);

  if (!policy_trunk_.layers().empty()) policy_trunk_.initialize(params_, rng, 1.0);
  if (!value_trunk_.layers().empty()) value_trunk_.initialize(params_, rng, 1.0);
  // Small mean head so the initial policy is close to uniform on the simplex.
  mean_head_.initialize(params_, rng, 0.01);
  value_head_.initialize(params_, rng, 1.0);
  params_.segment(log_std_offset_, arch.action_dim).setConstant(arch.init_log_std);
}

void PolicyValueNet::set_params(const VectorXd& params) {
  if (params.size() != params_.size()) {
    throw std::invalid_argument("set_params: size mismatch");
  }
  params_ = params;
}

NetOutput PolicyValueNet::forward(const MatrixXd& observations,
                                  Tape* tape) const {
  if (observations.rows() != arch_.observation_dim) {
    throw std::invalid_argument(
        "PolicyValueNet::forward: observation has " +
        std::to_string(observations.rows()) + " entries, expected " +
        std::to_string(arch_.observation_dim));
  }
  const bool has_trunk = !policy_trunk_.layers().empty();
  Mlp::Tape* pt = tape ? &tape->policy_trunk : nullptr;
  Mlp::Tape* vt = tape ? &tape->value_trunk : nullptr;
  const MatrixXd policy_features =
      has_trunk ? policy_trunk_.forward(params_, observations, pt) : observations;
  MatrixXd value_features;
  if (has_trunk && !arch_.shared_trunk) {
    value_features = value_trunk_.forward(params_, observations, vt);
  }
  const MatrixXd& vf = value_features.size() > 0 ? value_features : policy_features;

  NetOutput out;
  out.mean = mean_head_.forward(params_, policy_features,
                                tape ? &tape->mean_head : nullptr);
  out.value = value_head_.forward(params_, vf, tape ? &tape->value_head : nullptr);
  if (tape != nullptr) tape->recorded = true;
  return out;
}

NetOutput PolicyValueNet::forward(const VectorXd& observation) const {
  return forward(MatrixXd(observation), nullptr);
}

VectorXd PolicyValueNet::backward(const Tape& tape, const MatrixXd& d_mean,
                                  const Eigen::RowVectorXd& d_value) const {
  if (!tape.recorded) {
    throw UsageError("PolicyValueNet::backward called without a recorded forward");
  }
  VectorXd grad = VectorXd::Zero(params_.size());
  MatrixXd d_policy_features =
      mean_head_.backward(params_, tape.mean_head, d_mean, grad);
  MatrixXd d_value_features =
      value_head_.backward(params_, tape.value_head, MatrixXd(d_value), grad);
  if (policy_trunk_.layers().empty()) return grad;
  if (arch_.shared_trunk) {
    d_policy_features += d_value_features;
  } else {
    value_trunk_.backward(params_, tape.value_trunk, d_value_features, grad);
  }
  policy_trunk_.backward(params_, tape.policy_trunk, d_policy_features, grad);
  return grad;
}

double gaussian_log_prob(const VectorXd& mean, const VectorXd& log_std,
                         const VectorXd& sample) {
  if (mean.size() != log_std.size() || mean.size() != sample.size()) {
    throw std::invalid_argument("gaussian_log_prob: shape mismatch");
  }
  if (!log_std.allFinite()) {
    throw std::invalid_argument("gaussian_log_prob: non-finite log std");
  }
  const VectorXd z = (sample - mean).cwiseQuotient(log_std.array().exp().matrix());
  return -0.5 * z.squaredNorm() - log_std.sum() -
         kHalfLog2Pi * static_cast<double>(mean.size());
}

double gaussian_entropy(const VectorXd& log_std) {
  return log_std.sum() +
         (0.5 + kHalfLog2Pi) * static_cast<double>(log_std.size());
}

VectorXd sample_gaussian(const VectorXd& mean, const VectorXd& log_std,
                         Rng& rng) {
  VectorXd out(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    out(i) = mean(i) + std::exp(log_std(i)) * rng.normal();
  }
  return out;
}

Adam::Adam(AdamConfig config, Eigen::Index size, bool plain_sgd)
    : config_(config),
      plain_sgd_(plain_sgd),
      m_(VectorXd::Zero(size)),
      v_(VectorXd::Zero(size)) {}

void Adam::step(VectorXd& theta, const VectorXd& grad) {
  if (grad.size() != theta.size() || m_.size() != theta.size()) {
    throw std::invalid_argument("Adam::step: size mismatch");
  }
  if (!grad.allFinite()) {
    throw TrainingDivergenceError("non-finite gradient");
  }
  ++t_;
  if (plain_sgd_) {
    theta -= config_.learning_rate * grad;
  } else {
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double t = static_cast<double>(t_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    const auto m_hat = m_.array() / c1;
    const auto v_hat = v_.array() / c2;
    theta.array() -= config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
  }
  if (!theta.allFinite()) {
    throw TrainingDivergenceError("optimizer step produced non-finite parameters");
  }
}

void Adam::restore(std::int64_t t, VectorXd m, VectorXd v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw std::invalid_argument("Adam::restore: size mismatch");
  }
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

namespace le {

namespace {
template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw std::runtime_error("unexpected end of binary file");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}
}  // namespace

void write_u32(std::ostream& out, std::uint32_t value) { write_le(out, value); }
void write_u64(std::ostream& out, std::uint64_t value) { write_le(out, value); }
void write_f64(std::ostream& out, double value) {
  write_le(out, std::bit_cast<std::uint64_t>(value));
}
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

}  // namespace le

void save_checkpoint(const std::filesystem::path& path,
                     const PolicyValueNet& net, const Adam& adam) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  const NetArchitecture& arch = net.architecture();
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  le::write_u32(out, kCheckpointVersion);
  le::write_u32(out, static_cast<std::uint32_t>(arch.observation_dim));
  le::write_u32(out, static_cast<std::uint32_t>(arch.action_dim));
  le::write_u32(out, arch.shared_trunk ? 1U : 0U);
  le::write_u32(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (Eigen::Index width : arch.hidden) {
    le::write_u32(out, static_cast<std::uint32_t>(width));
  }
  le::write_f64(out, arch.init_log_std);
  le::write_u64(out, static_cast<std::uint64_t>(net.num_params()));
  le::write_u64(out, static_cast<std::uint64_t>(adam.steps()));
  for (const VectorXd* block : {&net.params(), &adam.first_moment(), &adam.second_moment()}) {
    for (Eigen::Index i = 0; i < block->size(); ++i) le::write_f64(out, (*block)(i));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, PolicyValueNet& net,
                     Adam& adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) {
    throw std::runtime_error("not a network checkpoint: " + path.string());
  }
  if (le::read_u32(in) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  NetArchitecture arch;
  arch.observation_dim = le::read_u32(in);
  arch.action_dim = le::read_u32(in);
  arch.shared_trunk = le::read_u32(in) != 0;
  arch.hidden.resize(le::read_u32(in));
  for (auto& width : arch.hidden) width = le::read_u32(in);
  arch.init_log_std = le::read_f64(in);
  const auto count = static_cast<Eigen::Index>(le::read_u64(in));
  const auto steps = static_cast<std::int64_t>(le::read_u64(in));

  Rng scratch(0);
  PolicyValueNet loaded(arch, scratch);
  if (loaded.num_params() != count) {
    throw std::runtime_error("checkpoint parameter count does not match architecture");
  }
  std::array<VectorXd, 3> blocks;
  for (auto& block : blocks) {
    block.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) block(i) = le::read_f64(in);
  }
  loaded.set_params(blocks[0]);
  Adam restored(adam.config(), count, adam.plain_sgd());
  restored.restore(steps, std::move(blocks[1]), std::move(blocks[2]));
  net = std::move(loaded);
  adam = std::move(restored);
}

}  // namespace rsma
