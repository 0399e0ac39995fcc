#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "oculorl/env.hpp"

namespace oculorl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LayerActivation { Relu = 0, Linear = 1, ActionMap = 2 };

struct LayerShape {
  int in = 0;
  int out = 0;
  LayerActivation activation = LayerActivation::Relu;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Weights and biases of a fully connected network, stored contiguously so
/// optimizers, soft updates and checkpoints work on one flat array. Layer i
/// holds an (out x in) column-major weight block followed by its bias.
class NetParams {
 public:
  NetParams() = default;
  /// Zero-initialized. Throws ShapeMismatch if consecutive layers do not chain.
  explicit NetParams(std::vector<LayerShape> layers);

  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  int input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_size() const { return layers_.empty() ? 0 : layers_.back().out; }

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::size_t size() const { return data_.size(); }

  bool same_shape(const NetParams& other) const { return layers_ == other.layers_; }
  void set_zero();
  /// Uniform in +/- 1/sqrt(fan_in) for every layer; the final layer is then
  /// scaled by `final_scale`.
  void init_uniform(std::mt19937_64& rng, double final_scale);

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> data_;
};

struct MlpCache {
  std::vector<Matrix> inputs;  ///< input to each layer (in x batch)
  std::vector<Matrix> pre;     ///< pre-activation of each layer (out x batch)
};

struct MlpForward {
  Matrix output;
  MlpCache cache;
};

/// Columns of `input` are samples. ActionMap layers are linear here; the
/// mapping itself lives in Actor. Throws ShapeMismatch.
MlpForward mlp_forward(const NetParams& params, const Matrix& input);

/// Overwrites `grads` (same shape as params) with d(loss)/d(params) given
/// d(loss)/d(output), and returns d(loss)/d(input). Throws ShapeMismatch.
Matrix mlp_backward(const NetParams& params, const MlpCache& cache, const Matrix& upstream,
                    NetParams& grads);

// -- Action mapping -----------------------------------------------------------

/// Actor channels, in order: LR_l, MR_l, SR, IR, SO, IO.
inline constexpr int kActorChannels = 6;
/// Head outputs: 6 pre-activations, 6 steepness raws, 6 offsets, 2 coordination raws.
inline constexpr int kActorHeadSize = 3 * kActorChannels + 2;

/// 1 / (1 + exp(-k (x - x0)))
double sigmoid_action_map(double x, double k, double x0);
/// softplus(raw) + 1e-3, always > 0.
double positive_steepness(double raw);
/// 2 * sigmoid(raw), in (0, 2).
double coordination_constant(double raw);

/// Right LR = clamp(C1 * MR_l), right MR = clamp(C2 * LR_l), right SR/IR/SO/IO
/// copy the shared channels; the left block is `left6` itself.
ActionVector assemble_action_vector(const std::array<double, kActorChannels>& left6, double c1,
                                    double c2);

struct ActorForward {
  MlpForward trunk;
  Matrix steepness;     ///< 6 x batch
  Matrix excitation;    ///< 6 x batch, sigmoid outputs
  Matrix coordination;  ///< 2 x batch, (C1, C2)
  Matrix actions;       ///< 12 x batch
};

/// Policy network: a 4-layer trunk (ReLU hidden layers, linear head) whose
/// head feeds the per-channel sigmoid mapping and the LR/MR coordination.
class Actor {
 public:
  explicit Actor(const std::vector<int>& hidden = {64, 64, 64});

  /// Throws ShapeMismatch unless states has 27 rows.
  ActorForward forward(const Matrix& states) const;
  ActionVector act(const Observation& state) const;
  /// Gradient of a loss w.r.t. the network parameters given d(loss)/d(actions).
  void backward(const ActorForward& fwd, const Matrix& d_actions, NetParams& grads) const;

  NetParams& params() { return net_; }
  const NetParams& params() const { return net_; }

 private:
  NetParams net_;
};

struct CriticForward {
  MlpForward net;
  Matrix q;  ///< 1 x batch
};

/// Q(s, a): state and action concatenated at the input of a 4-layer ReLU MLP
/// with a linear output.
class Critic {
 public:
  explicit Critic(const std::vector<int>& hidden = {64, 64, 64});

  CriticForward forward(const Matrix& states, const Matrix& actions) const;
  double value(const Observation& state, const ActionVector& action) const;
  /// Fills `grads` and returns d(loss)/d(actions) (12 x batch).
  Matrix backward(const CriticForward& fwd, const Matrix& d_q, NetParams& grads) const;

  NetParams& params() { return net_; }
  const NetParams& params() const { return net_; }

 private:
  NetParams net_;
};

/// Standard initialization for both networks: uniform +/- 1/sqrt(fan_in),
/// final layer scaled by 0.1.
void init_network(NetParams& params, std::mt19937_64& rng);

Matrix states_to_matrix(std::span<const Observation> states);
Matrix actions_to_matrix(std::span<const ActionVector> actions);

// -- Optimization -------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(std::size_t size, double lr);

/// One bias-corrected Adam step (descent). Throws ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

using ScalarFunction = std::function<double(std::span<const double>)>;

struct GradientCheckOptions {
  double epsilon = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

/// Max over checked coordinates of |analytic - numeric| /
/// max(1e-8, |analytic| + |numeric|), numeric by central differences.
double gradient_check(const ScalarFunction& fn, std::span<const double> params,
                      std::span<const double> analytic, const GradientCheckOptions& options = {});

}  // namespace oculorl
