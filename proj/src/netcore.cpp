#include "oculorl/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

constexpr double kSteepnessFloor = 1e-3;
constexpr double kFinalLayerScale = 0.1;

// Head row blocks.
constexpr int kRowX = 0;
constexpr int kRowSteep = kActorChannels;
constexpr int kRowOffset = 2 * kActorChannels;
constexpr int kRowCoord = 3 * kActorChannels;

// Actor channel -> action slot in the left block.
constexpr int kLeftBlock = kMusclesPerEye;
constexpr int kChLR = 0;
constexpr int kChMR = 1;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

std::vector<LayerShape> build_layers(int in, const std::vector<int>& hidden, int out,
                                     LayerActivation last) {
  std::vector<LayerShape> layers;
  int prev = in;
  for (int h : hidden) {
    layers.push_back({prev, h, LayerActivation::Relu});
    prev = h;
  }
  layers.push_back({prev, out, last});
  return layers;
}

}  // namespace

// -- NetParams ----------------------------------------------------------------

NetParams::NetParams(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerShape& l = layers_[i];
    if (l.in <= 0 || l.out <= 0) throw ShapeMismatch("layer sizes must be positive");
    if (i > 0 && layers_[i - 1].out != l.in) {
      throw ShapeMismatch(fmt::format("layer {} expects {} inputs but layer {} emits {}", i, l.in,
                                      i - 1, layers_[i - 1].out));
    }
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) +
              static_cast<std::size_t>(l.out);
  }
  data_.assign(offset, 0.0);
}

Eigen::Map<Matrix> NetParams::weight(std::size_t layer) {
  const LayerShape& l = layers_[layer];
  return {data_.data() + offsets_[layer], l.out, l.in};
}

Eigen::Map<const Matrix> NetParams::weight(std::size_t layer) const {
  const LayerShape& l = layers_[layer];
  return {data_.data() + offsets_[layer], l.out, l.in};
}

Eigen::Map<Vector> NetParams::bias(std::size_t layer) {
  const LayerShape& l = layers_[layer];
  return {data_.data() + offsets_[layer] + static_cast<std::size_t>(l.in * l.out), l.out};
}

Eigen::Map<const Vector> NetParams::bias(std::size_t layer) const {
  const LayerShape& l = layers_[layer];
  return {data_.data() + offsets_[layer] + static_cast<std::size_t>(l.in * l.out), l.out};
}

void NetParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

void NetParams::init_uniform(std::mt19937_64& rng, double final_scale) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layers_[i].in));
    const double scale = i + 1 == layers_.size() ? final_scale : 1.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = weight(i);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * dist(rng);
    }
    auto b = bias(i);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = scale * dist(rng);
  }
}

// -- MLP ----------------------------------------------------------------------

MlpForward mlp_forward(const NetParams& params, const Matrix& input) {
  if (input.rows() != params.input_size()) {
    throw ShapeMismatch(fmt::format("network expects {} inputs, got {}", params.input_size(),
                                    input.rows()));
  }
  MlpForward fwd;
  const std::size_t n = params.layer_count();
  fwd.cache.inputs.reserve(n);
  fwd.cache.pre.reserve(n);
  Matrix x = input;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix z(params.layers()[i].out, x.cols());
    z.noalias() = params.weight(i) * x;
    z.colwise() += params.bias(i);
    fwd.cache.inputs.push_back(std::move(x));
    if (params.layers()[i].activation == LayerActivation::Relu) {
      x = z.cwiseMax(0.0);
    } else {
      x = z;
    }
    fwd.cache.pre.push_back(std::move(z));
  }
  fwd.output = std::move(x);
  return fwd;
}

Matrix mlp_backward(const NetParams& params, const MlpCache& cache, const Matrix& upstream,
                    NetParams& grads) {
  const std::size_t n = params.layer_count();
  if (!grads.same_shape(params)) throw ShapeMismatch("gradient buffer shape differs from params");
  if (cache.inputs.size() != n || cache.pre.size() != n) {
    throw ShapeMismatch("cache does not match network depth");
  }
  if (upstream.rows() != params.output_size() || upstream.cols() != cache.pre.back().cols()) {
    throw ShapeMismatch("upstream gradient shape does not match network output");
  }
  Matrix d = upstream;
  for (std::size_t k = n; k-- > 0;) {
    if (params.layers()[k].activation == LayerActivation::Relu) {
      d = d.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
    }
    grads.weight(k).noalias() = d * cache.inputs[k].transpose();
    grads.bias(k) = d.rowwise().sum();
    Matrix prev(params.layers()[k].in, d.cols());
    prev.noalias() = params.weight(k).transpose() * d;
    d = std::move(prev);
  }
  return d;
}

// -- Action mapping -----------------------------------------------------------

double sigmoid_action_map(double x, double k, double x0) { return sigmoid(k * (x - x0)); }

double positive_steepness(double raw) { return softplus(raw) + kSteepnessFloor; }

double coordination_constant(double raw) { return 2.0 * sigmoid(raw); }

ActionVector assemble_action_vector(const std::array<double, kActorChannels>& left6, double c1,
                                    double c2) {
  ActionVector a{};
  const auto right = [&](MuscleKind k) -> double& {
    return a[static_cast<std::size_t>(muscle_index(Eye::Right, k))];
  };
  right(MuscleKind::LR) = std::clamp(c1 * left6[kChMR], 0.0, 1.0);
  right(MuscleKind::MR) = std::clamp(c2 * left6[kChLR], 0.0, 1.0);
  for (int ch = 2; ch < kActorChannels; ++ch) {
    right(static_cast<MuscleKind>(ch)) = std::clamp(left6[static_cast<std::size_t>(ch)], 0.0, 1.0);
  }
  for (int ch = 0; ch < kActorChannels; ++ch) {
    a[static_cast<std::size_t>(kLeftBlock + ch)] =
        std::clamp(left6[static_cast<std::size_t>(ch)], 0.0, 1.0);
  }
  return a;
}

// -- Actor --------------------------------------------------------------------

Actor::Actor(const std::vector<int>& hidden)
    : net_(build_layers(kObservationSize, hidden, kActorHeadSize, LayerActivation::ActionMap)) {}

ActorForward Actor::forward(const Matrix& states) const {
  ActorForward f;
  f.trunk = mlp_forward(net_, states);
  const Matrix& z = f.trunk.output;
  const Eigen::Index batch = z.cols();
  f.steepness.resize(kActorChannels, batch);
  f.excitation.resize(kActorChannels, batch);
  f.coordination.resize(2, batch);
  f.actions.resize(kActionSize, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    std::array<double, kActorChannels> left{};
    for (int ch = 0; ch < kActorChannels; ++ch) {
      const double k = positive_steepness(z(kRowSteep + ch, b));
      f.steepness(ch, b) = k;
      left[static_cast<std::size_t>(ch)] =
          sigmoid_action_map(z(kRowX + ch, b), k, z(kRowOffset + ch, b));
      f.excitation(ch, b) = left[static_cast<std::size_t>(ch)];
    }
    const double c1 = coordination_constant(z(kRowCoord, b));
    const double c2 = coordination_constant(z(kRowCoord + 1, b));
    f.coordination(0, b) = c1;
    f.coordination(1, b) = c2;
    const ActionVector a = assemble_action_vector(left, c1, c2);
    for (int i = 0; i < kActionSize; ++i) f.actions(i, b) = a[static_cast<std::size_t>(i)];
  }
  return f;
}

ActionVector Actor::act(const Observation& state) const {
  const Matrix s = states_to_matrix(std::span<const Observation>(&state, 1));
  const ActorForward f = forward(s);
  ActionVector a{};
  for (int i = 0; i < kActionSize; ++i) a[static_cast<std::size_t>(i)] = f.actions(i, 0);
  return a;
}

void Actor::backward(const ActorForward& f, const Matrix& d_actions, NetParams& grads) const {
  if (d_actions.rows() != kActionSize || d_actions.cols() != f.actions.cols()) {
    throw ShapeMismatch("action gradient must be 12 x batch");
  }
  const Matrix& z = f.trunk.output;
  const Eigen::Index batch = z.cols();
  Matrix dz = Matrix::Zero(kActorHeadSize, batch);
  const int right_lr = muscle_index(Eye::Right, MuscleKind::LR);
  const int right_mr = muscle_index(Eye::Right, MuscleKind::MR);

  for (Eigen::Index b = 0; b < batch; ++b) {
    double de[kActorChannels];
    for (int ch = 0; ch < kActorChannels; ++ch) de[ch] = d_actions(kLeftBlock + ch, b);
    for (int ch = 2; ch < kActorChannels; ++ch) de[ch] += d_actions(ch, b);

    // Coordination products, zero gradient where the clamp is active.
    const double c1 = f.coordination(0, b);
    const double c2 = f.coordination(1, b);
    double dc1 = 0.0;
    double dc2 = 0.0;
    const double e_lr = f.excitation(kChLR, b);
    const double e_mr = f.excitation(kChMR, b);
    if (const double p = c1 * e_mr; p > 0.0 && p < 1.0) {
      dc1 = d_actions(right_lr, b) * e_mr;
      de[kChMR] += d_actions(right_lr, b) * c1;
    }
    if (const double p = c2 * e_lr; p > 0.0 && p < 1.0) {
      dc2 = d_actions(right_mr, b) * e_lr;
      de[kChLR] += d_actions(right_mr, b) * c2;
    }
    // C = 2 sigma(raw): dC/draw = C (1 - C/2).
    dz(kRowCoord, b) = dc1 * c1 * (1.0 - 0.5 * c1);
    dz(kRowCoord + 1, b) = dc2 * c2 * (1.0 - 0.5 * c2);

    for (int ch = 0; ch < kActorChannels; ++ch) {
      const double e = f.excitation(ch, b);
      const double k = f.steepness(ch, b);
      const double u = z(kRowX + ch, b) - z(kRowOffset + ch, b);
      const double ds = de[ch] * e * (1.0 - e);  // d/d(k u)
      dz(kRowX + ch, b) = ds * k;
      dz(kRowOffset + ch, b) = -ds * k;
      dz(kRowSteep + ch, b) = ds * u * sigmoid(z(kRowSteep + ch, b));
    }
  }
  mlp_backward(net_, f.trunk.cache, dz, grads);
}

// -- Critic -------------------------------------------------------------------

Critic::Critic(const std::vector<int>& hidden)
    : net_(build_layers(kObservationSize + kActionSize, hidden, 1, LayerActivation::Linear)) {}

CriticForward Critic::forward(const Matrix& states, const Matrix& actions) const {
  if (states.rows() != kObservationSize || actions.rows() != kActionSize ||
      states.cols() != actions.cols()) {
    throw ShapeMismatch("critic expects 27 x batch states and 12 x batch actions");
  }
  Matrix input(kObservationSize + kActionSize, states.cols());
  input.topRows(kObservationSize) = states;
  input.bottomRows(kActionSize) = actions;
  CriticForward f;
  f.net = mlp_forward(net_, input);
  f.q = f.net.output;
  return f;
}

double Critic::value(const Observation& state, const ActionVector& action) const {
  const CriticForward f = forward(states_to_matrix(std::span<const Observation>(&state, 1)),
                                  actions_to_matrix(std::span<const ActionVector>(&action, 1)));
  return f.q(0, 0);
}

Matrix Critic::backward(const CriticForward& f, const Matrix& d_q, NetParams& grads) const {
  const Matrix d_input = mlp_backward(net_, f.net.cache, d_q, grads);
  return d_input.bottomRows(kActionSize);
}

void init_network(NetParams& params, std::mt19937_64& rng) {
  params.init_uniform(rng, kFinalLayerScale);
}

Matrix states_to_matrix(std::span<const Observation> states) {
  Matrix m(kObservationSize, static_cast<Eigen::Index>(states.size()));
  for (std::size_t c = 0; c < states.size(); ++c) {
    for (int r = 0; r < kObservationSize; ++r) {
      m(r, static_cast<Eigen::Index>(c)) = states[c][static_cast<std::size_t>(r)];
    }
  }
  return m;
}

Matrix actions_to_matrix(std::span<const ActionVector> actions) {
  Matrix m(kActionSize, static_cast<Eigen::Index>(actions.size()));
  for (std::size_t c = 0; c < actions.size(); ++c) {
    for (int r = 0; r < kActionSize; ++r) {
      m(r, static_cast<Eigen::Index>(c)) = actions[c][static_cast<std::size_t>(r)];
    }
  }
  return m;
}

// -- Adam ---------------------------------------------------------------------

AdamState make_adam(std::size_t size, double lr) {
  AdamState s;
  s.m.assign(size, 0.0);
  s.v.assign(size, 0.0);
  s.lr = lr;
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size() ||
      s.v.size() != params.size()) {
    throw ShapeMismatch(fmt::format("adam: {} params, {} grads, {} moments", params.size(),
                                    grads.size(), s.m.size()));
  }
  ++s.t;
  const double t = static_cast<double>(s.t);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

// -- Gradient check -----------------------------------------------------------

double gradient_check(const ScalarFunction& fn, std::span<const double> params,
                      std::span<const double> analytic, const GradientCheckOptions& options) {
  if (params.size() != analytic.size()) throw ShapeMismatch("gradient size differs from params");
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates > 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
  }
  std::vector<double> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = probe[i];
    probe[i] = saved + options.epsilon;
    const double up = fn(probe);
    probe[i] = saved - options.epsilon;
    const double down = fn(probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace oculorl
