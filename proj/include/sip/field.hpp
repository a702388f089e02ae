#pragma once

#include <memory>
#include <vector>

#include "sip/interpolant.hpp"

namespace sip {

enum class PredictionTarget { Velocity, Score, Noise };

const char* to_string(PredictionTarget t);
PredictionTarget prediction_target_from_string(const std::string& s);

// A conditional field over action space. eval returns the model's native
// head (velocity, score, or noise); callers convert between
// parameterizations as needed.
class FieldModel {
 public:
  virtual ~FieldModel() = default;
  virtual Vec eval(const Vec& x, double t, const Vec& obs) const = 0;
  virtual PredictionTarget target() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual Eigen::Index obs_dim() const = 0;

  // Earliest time the model is meant to be queried at. Closed-form fields
  // are exact everywhere; trained models report their training band edge.
  virtual double min_eval_time() const { return 0.0; }
};

// Closed-form field for x_star ~ N(mean, diag(var)). The marginal of the
// interpolant is N(alpha * mean, alpha^2 var + sigma^2), which gives exact
// score and velocity targets for tests and solver studies.
class AnalyticGaussianField final : public FieldModel {
 public:
  AnalyticGaussianField(Vec mean, Vec var, InterpolantSchedule sched,
                        PredictionTarget target = PredictionTarget::Velocity);

  Vec score(const Vec& x, TimePoint t) const;
  Vec velocity(const Vec& x, TimePoint t) const;

  Vec eval(const Vec& x, double t, const Vec& obs) const override;
  PredictionTarget target() const override { return target_; }
  Eigen::Index action_dim() const override { return mean_.size(); }
  Eigen::Index obs_dim() const override { return 0; }

  const Vec& mean() const { return mean_; }
  const Vec& var() const { return var_; }

 private:
  Vec mean_;
  Vec var_;
  InterpolantSchedule sched_;
  PredictionTarget target_;
};

// Mixture of diagonal gaussians; score and velocity are the
// responsibility-weighted sums of the per-component fields.
class GaussianMixtureOracle final : public FieldModel {
 public:
  struct Component {
    double weight;
    Vec mean;
    Vec var;
  };

  GaussianMixtureOracle(std::vector<Component> components, InterpolantSchedule sched,
                        PredictionTarget target = PredictionTarget::Velocity);

  Vec responsibilities(const Vec& x, TimePoint t) const;
  Vec score(const Vec& x, TimePoint t) const;
  Vec velocity(const Vec& x, TimePoint t) const;

  Vec eval(const Vec& x, double t, const Vec& obs) const override;
  PredictionTarget target() const override { return target_; }
  Eigen::Index action_dim() const override { return components_[0].mean.size(); }
  Eigen::Index obs_dim() const override { return 0; }

 private:
  std::vector<Component> components_;
  InterpolantSchedule sched_;
  PredictionTarget target_;
};

enum class Activation { ReLU, GELU };

const char* to_string(Activation a);

struct MlpSpec {
  Eigen::Index action_dim = 0;
  Eigen::Index obs_dim = 0;
  Eigen::Index time_embed_dim = 32;
  std::vector<Eigen::Index> hidden = {128, 128};
  Activation activation = Activation::GELU;
  PredictionTarget target = PredictionTarget::Velocity;
  ScheduleKind schedule_kind = ScheduleKind::Linear;
};

// Sinusoidal features with frequencies geometrically spaced from 1 to 1000.
Vec time_embedding(double t, Eigen::Index dim);

// Fully connected network on [x; time_embedding(t); obs] with hand-written
// forward and backward passes.
class MlpField final : public FieldModel {
 public:
  MlpField() = default;
  MlpField(const MlpSpec& spec, std::uint64_t seed);

  Vec eval(const Vec& x, double t, const Vec& obs) const override;
  PredictionTarget target() const override { return spec_.target; }
  Eigen::Index action_dim() const override { return spec_.action_dim; }
  Eigen::Index obs_dim() const override { return spec_.obs_dim; }
  double min_eval_time() const override;

  const MlpSpec& spec() const { return spec_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::vector<Eigen::Index> layer_dims() const;

  // Columns of the input matrix are samples.
  Mat forward(const Mat& input) const;

  struct Grads {
    std::vector<Mat> w;
    std::vector<Vec> b;
    double squared_norm() const;
  };

  // Mean squared error against `target` plus its parameter gradient.
  double backward(const Mat& input, const Mat& target, Grads* grads) const;

  Mat assemble_input(const Mat& x, const Vec& t, const Mat& obs) const;

  std::vector<Mat>& weights() { return w_; }
  std::vector<Vec>& biases() { return b_; }
  const std::vector<Mat>& weights() const { return w_; }
  const std::vector<Vec>& biases() const { return b_; }

 private:
  MlpSpec spec_;
  std::uint64_t init_seed_ = 0;
  std::vector<Mat> w_;
  std::vector<Vec> b_;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  int batch_size = 256;
  int epochs = 10;
  double ema_rate = 0.9999;
  enum class LrSchedule { Constant, Cosine } lr_schedule = LrSchedule::Cosine;
  int warmup_steps = 500;
  std::uint64_t seed = 0;
};

// Sampled interpolant times stay inside this band so the score and noise
// regression targets remain bounded.
inline constexpr double kTrainTimeLo = 1e-3;
inline constexpr double kTrainTimeHi = 1.0 - 1e-3;

struct TrainBatch {
  Mat x_star;
  Mat eps;
  Vec t;
  Mat obs;
};

struct LossOut {
  double loss = 0.0;
  MlpField::Grads grads;
};

// Regression loss for the model's own head: velocity against the
// interpolant time derivative, score against -eps / sigma, noise against eps.
LossOut loss_batch(const MlpField& model, const TrainBatch& batch,
                   const InterpolantSchedule& sched);

struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;
  std::vector<Mat> ema_w;
  std::vector<Vec> ema_b;
  long total_steps = 0;

  static AdamState init(const MlpField& model, long total_steps);
};

double learning_rate_at(const TrainConfig& cfg, long step_index, long total_steps);

// Decoupled weight decay with bias-corrected moments; also advances the EMA
// copy of the weights. step_index counts from 0.
void adam_step(MlpField& model, AdamState& state, const MlpField::Grads& grads,
               const TrainConfig& cfg, long step_index);

struct Dataset {
  Mat x_star;  // columns = samples
  Mat obs;     // columns = samples; 0 x N when unconditional
};

struct TrainResult {
  MlpField model;  // EMA weights
  MlpField raw;
  std::vector<double> loss_curve;  // one entry per epoch
};

TrainResult train_field(const Dataset& data, const InterpolantSchedule& sched,
                        PredictionTarget target, const TrainConfig& cfg,
                        const MlpSpec& arch = {});

}  // namespace sip
