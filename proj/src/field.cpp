#include "sip/field.hpp"

#include <cmath>

namespace sip {

const char* to_string(PredictionTarget t) {
  switch (t) {
    case PredictionTarget::Velocity: return "velocity";
    case PredictionTarget::Score: return "score";
    case PredictionTarget::Noise: return "noise";
  }
  return "?";
}

PredictionTarget prediction_target_from_string(const std::string& s) {
  if (s == "velocity") return PredictionTarget::Velocity;
  if (s == "score") return PredictionTarget::Score;
  if (s == "noise") return PredictionTarget::Noise;
  throw config_error("unknown prediction target: " + s);
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::GELU: return "gelu";
  }
  return "?";
}

namespace {

// The VP data coefficient derivative diverges at t = 0 while every
// conditional moment below stays finite; evaluating a hair above zero
// removes the singularity without changing the other schedules' results.
constexpr double kTimeNudge = 1e-10;

ScheduleValues eval_for_moments(const InterpolantSchedule& sched, double t) {
  ScheduleValues sv = sched.eval(TimePoint(t));
  if (!std::isfinite(sv.dalpha)) sv = sched.eval(TimePoint(std::max(t, kTimeNudge)));
  return sv;
}

Vec component_score(const Vec& x, const Vec& mean, const Vec& var,
                    const ScheduleValues& sv) {
  const double a2 = sv.alpha * sv.alpha;
  const double s2 = sv.sigma * sv.sigma;
  return -(x.array() - sv.alpha * mean.array()) / (a2 * var.array() + s2);
}

Vec component_velocity(const Vec& x, const Vec& mean, const Vec& var,
                       const ScheduleValues& sv) {
  // E[dalpha x_star + dsigma eps | x] for a gaussian component.
  const double a2 = sv.alpha * sv.alpha;
  const double s2 = sv.sigma * sv.sigma;
  const auto mvar = a2 * var.array() + s2;
  const auto gain = (sv.dalpha * sv.alpha * var.array() + sv.dsigma * sv.sigma) / mvar;
  return sv.dalpha * mean.array() + gain * (x.array() - sv.alpha * mean.array());
}

double component_logpdf(const Vec& x, const Vec& mean, const Vec& var,
                        const ScheduleValues& sv) {
  const double a2 = sv.alpha * sv.alpha;
  const double s2 = sv.sigma * sv.sigma;
  const auto mvar = a2 * var.array() + s2;
  const auto resid = x.array() - sv.alpha * mean.array();
  return -0.5 * (resid * resid / mvar + mvar.log() + std::log(2.0 * M_PI)).sum();
}

}  // namespace

AnalyticGaussianField::AnalyticGaussianField(Vec mean, Vec var, InterpolantSchedule sched,
                                             PredictionTarget target)
    : mean_(std::move(mean)), var_(std::move(var)), sched_(sched), target_(target) {
  if (mean_.size() != var_.size())
    throw std::invalid_argument("AnalyticGaussianField: mean/var dimension mismatch");
  if (mean_.size() == 0 || (var_.array() <= 0.0).any())
    throw std::invalid_argument("AnalyticGaussianField: variances must be positive");
}

Vec AnalyticGaussianField::score(const Vec& x, TimePoint t) const {
  if (x.size() != mean_.size())
    throw std::invalid_argument("AnalyticGaussianField::score: dimension mismatch");
  return component_score(x, mean_, var_, eval_for_moments(sched_, t.value()));
}

Vec AnalyticGaussianField::velocity(const Vec& x, TimePoint t) const {
  if (x.size() != mean_.size())
    throw std::invalid_argument("AnalyticGaussianField::velocity: dimension mismatch");
  return component_velocity(x, mean_, var_, eval_for_moments(sched_, t.value()));
}

Vec AnalyticGaussianField::eval(const Vec& x, double t, const Vec&) const {
  const TimePoint tp(t);
  switch (target_) {
    case PredictionTarget::Velocity: return velocity(x, tp);
    case PredictionTarget::Score: return score(x, tp);
    case PredictionTarget::Noise:
      return -eval_for_moments(sched_, t).sigma * score(x, tp);
  }
  throw std::logic_error("unreachable target");
}

GaussianMixtureOracle::GaussianMixtureOracle(std::vector<Component> components,
                                             InterpolantSchedule sched,
                                             PredictionTarget target)
    : components_(std::move(components)), sched_(sched), target_(target) {
  if (components_.empty())
    throw std::invalid_argument("GaussianMixtureOracle: no components");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight <= 0.0)
      throw std::invalid_argument("GaussianMixtureOracle: weights must be positive");
    if (c.mean.size() != components_[0].mean.size() || c.var.size() != c.mean.size())
      throw std::invalid_argument("GaussianMixtureOracle: dimension mismatch");
    if ((c.var.array() <= 0.0).any())
      throw std::invalid_argument("GaussianMixtureOracle: variances must be positive");
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

Vec GaussianMixtureOracle::responsibilities(const Vec& x, TimePoint t) const {
  const ScheduleValues sv = eval_for_moments(sched_, t.value());
  Vec logp(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    logp[static_cast<Eigen::Index>(i)] =
        std::log(c.weight) + component_logpdf(x, c.mean, c.var, sv);
  }
  const double m = logp.maxCoeff();
  Vec r = (logp.array() - m).exp();
  return r / r.sum();
}

Vec GaussianMixtureOracle::score(const Vec& x, TimePoint t) const {
  const ScheduleValues sv = eval_for_moments(sched_, t.value());
  const Vec r = responsibilities(x, t);
  Vec out = Vec::Zero(x.size());
  for (std::size_t i = 0; i < components_.size(); ++i)
    out += r[static_cast<Eigen::Index>(i)] *
           component_score(x, components_[i].mean, components_[i].var, sv);
  return out;
}

Vec GaussianMixtureOracle::velocity(const Vec& x, TimePoint t) const {
  const ScheduleValues sv = eval_for_moments(sched_, t.value());
  const Vec r = responsibilities(x, t);
  Vec out = Vec::Zero(x.size());
  for (std::size_t i = 0; i < components_.size(); ++i)
    out += r[static_cast<Eigen::Index>(i)] *
           component_velocity(x, components_[i].mean, components_[i].var, sv);
  return out;
}

Vec GaussianMixtureOracle::eval(const Vec& x, double t, const Vec&) const {
  const TimePoint tp(t);
  switch (target_) {
    case PredictionTarget::Velocity: return velocity(x, tp);
    case PredictionTarget::Score: return score(x, tp);
    case PredictionTarget::Noise:
      return -eval_for_moments(sched_, t).sigma * score(x, tp);
  }
  throw std::logic_error("unreachable target");
}

Vec time_embedding(double t, Eigen::Index dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw std::invalid_argument("time_embedding: dim must be positive and even");
  const Eigen::Index pairs = dim / 2;
  Vec emb(dim);
  for (Eigen::Index i = 0; i < pairs; ++i) {
    const double expo = pairs > 1 ? static_cast<double>(i) / static_cast<double>(pairs - 1)
                                  : 0.0;
    const double freq = std::pow(1000.0, expo);
    emb[2 * i] = std::sin(freq * t);
    emb[2 * i + 1] = std::cos(freq * t);
  }
  return emb;
}

namespace {

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * M_SQRT1_2)); }

double gelu_der(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return cdf + z * pdf;
}

Mat activate(const Mat& z, Activation a) {
  if (a == Activation::ReLU) return z.cwiseMax(0.0);
  return z.unaryExpr([](double v) { return gelu(v); });
}

Mat activate_der(const Mat& z, Activation a) {
  if (a == Activation::ReLU)
    return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
  return z.unaryExpr([](double v) { return gelu_der(v); });
}

}  // namespace

MlpField::MlpField(const MlpSpec& spec, std::uint64_t seed)
    : spec_(spec), init_seed_(seed) {
  if (spec_.action_dim <= 0) throw std::invalid_argument("MlpField: action_dim must be positive");
  if (spec_.obs_dim < 0) throw std::invalid_argument("MlpField: obs_dim must be nonnegative");
  const auto dims = layer_dims();
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Eigen::Index in = dims[l];
    const Eigen::Index out = dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Mat w(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) w(r, c) = rng.uniform(-limit, limit);
    w_.push_back(std::move(w));
    b_.push_back(Vec::Zero(out));
  }
}

std::vector<Eigen::Index> MlpField::layer_dims() const {
  std::vector<Eigen::Index> dims;
  dims.push_back(spec_.action_dim + spec_.time_embed_dim + spec_.obs_dim);
  for (Eigen::Index h : spec_.hidden) dims.push_back(h);
  dims.push_back(spec_.action_dim);
  return dims;
}

Mat MlpField::assemble_input(const Mat& x, const Vec& t, const Mat& obs) const {
  const Eigen::Index n = x.cols();
  if (x.rows() != spec_.action_dim)
    throw std::invalid_argument("MlpField: action dimension mismatch");
  if (t.size() != n) throw std::invalid_argument("MlpField: time vector length mismatch");
  if (spec_.obs_dim > 0 && (obs.rows() != spec_.obs_dim || obs.cols() != n))
    throw std::invalid_argument("MlpField: observation dimension mismatch");
  Mat input(spec_.action_dim + spec_.time_embed_dim + spec_.obs_dim, n);
  input.topRows(spec_.action_dim) = x;
  for (Eigen::Index j = 0; j < n; ++j)
    input.block(spec_.action_dim, j, spec_.time_embed_dim, 1) =
        time_embedding(t[j], spec_.time_embed_dim);
  if (spec_.obs_dim > 0) input.bottomRows(spec_.obs_dim) = obs;
  return input;
}

Mat MlpField::forward(const Mat& input) const {
  Mat cur = input;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Mat z = (w_[l] * cur).colwise() + b_[l];
    cur = (l + 1 < w_.size()) ? activate(z, spec_.activation) : std::move(z);
  }
  return cur;
}

double MlpField::min_eval_time() const { return kTrainTimeLo; }

Vec MlpField::eval(const Vec& x, double t, const Vec& obs) const {
  TimePoint tp(t);  // range check
  if (obs.size() != spec_.obs_dim)
    throw std::invalid_argument("MlpField::eval: observation dimension mismatch");
  Mat xm(x.size(), 1);
  xm.col(0) = x;
  Vec tv(1);
  tv[0] = t;
  Mat om(obs.size(), 1);
  if (obs.size() > 0) om.col(0) = obs;
  return forward(assemble_input(xm, tv, om)).col(0);
}

double MlpField::Grads::squared_norm() const {
  double s = 0.0;
  for (const auto& m : w) s += m.squaredNorm();
  for (const auto& v : b) s += v.squaredNorm();
  return s;
}

double MlpField::backward(const Mat& input, const Mat& target, Grads* grads) const {
  const std::size_t layers = w_.size();
  std::vector<Mat> acts(layers);  // post-activation inputs to each layer
  std::vector<Mat> pre(layers);   // pre-activation outputs
  Mat cur = input;
  for (std::size_t l = 0; l < layers; ++l) {
    acts[l] = cur;
    pre[l] = (w_[l] * cur).colwise() + b_[l];
    if (l + 1 < layers) cur = activate(pre[l], spec_.activation);
  }
  const Mat& out = pre[layers - 1];
  if (out.rows() != target.rows() || out.cols() != target.cols())
    throw std::invalid_argument("MlpField::backward: target dimension mismatch");

  const double count = static_cast<double>(out.rows() * out.cols());
  const Mat resid = out - target;
  const double loss = resid.squaredNorm() / count;

  grads->w.resize(layers);
  grads->b.resize(layers);
  Mat dz = (2.0 / count) * resid;
  for (std::size_t l = layers; l-- > 0;) {
    grads->w[l] = dz * acts[l].transpose();
    grads->b[l] = dz.rowwise().sum();
    if (l > 0) dz = (w_[l].transpose() * dz).cwiseProduct(activate_der(pre[l - 1], spec_.activation));
  }
  return loss;
}

LossOut loss_batch(const MlpField& model, const TrainBatch& batch,
                   const InterpolantSchedule& sched) {
  const Eigen::Index n = batch.x_star.cols();
  const Eigen::Index d = batch.x_star.rows();
  if (n == 0) throw data_error("loss_batch: empty batch");
  if (batch.eps.rows() != d || batch.eps.cols() != n || batch.t.size() != n)
    throw std::invalid_argument("loss_batch: batch shape mismatch");

  Mat x_t(d, n);
  Mat target(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const ScheduleValues sv = sched.eval(TimePoint(batch.t[j]));
    x_t.col(j) = sv.alpha * batch.x_star.col(j) + sv.sigma * batch.eps.col(j);
    switch (model.target()) {
      case PredictionTarget::Velocity:
        target.col(j) = sv.dalpha * batch.x_star.col(j) + sv.dsigma * batch.eps.col(j);
        break;
      case PredictionTarget::Score:
        if (sv.sigma <= kSigmaFloor)
          throw schedule_error("loss_batch: sigma below floor in score target");
        target.col(j) = -batch.eps.col(j) / sv.sigma;
        break;
      case PredictionTarget::Noise:
        target.col(j) = batch.eps.col(j);
        break;
    }
  }

  LossOut out;
  out.loss = model.backward(model.assemble_input(x_t, batch.t, batch.obs), target,
                            &out.grads);
  return out;
}

AdamState AdamState::init(const MlpField& model, long total_steps) {
  AdamState st;
  st.total_steps = total_steps;
  for (const auto& w : model.weights()) {
    st.m_w.push_back(Mat::Zero(w.rows(), w.cols()));
    st.v_w.push_back(Mat::Zero(w.rows(), w.cols()));
    st.ema_w.push_back(w);
  }
  for (const auto& b : model.biases()) {
    st.m_b.push_back(Vec::Zero(b.size()));
    st.v_b.push_back(Vec::Zero(b.size()));
    st.ema_b.push_back(b);
  }
  return st;
}

double learning_rate_at(const TrainConfig& cfg, long step_index, long total_steps) {
  const long warmup = std::max(0, cfg.warmup_steps);
  if (warmup > 0 && step_index < warmup)
    return cfg.learning_rate * static_cast<double>(step_index + 1) /
           static_cast<double>(warmup);
  if (cfg.lr_schedule == TrainConfig::LrSchedule::Constant) return cfg.learning_rate;
  const long span = std::max<long>(1, total_steps - warmup);
  const double prog =
      std::min(1.0, static_cast<double>(step_index - warmup) / static_cast<double>(span));
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(M_PI * prog));
}

void adam_step(MlpField& model, AdamState& state, const MlpField::Grads& grads,
               const TrainConfig& cfg, long step_index) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  const double lr = learning_rate_at(cfg, step_index, state.total_steps);
  const double k = static_cast<double>(step_index + 1);
  const double c1 = 1.0 - std::pow(kBeta1, k);
  const double c2 = 1.0 - std::pow(kBeta2, k);

  auto& ws = model.weights();
  auto& bs = model.biases();
  for (std::size_t l = 0; l < ws.size(); ++l) {
    state.m_w[l] = kBeta1 * state.m_w[l] + (1.0 - kBeta1) * grads.w[l];
    state.v_w[l] = kBeta2 * state.v_w[l] + (1.0 - kBeta2) * grads.w[l].cwiseProduct(grads.w[l]);
    ws[l] -= lr * (state.m_w[l] / c1)
                 .cwiseQuotient(((state.v_w[l] / c2).cwiseSqrt().array() + kEps).matrix());
    ws[l] -= (lr * cfg.weight_decay) * ws[l];  // decoupled decay, weights only

    state.m_b[l] = kBeta1 * state.m_b[l] + (1.0 - kBeta1) * grads.b[l];
    state.v_b[l] = kBeta2 * state.v_b[l] + (1.0 - kBeta2) * grads.b[l].cwiseProduct(grads.b[l]);
    bs[l] -= lr * (state.m_b[l] / c1)
                 .cwiseQuotient(((state.v_b[l] / c2).cwiseSqrt().array() + kEps).matrix());

    state.ema_w[l] = cfg.ema_rate * state.ema_w[l] + (1.0 - cfg.ema_rate) * ws[l];
    state.ema_b[l] = cfg.ema_rate * state.ema_b[l] + (1.0 - cfg.ema_rate) * bs[l];
  }
}

TrainResult train_field(const Dataset& data, const InterpolantSchedule& sched,
                        PredictionTarget target, const TrainConfig& cfg,
                        const MlpSpec& arch) {
  const Eigen::Index n = data.x_star.cols();
  if (n == 0) throw data_error("train_field: empty dataset");
  if (data.obs.size() > 0 && data.obs.cols() != n)
    throw data_error("train_field: observation count mismatch");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0)
    throw config_error("train_field: epochs and batch_size must be positive");

  MlpSpec spec = arch;
  spec.action_dim = data.x_star.rows();
  spec.obs_dim = data.obs.size() > 0 ? data.obs.rows() : 0;
  spec.target = target;
  spec.schedule_kind = sched.kind;

  MlpField model(spec, splitmix64(cfg.seed ^ 0x5e0a1ed5ull));
  const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total = static_cast<long>(cfg.epochs) * steps_per_epoch;
  AdamState state = AdamState::init(model, total);
  Rng rng = Rng::substream(cfg.seed, 0xba7c4);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

  TrainBatch tb;
  tb.x_star.resize(spec.action_dim, batch);
  tb.eps.resize(spec.action_dim, batch);
  tb.t.resize(batch);
  tb.obs.resize(spec.obs_dim, batch);

  std::vector<double> curve;
  long step_index = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = perm.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(i));
      std::swap(perm[i - 1], perm[j]);
    }
    double epoch_loss = 0.0;
    for (long s = 0; s < steps_per_epoch; ++s) {
      for (Eigen::Index j = 0; j < batch; ++j) {
        const Eigen::Index src =
            perm[static_cast<std::size_t>((s * batch + j) % n)];
        tb.x_star.col(j) = data.x_star.col(src);
        if (spec.obs_dim > 0) tb.obs.col(j) = data.obs.col(src);
        for (Eigen::Index r = 0; r < spec.action_dim; ++r) tb.eps(r, j) = rng.normal();
        tb.t[j] = rng.uniform(kTrainTimeLo, kTrainTimeHi);
      }
      const LossOut lo = loss_batch(model, tb, sched);
      if (!std::isfinite(lo.loss))
        throw numeric_error("train_field: non-finite loss at step " +
                            std::to_string(step_index));
      adam_step(model, state, lo.grads, cfg, step_index);
      epoch_loss += lo.loss;
      ++step_index;
    }
    curve.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
  }

  TrainResult result;
  result.raw = model;
  result.model = model;
  result.model.weights() = state.ema_w;
  result.model.biases() = state.ema_b;
  result.loss_curve = std::move(curve);
  return result;
}

}  // namespace sip
