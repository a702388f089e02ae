#include "sip/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sip/binio.hpp"

namespace sip {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kClassifierKind = 1;

// peg states this close to the slot mouth count as insertion work
constexpr double kSlotApproachBack = 0.06;
constexpr double kSlotApproachHalfWidth = 0.08;

constexpr int kPatience = 15;

double aabb_clearance(const Vec2& pt, const Vec2& center, double half) {
  double dx = std::max(std::abs(pt.x() - center.x()) - half, 0.0);
  double dy = std::max(std::abs(pt.y() - center.y()) - half, 0.0);
  return std::hypot(dx, dy);
}

// distance from the gripper to whatever the task cares about
double target_distance(const SimState& s, TaskKind task, const EnvParams& p) {
  switch (task) {
    case TaskKind::ReachLift:
      return (s.gripper_pos - s.object_pos).norm();
    case TaskKind::PushBlock:
      return aabb_clearance(s.gripper_pos, s.object_pos, p.block_half);
    case TaskKind::PegInSlot:
      return (s.gripper_pos - s.slot.entry).norm();
  }
  throw config_error("unknown task kind");
}

bool in_slot_approach(const SimState& s) {
  return s.object_pos.x() > s.slot.entry.x() - kSlotApproachBack &&
         std::abs(s.object_pos.y() - s.slot.entry.y()) < kSlotApproachHalfWidth;
}

}  // namespace

char to_char(DifficultyLabel d) {
  switch (d) {
    case DifficultyLabel::I: return 'I';
    case DifficultyLabel::N: return 'N';
    case DifficultyLabel::G: return 'G';
    case DifficultyLabel::S: return 'S';
    case DifficultyLabel::C: return 'C';
    case DifficultyLabel::E: return 'E';
  }
  throw config_error("unknown difficulty label");
}

DifficultyLabel label_from_char(char c) {
  switch (c) {
    case 'I': return DifficultyLabel::I;
    case 'N': return DifficultyLabel::N;
    case 'G': return DifficultyLabel::G;
    case 'S': return DifficultyLabel::S;
    case 'C': return DifficultyLabel::C;
    case 'E': return DifficultyLabel::E;
  }
  throw data_error(std::string("unknown difficulty label '") + c + "'");
}

DifficultyLabel oracle_label(const SimState& s, TaskKind task,
                             const EnvParams& p) {
  if (is_success(s, task, p)) return DifficultyLabel::E;
  if (task == TaskKind::PushBlock && s.contact) return DifficultyLabel::C;
  if (task == TaskKind::PegInSlot && in_slot_approach(s))
    return DifficultyLabel::S;
  if (task == TaskKind::ReachLift && s.attached) return DifficultyLabel::G;
  if (target_distance(s, task, p) < p.d_near) return DifficultyLabel::N;
  return DifficultyLabel::I;
}

Vec class_weights(const std::array<int, kNumLabels>& counts) {
  int n = 0;
  int present = 0;
  for (int c : counts) {
    if (c < 0) throw data_error("class_weights: negative count");
    n += c;
    if (c > 0) ++present;
  }
  if (n == 0) throw data_error("class_weights: all counts are zero");
  Vec w = Vec::Zero(kNumLabels);
  for (int k = 0; k < kNumLabels; ++k)
    if (counts[k] > 0) w[k] = static_cast<double>(n) / (present * counts[k]);
  return w;
}

Vec featurize(const SimState& s, TaskKind task, const EnvParams& p) {
  Vec f(kFeatureDim);
  const Vec2 to_goal = s.goal_pos - s.object_pos;
  const Vec2 to_obj = s.object_pos - s.gripper_pos;
  const bool peg = task == TaskKind::PegInSlot;
  f[0] = target_distance(s, task, p) / p.d_near;
  f[1] = to_goal.norm() / p.success_tol;
  f[2] = s.attached ? 1.0 : 0.0;
  f[3] = s.contact ? 1.0 : 0.0;
  f[4] = s.gripper_vel.norm() / p.max_step;
  f[5] = to_goal.x() / p.success_tol;
  f[6] = to_goal.y() / p.success_tol;
  f[7] = to_obj.x() / p.d_near;
  f[8] = to_obj.y() / p.d_near;
  f[9] = peg ? (s.object_pos.y() - s.slot.entry.y()) / (s.slot.width * 0.5)
             : 0.0;
  f[10] = peg ? (s.object_pos.x() - s.slot.entry.x()) / p.slot_depth : 0.0;
  f[11] = is_success(s, task, p) ? 1.0 : 0.0;
  f[12] = static_cast<double>(s.step_count) / p.horizon;
  return f;
}

void save_annotations(const std::string& path,
                      const std::vector<AnnotationRecord>& records) {
  const int dim =
      records.empty() ? kFeatureDim : static_cast<int>(records[0].features.size());
  std::string out = "env_id\tepisode\tcycle\tlabel";
  for (int j = 0; j < dim; ++j) out += "\tf" + std::to_string(j);
  out += "\n";
  char buf[40];
  for (const auto& r : records) {
    if (r.features.size() != dim)
      throw data_error("annotation: inconsistent feature size");
    if (r.env_id.find_first_of("\t\n\r") != std::string::npos)
      throw data_error("annotation: env_id contains a delimiter");
    if (!r.features.allFinite())
      throw data_error("annotation: non-finite feature");
    out += r.env_id;
    out += '\t';
    out += std::to_string(r.episode);
    out += '\t';
    out += std::to_string(r.cycle);
    out += '\t';
    out += to_char(r.label);
    for (int j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r.features[j]);
      out += '\t';
      out += buf;
    }
    out += '\n';
  }
  binio::write_file(path, out, "annotation");
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  const std::string text = binio::read_file(path, "annotation");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("env_id\tepisode\tcycle\tlabel", 0) != 0)
    throw data_error("annotation: missing header in " + path);
  int cols = 1;
  for (char c : line)
    if (c == '\t') ++cols;
  const int dim = cols - 4;
  if (dim < 1) throw data_error("annotation: no feature columns in " + path);

  std::vector<AnnotationRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      parts.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (static_cast<int>(parts.size()) != cols)
      throw data_error("annotation: line " + std::to_string(lineno) +
                       " has " + std::to_string(parts.size()) + " columns");
    AnnotationRecord r;
    r.env_id = parts[0];
    try {
      r.episode = std::stoi(parts[1]);
      r.cycle = std::stoi(parts[2]);
      if (parts[3].size() != 1)
        throw data_error("annotation: bad label field");
      r.label = label_from_char(parts[3][0]);
      r.features.resize(dim);
      for (int j = 0; j < dim; ++j) r.features[j] = std::stod(parts[4 + j]);
    } catch (const std::invalid_argument&) {
      throw data_error("annotation: unparsable value on line " +
                       std::to_string(lineno));
    } catch (const std::out_of_range&) {
      throw data_error("annotation: value out of range on line " +
                       std::to_string(lineno));
    }
    if (!r.features.allFinite())
      throw data_error("annotation: non-finite feature on line " +
                       std::to_string(lineno));
    records.push_back(std::move(r));
  }
  return records;
}

Vec ClassifierModel::logits(const Vec& features) const {
  if (features.size() != feature_dim)
    throw data_error("classifier: feature size " +
                     std::to_string(features.size()) + ", expected " +
                     std::to_string(feature_dim));
  if (arch == ClassifierArch::SoftmaxLinear) return w1 * features + b1;
  Vec h = (w1 * features + b1).array().tanh();
  return w2 * h + b2;
}

namespace {

Vec softmax(const Vec& z) {
  Vec p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

int argmax_first(const Vec& p) {
  int best = 0;
  for (int k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

}  // namespace

ClassifyResult classify(const ClassifierModel& model, const Vec& features) {
  ClassifyResult out;
  out.probs = softmax(model.logits(features));
  out.label = static_cast<DifficultyLabel>(argmax_first(out.probs));
  return out;
}

namespace {

struct AdamSlot {
  Mat mw, vw;
  Vec mb, vb;
  void init(const Mat& w, const Vec& b) {
    mw = Mat::Zero(w.rows(), w.cols());
    vw = mw;
    mb = Vec::Zero(b.size());
    vb = mb;
  }
};

void adamw_update(Mat& w, Vec& b, const Mat& gw, const Vec& gb, AdamSlot& st,
                  int t, double lr, double wd) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  st.mw = b1 * st.mw + (1.0 - b1) * gw;
  st.vw = (b2 * st.vw.array() + (1.0 - b2) * gw.array().square()).matrix();
  w.array() -= lr * wd * w.array();
  w.array() -= lr * (st.mw.array() / c1) / ((st.vw.array() / c2).sqrt() + eps);
  st.mb = b1 * st.mb + (1.0 - b1) * gb;
  st.vb = (b2 * st.vb.array() + (1.0 - b2) * gb.array().square()).matrix();
  b.array() -= lr * wd * b.array();
  b.array() -= lr * (st.mb.array() / c1) / ((st.vb.array() / c2).sqrt() + eps);
}

struct SplitIndices {
  std::vector<int> train, val;
};

SplitIndices stratified_split(const std::vector<AnnotationRecord>& records,
                              Rng& rng) {
  SplitIndices out;
  for (int k = 0; k < kNumLabels; ++k) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(records.size()); ++i)
      if (static_cast<int>(records[i].label) == k) idx.push_back(i);
    if (idx.empty()) continue;
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.below(i)]);
    std::size_t n_val = idx.size() >= 2
                            ? std::max<std::size_t>(1, idx.size() / 5)
                            : 0;
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_val ? out.val : out.train).push_back(idx[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

// mean of w_y * (-log p_y), normalized by the mean class weight
double weighted_ce(const ClassifierModel& m,
                   const std::vector<AnnotationRecord>& records,
                   const std::vector<int>& idx) {
  double loss = 0.0, wsum = 0.0;
  for (int i : idx) {
    Vec p = softmax(m.logits(records[i].features));
    const int y = static_cast<int>(records[i].label);
    const double w = m.class_weights[y];
    loss += w * -std::log(std::max(p[y], 1e-300));
    wsum += w;
  }
  return wsum > 0.0 ? loss / wsum : 0.0;
}

}  // namespace

ClassifierTrainResult train_classifier(
    const std::vector<AnnotationRecord>& records, const TrainConfig& cfg,
    ClassifierArch arch) {
  if (records.empty()) throw data_error("train_classifier: no records");
  const int dim = static_cast<int>(records[0].features.size());
  std::array<int, kNumLabels> counts{};
  for (const auto& r : records) {
    if (r.features.size() != dim)
      throw data_error("train_classifier: inconsistent feature size");
    if (!r.features.allFinite())
      throw data_error("train_classifier: non-finite feature");
    ++counts[static_cast<int>(r.label)];
  }
  int distinct = 0;
  for (int c : counts)
    if (c > 0) ++distinct;
  if (distinct < 2)
    throw data_error("train_classifier: needs at least two distinct labels");

  ClassifierModel m;
  m.arch = arch;
  m.feature_dim = dim;
  m.class_weights = class_weights(counts);
  Rng init_rng = Rng::substream(cfg.seed, 0xc1a5);
  auto xavier = [&](Mat& w, int rows, int cols) {
    w.resize(rows, cols);
    const double s = std::sqrt(2.0 / (rows + cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = s * init_rng.normal();
  };
  if (arch == ClassifierArch::SoftmaxLinear) {
    m.hidden_dim = 0;
    xavier(m.w1, kNumLabels, dim);
    m.b1 = Vec::Zero(kNumLabels);
  } else {
    m.hidden_dim = kClassifierHidden;
    xavier(m.w1, m.hidden_dim, dim);
    m.b1 = Vec::Zero(m.hidden_dim);
    xavier(m.w2, kNumLabels, m.hidden_dim);
    m.b2 = Vec::Zero(kNumLabels);
  }

  Rng split_rng = Rng::substream(cfg.seed, 0x59173);
  SplitIndices split = stratified_split(records, split_rng);
  const std::vector<int>& eval_idx =
      split.val.empty() ? split.train : split.val;

  AdamSlot s1, s2;
  s1.init(m.w1, m.b1);
  if (arch == ClassifierArch::Mlp1Hidden) s2.init(m.w2, m.b2);

  ClassifierTrainResult out;
  ClassifierModel best = m;
  double best_loss = weighted_ce(m, records, eval_idx);
  out.best_epoch = 0;
  int since_best = 0;
  int t = 0;
  Rng order_rng = Rng::substream(cfg.seed, 0x0d3d);
  std::vector<int> order = split.train;
  const int batch = std::max(1, std::min<int>(cfg.batch_size,
                                              static_cast<int>(order.size())));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t off = 0; off < order.size(); off += batch) {
      const std::size_t hi = std::min(order.size(), off + batch);
      Mat gw1 = Mat::Zero(m.w1.rows(), m.w1.cols());
      Vec gb1 = Vec::Zero(m.b1.size());
      Mat gw2;
      Vec gb2;
      if (arch == ClassifierArch::Mlp1Hidden) {
        gw2 = Mat::Zero(m.w2.rows(), m.w2.cols());
        gb2 = Vec::Zero(m.b2.size());
      }
      double wsum = 0.0;
      for (std::size_t i = off; i < hi; ++i)
        wsum += m.class_weights[static_cast<int>(records[order[i]].label)];
      if (wsum <= 0.0) continue;
      for (std::size_t i = off; i < hi; ++i) {
        const AnnotationRecord& r = records[order[i]];
        const int y = static_cast<int>(r.label);
        const double w = m.class_weights[y];
        if (arch == ClassifierArch::SoftmaxLinear) {
          Vec p = softmax(m.w1 * r.features + m.b1);
          p[y] -= 1.0;
          p *= w / wsum;
          gw1 += p * r.features.transpose();
          gb1 += p;
        } else {
          Vec hpre = m.w1 * r.features + m.b1;
          Vec h = hpre.array().tanh();
          Vec p = softmax(m.w2 * h + m.b2);
          p[y] -= 1.0;
          p *= w / wsum;
          gw2 += p * h.transpose();
          gb2 += p;
          Vec dh = m.w2.transpose() * p;
          Vec dpre = dh.array() * (1.0 - h.array().square());
          gw1 += dpre * r.features.transpose();
          gb1 += dpre;
        }
      }
      ++t;
      adamw_update(m.w1, m.b1, gw1, gb1, s1, t, cfg.learning_rate,
                   cfg.weight_decay);
      if (arch == ClassifierArch::Mlp1Hidden)
        adamw_update(m.w2, m.b2, gw2, gb2, s2, t, cfg.learning_rate,
                     cfg.weight_decay);
    }
    const double val_loss = weighted_ce(m, records, eval_idx);
    out.val_loss_curve.push_back(val_loss);
    if (val_loss < best_loss - 1e-12) {
      best_loss = val_loss;
      best = m;
      out.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= kPatience) {
      break;
    }
  }

  out.model = best;
  int hits = 0;
  for (int i : eval_idx)
    if (classify(out.model, records[i].features).label == records[i].label)
      ++hits;
  out.val_accuracy =
      eval_idx.empty() ? 0.0 : static_cast<double>(hits) / eval_idx.size();
  return out;
}

double classifier_accuracy(const ClassifierModel& model,
                           const std::vector<AnnotationRecord>& records) {
  if (records.empty()) throw data_error("classifier_accuracy: no records");
  int hits = 0;
  for (const auto& r : records)
    if (classify(model, r.features).label == r.label) ++hits;
  return static_cast<double>(hits) / records.size();
}

void save_classifier(const std::string& path, const ClassifierModel& model) {
  using namespace binio;
  std::string out;
  put_bytes(out, kMagic, 8);
  put_u32(out, kVersion);
  put_u8(out, kClassifierKind);
  put_u8(out, static_cast<std::uint8_t>(model.arch));
  put_u32(out, kNumLabels);
  put_u32(out, static_cast<std::uint32_t>(model.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(model.hidden_dim));
  for (int k = 0; k < kNumLabels; ++k) put_f64(out, model.class_weights[k]);
  auto put_tensor = [&out](const Mat& w, const Vec& b) {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        put_f32(out, static_cast<float>(w(r, c)));
    for (Eigen::Index i = 0; i < b.size(); ++i)
      put_f32(out, static_cast<float>(b[i]));
  };
  put_tensor(model.w1, model.b1);
  if (model.arch == ClassifierArch::Mlp1Hidden)
    put_tensor(model.w2, model.b2);
  write_file(path, out, "classifier");
}

ClassifierModel load_classifier(const std::string& path) {
  using namespace binio;
  const std::string bytes = read_file(path, "classifier");
  Reader r{bytes, "classifier"};
  r.need(8);
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw data_error("classifier: bad magic in " + path);
  r.pos = 8;
  if (r.u32() != kVersion)
    throw data_error("classifier: unsupported version in " + path);
  if (r.u8() != kClassifierKind)
    throw data_error("classifier: not a classifier checkpoint: " + path);
  ClassifierModel m;
  const std::uint8_t arch = r.u8();
  if (arch > 1) throw data_error("classifier: bad architecture id in " + path);
  m.arch = static_cast<ClassifierArch>(arch);
  if (r.u32() != kNumLabels)
    throw data_error("classifier: unexpected class count in " + path);
  m.feature_dim = static_cast<int>(r.u32());
  m.hidden_dim = static_cast<int>(r.u32());
  if (m.feature_dim < 1)
    throw data_error("classifier: bad feature dim in " + path);
  m.class_weights.resize(kNumLabels);
  for (int k = 0; k < kNumLabels; ++k) m.class_weights[k] = r.f64();
  auto read_tensor = [&r](Mat& w, Vec& b, int rows, int cols) {
    w.resize(rows, cols);
    for (int rr = 0; rr < rows; ++rr)
      for (int c = 0; c < cols; ++c) w(rr, c) = r.f32();
    b.resize(rows);
    for (int i = 0; i < rows; ++i) b[i] = r.f32();
  };
  if (m.arch == ClassifierArch::SoftmaxLinear) {
    if (m.hidden_dim != 0)
      throw data_error("classifier: linear head with hidden units in " + path);
    read_tensor(m.w1, m.b1, kNumLabels, m.feature_dim);
  } else {
    if (m.hidden_dim < 1)
      throw data_error("classifier: bad hidden dim in " + path);
    read_tensor(m.w1, m.b1, m.hidden_dim, m.feature_dim);
    read_tensor(m.w2, m.b2, kNumLabels, m.hidden_dim);
  }
  if (r.pos != bytes.size())
    throw data_error("classifier: trailing bytes in " + path);
  return m;
}

const char* to_string(ConfigPreset p) {
  switch (p) {
    case ConfigPreset::SixLevel: return "six";
    case ConfigPreset::ThreeLevel: return "three";
  }
  throw config_error("unknown config preset");
}

ConfigPreset preset_from_string(const std::string& s) {
  if (s == "six") return ConfigPreset::SixLevel;
  if (s == "three") return ConfigPreset::ThreeLevel;
  throw config_error("unknown config preset: " + s);
}

ConfigMap make_config_map(ConfigPreset preset) {
  auto entry = [](int steps, Solver solver, IntegrationMode mode,
                  LastStep last) {
    InferenceConfig c;
    c.steps = steps;
    c.solver = solver;
    c.mode = mode;
    c.last_step = last;
    return c;
  };
  ConfigMap map;
  map.preset = preset;
  using D = DifficultyLabel;
  auto set = [&map](D d, const InferenceConfig& c) {
    map.entries[static_cast<int>(d)] = c;
  };
  if (preset == ConfigPreset::SixLevel) {
    set(D::I, entry(1, Solver::Euler, IntegrationMode::ODE, LastStep::None));
    set(D::N, entry(5, Solver::Euler, IntegrationMode::ODE, LastStep::None));
    set(D::G, entry(10, Solver::Euler, IntegrationMode::ODE, LastStep::None));
    set(D::S, entry(50, Solver::Euler, IntegrationMode::SDE, LastStep::None));
    set(D::C,
        entry(100, Solver::Heun, IntegrationMode::SDE, LastStep::Tweedie));
    set(D::E, entry(1, Solver::Euler, IntegrationMode::ODE, LastStep::None));
  } else {
    // collapsed tiers; the hard tier is kept verbatim even though the
    // sampler rejects rk4 under sde when it is actually used
    const InferenceConfig easy =
        entry(5, Solver::Euler, IntegrationMode::ODE, LastStep::None);
    const InferenceConfig medium =
        entry(10, Solver::Heun, IntegrationMode::ODE, LastStep::None);
    const InferenceConfig hard =
        entry(20, Solver::RK4, IntegrationMode::SDE, LastStep::None);
    set(D::I, easy);
    set(D::E, easy);
    set(D::N, medium);
    set(D::G, medium);
    set(D::S, hard);
    set(D::C, hard);
  }
  return map;
}

const InferenceConfig& map_config(DifficultyLabel d, const ConfigMap& map) {
  return map.entries[static_cast<int>(d)];
}

}  // namespace sip
