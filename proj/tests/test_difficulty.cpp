#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "sip/difficulty.hpp"

using namespace sip;

namespace {

// oracle-labeled states harvested from scripted push episodes, capped per
// class so the dataset is roughly balanced
std::vector<AnnotationRecord> harvest(TaskKind task, int per_class,
                                      std::uint64_t seed0, int max_episodes) {
  EnvParams p;
  std::array<std::vector<AnnotationRecord>, kNumLabels> buckets;
  auto full = [&]() {
    for (const auto& b : buckets)
      if (!b.empty() && static_cast<int>(b.size()) < per_class) return false;
    int nonempty = 0;
    for (const auto& b : buckets)
      if (static_cast<int>(b.size()) >= per_class) ++nonempty;
    return nonempty >= 4;
  };
  for (int ep = 0; ep < max_episodes && !full(); ++ep) {
    std::uint64_t seed = seed0 + ep;
    SimState s = reset(task, seed, p);
    Rng rng = Rng::substream(seed, 0x3c9e);
    int settle = 0;
    for (int t = 0; t < p.horizon && settle < 4; ++t) {
      DifficultyLabel lbl = oracle_label(s, task, p);
      auto& b = buckets[static_cast<int>(lbl)];
      if (static_cast<int>(b.size()) < per_class)
        b.push_back({featurize(s, task, p), lbl, to_string(task), ep, t});
      if (is_success(s, task, p)) ++settle;
      Vec a = scripted_expert(s, task, rng, p);
      s = step(s, task, a, p);
    }
  }
  std::vector<AnnotationRecord> out;
  for (auto& b : buckets)
    for (auto& r : b) out.push_back(std::move(r));
  return out;
}

TrainConfig classifier_cfg(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.weight_decay = 1e-5;
  cfg.batch_size = 64;
  cfg.epochs = 400;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("label characters round trip in fixed order") {
  const char expect[] = {'I', 'N', 'G', 'S', 'C', 'E'};
  for (int k = 0; k < kNumLabels; ++k) {
    CHECK(to_char(kAllLabels[k]) == expect[k]);
    CHECK(label_from_char(expect[k]) == kAllLabels[k]);
  }
  CHECK_THROWS_AS(label_from_char('Q'), data_error);
}

TEST_CASE("class weights follow the inverse frequency identity") {
  Vec w = class_weights({100, 50, 25, 25, 0, 0});
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(2.0));
  CHECK(w[3] == doctest::Approx(2.0));
  CHECK(w[4] == 0.0);
  CHECK(w[5] == 0.0);

  Vec uniform = class_weights({7, 7, 7, 7, 7, 7});
  for (int k = 0; k < kNumLabels; ++k) CHECK(uniform[k] == doctest::Approx(1.0));

  Vec two = class_weights({1, 1, 0, 0, 0, 0});
  CHECK(two[0] == doctest::Approx(1.0));
  CHECK(two[1] == doctest::Approx(1.0));
  CHECK(two[2] == 0.0);

  // weighted counts always add back to the sample count
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<int, kNumLabels> counts{};
    int n = 0;
    for (auto& c : counts) {
      c = static_cast<int>(rng.below(40));
      n += c;
    }
    if (n == 0) continue;
    Vec ww = class_weights(counts);
    double total = 0.0;
    for (int k = 0; k < kNumLabels; ++k) total += ww[k] * counts[k];
    CHECK(total == doctest::Approx(n).epsilon(1e-12));
  }

  CHECK_THROWS_AS(class_weights({0, 0, 0, 0, 0, 0}), data_error);
  CHECK_THROWS_AS(class_weights({-1, 2, 0, 0, 0, 0}), data_error);
}

TEST_CASE("oracle rules fire in precedence order") {
  EnvParams p;
  SimState s;
  s.gripper_pos = Vec2(-0.3, 0.0);
  s.object_pos = Vec2(0.2, 0.0);
  s.goal_pos = Vec2(0.5, 0.5);
  CHECK(oracle_label(s, TaskKind::ReachLift, p) == DifficultyLabel::I);
  CHECK(oracle_label(s, TaskKind::ReachLift, p) ==
        oracle_label(s, TaskKind::ReachLift, p));

  s.gripper_pos = Vec2(0.15, 0.08);
  CHECK(oracle_label(s, TaskKind::ReachLift, p) == DifficultyLabel::N);

  s.attached = true;
  CHECK(oracle_label(s, TaskKind::ReachLift, p) == DifficultyLabel::G);

  // success screens everything else
  s.object_pos = Vec2(0.5, 0.52);
  CHECK(oracle_label(s, TaskKind::ReachLift, p) == DifficultyLabel::E);

  SimState push;
  push.gripper_pos = Vec2(0.0, 0.0);
  push.object_pos = Vec2(0.05, 0.0);
  push.goal_pos = Vec2(0.4, 0.0);
  push.contact = true;
  CHECK(oracle_label(push, TaskKind::PushBlock, p) == DifficultyLabel::C);
  push.contact = false;
  CHECK(oracle_label(push, TaskKind::PushBlock, p) == DifficultyLabel::N);
  push.gripper_pos = Vec2(-0.5, 0.0);
  CHECK(oracle_label(push, TaskKind::PushBlock, p) == DifficultyLabel::I);

  SimState peg;
  peg.slot.entry = Vec2(0.4, 0.0);
  peg.slot.width = p.slot_width;
  peg.attached = true;
  peg.goal_pos = Vec2(0.4 + p.slot_depth, 0.0);
  peg.gripper_pos = Vec2(0.37, 0.03);
  peg.object_pos = peg.gripper_pos;
  CHECK(oracle_label(peg, TaskKind::PegInSlot, p) == DifficultyLabel::S);
  peg.gripper_pos = Vec2(0.32, 0.03);
  peg.object_pos = peg.gripper_pos;
  CHECK(oracle_label(peg, TaskKind::PegInSlot, p) == DifficultyLabel::N);
  peg.gripper_pos = Vec2(0.0, -0.4);
  peg.object_pos = peg.gripper_pos;
  CHECK(oracle_label(peg, TaskKind::PegInSlot, p) == DifficultyLabel::I);
}

TEST_CASE("scripted episodes visit exactly the labels each task can reach") {
  EnvParams p;
  struct Expect {
    TaskKind task;
    std::set<DifficultyLabel> labels;
  };
  const Expect cases[] = {
      {TaskKind::ReachLift,
       {DifficultyLabel::I, DifficultyLabel::N, DifficultyLabel::G,
        DifficultyLabel::E}},
      {TaskKind::PushBlock,
       {DifficultyLabel::I, DifficultyLabel::N, DifficultyLabel::C,
        DifficultyLabel::E}},
      {TaskKind::PegInSlot,
       {DifficultyLabel::I, DifficultyLabel::N, DifficultyLabel::S,
        DifficultyLabel::E}},
  };
  for (const auto& c : cases) {
    std::set<DifficultyLabel> seen;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      SimState s = reset(c.task, 300 + seed, p);
      Rng rng = Rng::substream(300 + seed, 0x3c9e);
      CHECK(oracle_label(s, c.task, p) == DifficultyLabel::I);
      int settle = 0;
      for (int t = 0; t < p.horizon && settle < 4; ++t) {
        seen.insert(oracle_label(s, c.task, p));
        if (is_success(s, c.task, p)) ++settle;
        Vec a = scripted_expert(s, c.task, rng, p);
        s = step(s, c.task, a, p);
      }
      seen.insert(oracle_label(s, c.task, p));
    }
    std::string task_name = to_string(c.task);
    CAPTURE(task_name);
    CHECK(seen == c.labels);
  }
}

TEST_CASE("features are tolerance scaled and finite") {
  EnvParams p;
  SimState s;
  s.gripper_pos = Vec2(-0.3, 0.0);
  s.object_pos = Vec2(0.2, 0.0);
  s.goal_pos = Vec2(0.2, 0.25);
  Vec f = featurize(s, TaskKind::ReachLift, p);
  REQUIRE(f.size() == kFeatureDim);
  CHECK(f.allFinite());
  CHECK(f[0] == doctest::Approx(0.5 / p.d_near));
  CHECK(f[1] == doctest::Approx(0.25 / p.success_tol));
  CHECK(f[2] == 0.0);
  CHECK(f[3] == 0.0);
  CHECK(f[5] == doctest::Approx(0.0));
  CHECK(f[6] == doctest::Approx(0.25 / p.success_tol));
  CHECK(f[7] == doctest::Approx(0.5 / p.d_near));
  CHECK(f[9] == 0.0);
  CHECK(f[10] == 0.0);
  CHECK(f[11] == 0.0);

  s.attached = true;
  s.object_pos = Vec2(0.2, 0.22);
  f = featurize(s, TaskKind::ReachLift, p);
  CHECK(f[2] == 1.0);
  CHECK(f[11] == 1.0);

  SimState peg;
  peg.slot.entry = Vec2(0.4, 0.0);
  peg.slot.width = p.slot_width;
  peg.attached = true;
  peg.goal_pos = Vec2(0.4 + p.slot_depth, 0.0);
  peg.gripper_pos = Vec2(0.41, 0.01);
  peg.object_pos = peg.gripper_pos;
  f = featurize(peg, TaskKind::PegInSlot, p);
  CHECK(f[9] == doctest::Approx(0.01 / (p.slot_width * 0.5)));
  CHECK(f[10] == doctest::Approx(0.01 / p.slot_depth));

  // all features over scripted rollouts stay finite
  for (TaskKind k :
       {TaskKind::ReachLift, TaskKind::PushBlock, TaskKind::PegInSlot}) {
    SimState st = reset(k, 17, p);
    Rng rng = Rng::substream(17, 0x3c9e);
    for (int t = 0; t < 80; ++t) {
      CHECK(featurize(st, k, p).allFinite());
      st = step(st, k, scripted_expert(st, k, rng, p), p);
    }
  }
}

TEST_CASE("annotation files round trip exactly") {
  auto records = harvest(TaskKind::PushBlock, 20, 9000, 60);
  REQUIRE(records.size() >= 60);
  const std::string path = "difficulty_annotations.tsv";
  save_annotations(path, records);
  auto loaded = load_annotations(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].env_id == records[i].env_id);
    CHECK(loaded[i].episode == records[i].episode);
    CHECK(loaded[i].cycle == records[i].cycle);
    CHECK(loaded[i].label == records[i].label);
    REQUIRE(loaded[i].features.size() == records[i].features.size());
    for (int j = 0; j < records[i].features.size(); ++j)
      CHECK(loaded[i].features[j] == records[i].features[j]);
  }
  std::remove(path.c_str());

  const std::string bad = "difficulty_bad.tsv";
  {
    std::ofstream out(bad);
    out << "not_a_header\n";
  }
  CHECK_THROWS_AS(load_annotations(bad), data_error);
  {
    std::ofstream out(bad);
    out << "env_id\tepisode\tcycle\tlabel\tf0\n";
    out << "e\t0\t0\tI\t1.0\t2.0\n";
  }
  CHECK_THROWS_AS(load_annotations(bad), data_error);
  {
    std::ofstream out(bad);
    out << "env_id\tepisode\tcycle\tlabel\tf0\n";
    out << "e\t0\t0\tZ\t1.0\n";
  }
  CHECK_THROWS_AS(load_annotations(bad), data_error);
  {
    std::ofstream out(bad);
    out << "env_id\tepisode\tcycle\tlabel\tf0\n";
    out << "e\t0\t0\tI\tnan\n";
  }
  CHECK_THROWS_AS(load_annotations(bad), data_error);
  std::remove(bad.c_str());

  AnnotationRecord tabbed;
  tabbed.env_id = "has\ttab";
  tabbed.features = Vec::Ones(3);
  CHECK_THROWS_AS(save_annotations(bad, {tabbed}), data_error);
}

TEST_CASE("linearly separable labels are classified perfectly") {
  Rng rng(12);
  std::vector<AnnotationRecord> records;
  for (int i = 0; i < 60; ++i) {
    AnnotationRecord r;
    bool hi = i % 2 == 0;
    r.features = rng.normal_vec(4) * 0.3;
    r.features[0] += hi ? 3.0 : -3.0;
    r.label = hi ? DifficultyLabel::E : DifficultyLabel::I;
    r.env_id = "synthetic";
    records.push_back(r);
  }
  auto res = train_classifier(records, classifier_cfg(5),
                              ClassifierArch::SoftmaxLinear);
  CHECK(res.val_accuracy == 1.0);
}

TEST_CASE("single label data is rejected") {
  std::vector<AnnotationRecord> records(10);
  for (auto& r : records) {
    r.features = Vec::Ones(3);
    r.label = DifficultyLabel::N;
  }
  CHECK_THROWS_AS(train_classifier(records, classifier_cfg(1)), data_error);
  CHECK_THROWS_AS(train_classifier({}, classifier_cfg(1)), data_error);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto records = harvest(TaskKind::PushBlock, 30, 4000, 80);
  auto a = train_classifier(records, classifier_cfg(7));
  auto b = train_classifier(records, classifier_cfg(7));
  CHECK(a.model.w1 == b.model.w1);
  CHECK(a.model.w2 == b.model.w2);
  CHECK(a.model.b1 == b.model.b1);
  CHECK(a.model.b2 == b.model.b2);
  CHECK(a.val_accuracy == b.val_accuracy);
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("oracle labeled push states are learned accurately") {
  auto records = harvest(TaskKind::PushBlock, 75, 2000, 150);
  REQUIRE(records.size() == 300);
  auto res = train_classifier(records, classifier_cfg(11));
  CAPTURE(res.val_accuracy);
  CAPTURE(res.best_epoch);
  CHECK(res.val_accuracy >= 0.90);

  // fresh episodes, same oracle: the classifier transfers
  auto fresh = harvest(TaskKind::PushBlock, 25, 60001, 80);
  REQUIRE(fresh.size() >= 80);
  double acc = classifier_accuracy(res.model, fresh);
  CAPTURE(acc);
  CHECK(acc >= 0.90);

  // feature noise at sigma 0.30 costs at most 10 points
  Rng noise(424242);
  auto noisy = fresh;
  for (auto& r : noisy) r.features += 0.30 * noise.normal_vec(r.features.size());
  double noisy_acc = classifier_accuracy(res.model, noisy);
  CAPTURE(noisy_acc);
  CHECK(acc - noisy_acc <= 0.10);
}

TEST_CASE("shuffled labels train to chance level") {
  // pool all three tasks so every label appears and chance sits at 1/6
  auto records = harvest(TaskKind::ReachLift, 25, 2000, 80);
  auto push = harvest(TaskKind::PushBlock, 25, 2100, 80);
  auto peg = harvest(TaskKind::PegInSlot, 25, 2200, 80);
  records.insert(records.end(), push.begin(), push.end());
  records.insert(records.end(), peg.begin(), peg.end());
  REQUIRE(records.size() == 300);
  std::set<DifficultyLabel> present;
  for (const auto& r : records) present.insert(r.label);
  REQUIRE(present.size() == kNumLabels);
  Rng rng(99);
  for (std::size_t i = records.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(records[i - 1].label, records[j].label);
  }
  auto res = train_classifier(records, classifier_cfg(13));
  CAPTURE(res.val_accuracy);
  CHECK(res.val_accuracy >= 1.0 / 6.0 - 0.10);
  CHECK(res.val_accuracy <= 1.0 / 6.0 + 0.10);
}

TEST_CASE("probabilities normalize and argmax survives logit scaling") {
  Rng rng(8);
  ClassifierModel m;
  m.arch = ClassifierArch::SoftmaxLinear;
  m.feature_dim = 5;
  m.w1 = Mat::Zero(kNumLabels, 5);
  for (int r = 0; r < kNumLabels; ++r)
    for (int c = 0; c < 5; ++c) m.w1(r, c) = rng.normal();
  m.b1 = rng.normal_vec(kNumLabels);
  m.class_weights = Vec::Ones(kNumLabels);

  for (int trial = 0; trial < 25; ++trial) {
    Vec x = rng.normal_vec(5);
    auto out = classify(m, x);
    CHECK(std::abs(out.probs.sum() - 1.0) < 1e-9);
    ClassifierModel scaled = m;
    scaled.w1 *= 7.5;
    scaled.b1 *= 7.5;
    CHECK(classify(scaled, x).label == out.label);
  }

  // uniform logits break ties toward the first label
  ClassifierModel zero = m;
  zero.w1.setZero();
  zero.b1.setZero();
  CHECK(classify(zero, rng.normal_vec(5)).label == DifficultyLabel::I);

  CHECK_THROWS_AS(classify(m, Vec::Zero(4)), data_error);
}

TEST_CASE("classifier checkpoints round trip at single precision") {
  auto records = harvest(TaskKind::PushBlock, 20, 7000, 60);
  auto res = train_classifier(records, classifier_cfg(3));
  const std::string path = "classifier_roundtrip.bin";
  save_classifier(path, res.model);
  ClassifierModel loaded = load_classifier(path);
  CHECK(loaded.arch == res.model.arch);
  CHECK(loaded.feature_dim == res.model.feature_dim);
  CHECK(loaded.hidden_dim == res.model.hidden_dim);
  for (int k = 0; k < kNumLabels; ++k)
    CHECK(loaded.class_weights[k] == res.model.class_weights[k]);
  for (int r = 0; r < loaded.w1.rows(); ++r)
    for (int c = 0; c < loaded.w1.cols(); ++c)
      CHECK(loaded.w1(r, c) ==
            static_cast<double>(static_cast<float>(res.model.w1(r, c))));
  for (int r = 0; r < loaded.w2.rows(); ++r)
    for (int c = 0; c < loaded.w2.cols(); ++c)
      CHECK(loaded.w2(r, c) ==
            static_cast<double>(static_cast<float>(res.model.w2(r, c))));

  // loaded and original agree on the whole dataset
  int agree = 0;
  for (const auto& r : records)
    if (classify(loaded, r.features).label ==
        classify(res.model, r.features).label)
      ++agree;
  CHECK(agree == static_cast<int>(records.size()));

  // corruption: wrong kind byte, trailing bytes, truncation
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  const std::string bad = "classifier_bad.bin";
  {
    std::string k = bytes;
    k[12] = 0;
    std::ofstream out(bad, std::ios::binary);
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
  }
  CHECK_THROWS_AS(load_classifier(bad), data_error);
  {
    std::string k = bytes + "x";
    std::ofstream out(bad, std::ios::binary);
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
  }
  CHECK_THROWS_AS(load_classifier(bad), data_error);
  {
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 3));
  }
  CHECK_THROWS_AS(load_classifier(bad), data_error);
  std::remove(path.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("preset maps hold the fixed inference menus") {
  ConfigMap six = make_config_map(ConfigPreset::SixLevel);
  const InferenceConfig& s = map_config(DifficultyLabel::S, six);
  CHECK(s.steps == 50);
  CHECK(s.solver == Solver::Euler);
  CHECK(s.mode == IntegrationMode::SDE);
  CHECK(s.last_step == LastStep::None);
  const InferenceConfig& c = map_config(DifficultyLabel::C, six);
  CHECK(c.steps == 100);
  CHECK(c.solver == Solver::Heun);
  CHECK(c.mode == IntegrationMode::SDE);
  CHECK(c.last_step == LastStep::Tweedie);
  const InferenceConfig& i = map_config(DifficultyLabel::I, six);
  CHECK(i.steps == 1);
  CHECK(i.solver == Solver::Euler);
  CHECK(i.mode == IntegrationMode::ODE);
  CHECK(map_config(DifficultyLabel::E, six).steps == 1);
  CHECK(map_config(DifficultyLabel::N, six).steps == 5);
  CHECK(map_config(DifficultyLabel::G, six).steps == 10);

  // the step budget never shrinks as difficulty rises
  const DifficultyLabel ladder[] = {DifficultyLabel::I, DifficultyLabel::N,
                                    DifficultyLabel::G, DifficultyLabel::S,
                                    DifficultyLabel::C};
  int prev = 0;
  for (DifficultyLabel d : ladder) {
    int nfe = predicted_nfe(map_config(d, six));
    CHECK(nfe >= prev);
    prev = nfe;
  }

  ConfigMap three = make_config_map(ConfigPreset::ThreeLevel);
  const InferenceConfig& n3 = map_config(DifficultyLabel::N, three);
  CHECK(n3.steps == 10);
  CHECK(n3.solver == Solver::Heun);
  CHECK(n3.mode == IntegrationMode::ODE);
  CHECK(map_config(DifficultyLabel::G, three).steps == 10);
  CHECK(map_config(DifficultyLabel::I, three).steps == 5);
  CHECK(map_config(DifficultyLabel::E, three).steps == 5);
  const InferenceConfig& hard = map_config(DifficultyLabel::S, three);
  CHECK(hard.steps == 20);
  CHECK(hard.solver == Solver::RK4);
  CHECK(hard.mode == IntegrationMode::SDE);
  // the collapsed hard tier is stored verbatim but cannot integrate
  CHECK_THROWS_AS(hard.validate(), config_error);
  CHECK(map_config(DifficultyLabel::C, three).steps == 20);

  CHECK(std::string(to_string(ConfigPreset::SixLevel)) == "six");
  CHECK(preset_from_string("three") == ConfigPreset::ThreeLevel);
  CHECK_THROWS_AS(preset_from_string("nine"), config_error);
}
