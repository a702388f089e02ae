#pragma once

#include <array>
#include <string>
#include <vector>

#include "sip/common.hpp"
#include "sip/envs.hpp"
#include "sip/field.hpp"
#include "sip/sampler.hpp"

namespace sip {

// Ordered from cheapest to hardest control phase, with E (goal met) last.
// The order is fixed for reporting and tie-breaking; it carries no metric.
enum class DifficultyLabel { I, N, G, S, C, E };

inline constexpr int kNumLabels = 6;

inline constexpr std::array<DifficultyLabel, kNumLabels> kAllLabels = {
    DifficultyLabel::I, DifficultyLabel::N, DifficultyLabel::G,
    DifficultyLabel::S, DifficultyLabel::C, DifficultyLabel::E};

char to_char(DifficultyLabel d);
DifficultyLabel label_from_char(char c);

// Rule-based labeling from raw simulator state. Precedence:
// E (success), C (pushing with contact), S (peg near the slot mouth),
// G (holding the object), N (near the target), I otherwise.
DifficultyLabel oracle_label(const SimState& s, TaskKind task,
                             const EnvParams& p = {});

// w_k = n / (classes_present * count_k); zero-count classes get weight 0.
Vec class_weights(const std::array<int, kNumLabels>& counts);

inline constexpr int kFeatureDim = 13;

// Tolerance-scaled summary of the state: distances are divided by the
// threshold that defines the matching label boundary, so boundaries sit
// near feature value 1.
Vec featurize(const SimState& s, TaskKind task, const EnvParams& p = {});

struct AnnotationRecord {
  Vec features;
  DifficultyLabel label = DifficultyLabel::I;
  std::string env_id;
  int episode = 0;
  int cycle = 0;
};

void save_annotations(const std::string& path,
                      const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> load_annotations(const std::string& path);

enum class ClassifierArch { SoftmaxLinear, Mlp1Hidden };

inline constexpr int kClassifierHidden = 32;

struct ClassifierModel {
  ClassifierArch arch = ClassifierArch::SoftmaxLinear;
  int feature_dim = 0;
  int hidden_dim = 0;  // 0 for the linear head
  Mat w1;              // linear: labels x features; mlp: hidden x features
  Vec b1;
  Mat w2;  // mlp only: labels x hidden
  Vec b2;
  Vec class_weights;  // weights the model was trained with

  Vec logits(const Vec& features) const;
};

struct ClassifyResult {
  DifficultyLabel label = DifficultyLabel::I;
  Vec probs;  // softmax over the six labels
};

// Deterministic argmax; ties break toward the earlier label in enum order.
ClassifyResult classify(const ClassifierModel& model, const Vec& features);

struct ClassifierTrainResult {
  ClassifierModel model;
  double val_accuracy = 0.0;
  std::vector<double> val_loss_curve;  // one entry per trained epoch
  int best_epoch = 0;
};

// Weighted cross-entropy on a stratified 80/20 split with early stopping
// (patience 15 epochs on validation loss). Requires two distinct labels.
ClassifierTrainResult train_classifier(
    const std::vector<AnnotationRecord>& records, const TrainConfig& cfg,
    ClassifierArch arch = ClassifierArch::Mlp1Hidden);

// Fraction of records whose predicted label matches the annotation.
double classifier_accuracy(const ClassifierModel& model,
                           const std::vector<AnnotationRecord>& records);

void save_classifier(const std::string& path, const ClassifierModel& model);
ClassifierModel load_classifier(const std::string& path);

enum class ConfigPreset { SixLevel, ThreeLevel };

const char* to_string(ConfigPreset p);
ConfigPreset preset_from_string(const std::string& s);

struct ConfigMap {
  ConfigPreset preset = ConfigPreset::SixLevel;
  std::array<InferenceConfig, kNumLabels> entries;
};

ConfigMap make_config_map(ConfigPreset preset);

const InferenceConfig& map_config(DifficultyLabel d, const ConfigMap& map);

}  // namespace sip
