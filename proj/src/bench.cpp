#include "sip/bench.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sip/checkpoint.hpp"

namespace sip {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string::npos
                                             ? std::string::npos
                                             : comma - pos));
    if (item.empty()) throw config_error(key + ": empty list entry");
    out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw config_error(key + ": empty list");
  return out;
}

long parse_int(const std::string& key, const std::string& v, long lo, long hi) {
  std::size_t used = 0;
  long x = 0;
  try {
    x = std::stol(v, &used);
  } catch (const std::exception&) {
    throw config_error(key + ": not an integer: " + v);
  }
  if (used != v.size()) throw config_error(key + ": not an integer: " + v);
  if (x < lo || x > hi)
    throw config_error(key + ": " + v + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw config_error(key + ": not an unsigned integer: " + v);
  }
  if (used != v.size())
    throw config_error(key + ": not an unsigned integer: " + v);
  return x;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw config_error(key + ": not a number: " + v);
  }
  if (used != v.size() || !std::isfinite(x))
    throw config_error(key + ": not a finite number: " + v);
  return x;
}

double parse_positive(const std::string& key, const std::string& v) {
  const double x = parse_double(key, v);
  if (!(x > 0.0)) throw config_error(key + ": must be positive: " + v);
  return x;
}

double parse_nonnegative(const std::string& key, const std::string& v) {
  const double x = parse_double(key, v);
  if (!(x >= 0.0)) throw config_error(key + ": must be nonnegative: " + v);
  return x;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

struct SchemaRow {
  const char* key;
  const char* fallback;
  Setter set;
};

const std::vector<SchemaRow>& schema() {
  static const std::vector<SchemaRow> rows = {
      {"run.task", "reach_lift",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.task = task_kind_from_string(v);
       }},
      {"run.seed", "1",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = parse_u64(k, v);
       }},
      {"run.out", "out",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v.empty()) throw config_error(k + ": must not be empty");
         c.out = v;
       }},
      {"schedule.kind", "linear",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.schedule.kind = schedule_kind_from_string(v);
       }},
      {"schedule.beta_min", "0.1",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.schedule.beta_min = parse_nonnegative(k, v);
       }},
      {"schedule.beta_max", "20",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.schedule.beta_max = parse_positive(k, v);
       }},
      {"demos.count", "200",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.demo_count = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"train.target", "velocity",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.target = prediction_target_from_string(v);
       }},
      {"train.demos_file", "",
       [](RunConfig& c, const std::string&, const std::string& v) { c.demos_file = v; }},
      {"train.epochs", "900",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.epochs = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"train.batch_size", "256",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.batch_size = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"train.learning_rate", "2e-3",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.learning_rate = parse_positive(k, v);
       }},
      {"train.weight_decay", "1e-6",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.weight_decay = parse_nonnegative(k, v);
       }},
      {"train.ema_rate", "0.99",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ema_rate = parse_nonnegative(k, v);
         if (c.ema_rate >= 1.0) throw config_error(k + ": must be below 1");
       }},
      {"train.warmup_steps", "100",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.warmup_steps = static_cast<int>(parse_int(k, v, 0, 100000000));
       }},
      {"train.lr_schedule", "cosine",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "cosine" && v != "constant")
           throw config_error(k + ": expected cosine or constant: " + v);
         c.lr_schedule = v;
       }},
      {"train.hidden", "256,256",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hidden.clear();
         for (const auto& item : split_list(k, v))
           c.hidden.push_back(parse_int(k, item, 1, 65536));
       }},
      {"train.time_embed_dim", "32",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.time_embed_dim = static_cast<int>(parse_int(k, v, 2, 65536));
       }},
      {"train.activation", "gelu",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "gelu" && v != "relu")
           throw config_error(k + ": expected gelu or relu: " + v);
         c.activation = v;
       }},
      {"train.chunk_len", "8",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.chunk_len = static_cast<int>(parse_int(k, v, 1, 1024));
       }},
      {"train.exec_len", "4",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.exec_len = static_cast<int>(parse_int(k, v, 1, 1024));
       }},
      {"classifier.arch", "mlp",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "mlp" && v != "linear")
           throw config_error(k + ": expected mlp or linear: " + v);
         c.classifier_arch = v;
       }},
      {"classifier.per_class", "125",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.per_class = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"classifier.harvest_episodes", "4000",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.harvest_episodes = static_cast<int>(parse_int(k, v, 1, 10000000));
       }},
      {"classifier.sizes", "100,200,300,500",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.curve_sizes.clear();
         for (const auto& item : split_list(k, v))
           c.curve_sizes.push_back(static_cast<int>(parse_int(k, item, 2, 10000000)));
       }},
      {"classifier.epochs", "400",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.classifier_epochs = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"classifier.learning_rate", "5e-3",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.classifier_learning_rate = parse_positive(k, v);
       }},
      {"classifier.weight_decay", "1e-5",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.classifier_weight_decay = parse_nonnegative(k, v);
       }},
      {"classifier.batch_size", "64",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.classifier_batch_size = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"eval.episodes", "100",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.eval_episodes = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"eval.preset", "six",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.preset = preset_from_string(v);
       }},
      {"eval.modes", "min,max,adaptive",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.eval_modes = split_list(k, v);
         for (const auto& m : c.eval_modes)
           if (m != "min" && m != "max" && m != "adaptive")
             throw config_error(k + ": expected min, max, or adaptive: " + m);
       }},
      {"eval.policy_file", "",
       [](RunConfig& c, const std::string&, const std::string& v) { c.policy_file = v; }},
      {"eval.classifier_file", "",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.classifier_file = v;
       }},
      {"ablate.episodes", "20",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_episodes = static_cast<int>(parse_int(k, v, 1, 1000000));
       }},
      {"ablate.steps", "1,5,10,25,50,100",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_steps.clear();
         for (const auto& item : split_list(k, v))
           c.ablate_steps.push_back(static_cast<int>(parse_int(k, item, 1, 100000)));
       }},
      {"ablate.solvers", "euler,heun",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_solvers = split_list(k, v);
         for (const auto& s : c.ablate_solvers) solver_from_string(s);
       }},
      {"ablate.modes", "ode,sde",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_modes = split_list(k, v);
         for (const auto& m : c.ablate_modes) integration_mode_from_string(m);
       }},
      {"ablate.last_steps", "none,euler_step,tweedie",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_last_steps = split_list(k, v);
         for (const auto& l : c.ablate_last_steps) last_step_from_string(l);
       }},
  };
  return rows;
}

const SchemaRow* find_row(const std::string& key) {
  for (const auto& row : schema())
    if (key == row.key) return &row;
  return nullptr;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open config file: " + path);
  std::map<std::string, std::string> entries;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3)
        throw config_error(where + ": malformed section header: " + t);
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw config_error(where + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error(where + ": expected key = value: " + t);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw config_error(where + ": empty key");
    if (section.empty())
      throw config_error(where + ": key outside any [section]: " + key);
    const std::string full = section + "." + key;
    if (!find_row(full)) throw config_error(where + ": unknown key: " + full);
    if (!entries.emplace(full, value).second)
      throw config_error(where + ": duplicate key: " + full);
  }
  return entries;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot hash file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  return fnv1a64(bytes.data(), bytes.size());
}

// wall-clock artifacts are listed unhashed so identical reruns produce
// byte-identical manifests
void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::string>& unhashed = {}) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = cfg.resolved;
  auto ins = nlohmann::json::array();
  for (const auto& in : inputs)
    ins.push_back({{"path", in}, {"fnv1a64", hex64(hash_file(in))}});
  j["inputs"] = ins;
  auto outs = nlohmann::json::array();
  for (const auto& o : outputs)
    outs.push_back({{"path", o}, {"fnv1a64", hex64(hash_file(cfg.out + "/" + o))}});
  j["outputs"] = outs;
  j["unhashed_outputs"] = unhashed;
  const std::string path = cfg.out + "/manifest.json";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot write " + path);
  f << j.dump(2) << "\n";
  if (!f.flush()) throw data_error("write failed for " + path);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// oracle-labeled states from scripted rollouts, capped per class; episodes
// use consecutive seeds from seed0
std::vector<AnnotationRecord> harvest_annotations(TaskKind task, int per_class,
                                                  std::uint64_t seed0,
                                                  int max_episodes,
                                                  const EnvParams& p) {
  std::array<std::vector<AnnotationRecord>, kNumLabels> buckets;
  auto full = [&]() {
    int nonempty = 0;
    for (const auto& b : buckets) {
      if (!b.empty() && static_cast<int>(b.size()) < per_class) return false;
      if (!b.empty()) ++nonempty;
    }
    return nonempty >= 4;
  };
  for (int ep = 0; ep < max_episodes && !full(); ++ep) {
    const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(ep);
    SimState s = reset(task, seed, p);
    Rng rng = Rng::substream(seed, 0x3c9e);
    int settle = 0;
    for (int t = 0; t < p.horizon && settle < 4; ++t) {
      const DifficultyLabel lbl = oracle_label(s, task, p);
      auto& b = buckets[static_cast<int>(lbl)];
      if (static_cast<int>(b.size()) < per_class)
        b.push_back({featurize(s, task, p), lbl, to_string(task), ep, t});
      if (is_success(s, task, p)) ++settle;
      s = step(s, task, scripted_expert(s, task, rng, p), p);
    }
  }
  std::vector<AnnotationRecord> out;
  for (auto& b : buckets)
    for (auto& r : b) out.push_back(std::move(r));
  if (out.empty()) throw data_error("annotation harvest produced no records");
  return out;
}

TrainConfig classifier_train_config(const RunConfig& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.learning_rate = cfg.classifier_learning_rate;
  t.weight_decay = cfg.classifier_weight_decay;
  t.batch_size = cfg.classifier_batch_size;
  t.epochs = cfg.classifier_epochs;
  t.seed = seed;
  return t;
}

struct LoadedPolicy {
  FieldCheckpoint ckpt;
  PolicyBundle bundle;
};

LoadedPolicy load_policy(const RunConfig& cfg) {
  LoadedPolicy lp;
  lp.ckpt = load_field_checkpoint(cfg.policy_file);
  const int ad = action_dim(cfg.task);
  const Eigen::Index fd = lp.ckpt.model.action_dim();
  if (fd % ad != 0)
    throw data_error("policy checkpoint emits " + std::to_string(fd) +
                     " dims, not a whole number of " + std::to_string(ad) +
                     "-channel actions for " + to_string(cfg.task));
  lp.bundle.field = &lp.ckpt.model;
  lp.bundle.schedule = lp.ckpt.schedule;
  lp.bundle.target = lp.ckpt.model.target();
  lp.bundle.chunk_len = static_cast<int>(fd / ad);
  lp.bundle.exec_len = cfg.exec_len;
  return lp;
}

}  // namespace

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.weight_decay = weight_decay;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.ema_rate = ema_rate;
  t.lr_schedule = lr_schedule == "constant" ? TrainConfig::LrSchedule::Constant
                                            : TrainConfig::LrSchedule::Cosine;
  t.warmup_steps = warmup_steps;
  t.seed = seed;
  return t;
}

MlpSpec RunConfig::policy_arch() const {
  MlpSpec spec;
  spec.time_embed_dim = time_embed_dim;
  spec.hidden = hidden;
  spec.activation = activation == "relu" ? Activation::ReLU : Activation::GELU;
  spec.target = target;
  spec.schedule_kind = schedule.kind;
  return spec;
}

RunConfig load_run_config(const std::string& path, const CliOverrides& overrides) {
  std::map<std::string, std::string> merged;
  for (const auto& row : schema()) merged[row.key] = row.fallback;
  if (!path.empty())
    for (const auto& [k, v] : read_config_file(path)) merged[k] = v;
  if (!overrides.seed.empty()) merged["run.seed"] = overrides.seed;
  if (!overrides.out.empty()) merged["run.out"] = overrides.out;
  if (!overrides.task.empty()) merged["run.task"] = overrides.task;
  if (!overrides.mode.empty()) merged["eval.modes"] = overrides.mode;
  if (!overrides.preset.empty()) merged["eval.preset"] = overrides.preset;

  RunConfig cfg;
  for (const auto& [key, value] : merged) {
    const SchemaRow* row = find_row(key);
    row->set(cfg, key, value);
  }
  if (cfg.exec_len > cfg.chunk_len)
    throw config_error("train.exec_len: must not exceed train.chunk_len");
  if (cfg.schedule.beta_max <= cfg.schedule.beta_min)
    throw config_error("schedule.beta_max: must exceed schedule.beta_min");
  cfg.resolved = std::move(merged);
  return cfg;
}

void check_inputs(const RunConfig& cfg, const std::string& command) {
  std::vector<std::pair<std::string, std::string>> refs;
  if (command == "train") {
    if (cfg.demos_file.empty())
      throw config_error("train.demos_file is required for train");
    refs.emplace_back("train.demos_file", cfg.demos_file);
  } else if (command == "eval" || command == "ablate") {
    if (cfg.policy_file.empty())
      throw config_error("eval.policy_file is required for " + command);
    refs.emplace_back("eval.policy_file", cfg.policy_file);
    if (command == "eval" && !cfg.classifier_file.empty())
      refs.emplace_back("eval.classifier_file", cfg.classifier_file);
  }
  for (const auto& [key, file] : refs)
    if (!std::filesystem::exists(file))
      throw data_error(key + ": missing input file: " + file);
}

void print_resolved(const RunConfig& cfg, std::ostream& os) {
  os << "[resolved config]\n";
  for (const auto& [k, v] : cfg.resolved) os << k << " = " << v << "\n";
}

void cmd_gen_demos(const RunConfig& cfg, std::ostream& os) {
  std::filesystem::create_directories(cfg.out);
  const auto demos = gen_demos(cfg.task, cfg.demo_count, cfg.seed);
  long steps = 0;
  for (const auto& d : demos) steps += static_cast<long>(d.actions.size());
  save_demos(cfg.out + "/demos.bin", cfg.task, demos);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "gen_demos: %zu episodes, mean length %.1f -> %s/demos.bin\n",
                demos.size(), static_cast<double>(steps) / demos.size(),
                cfg.out.c_str());
  os << buf;
  write_manifest(cfg, "gen_demos", {}, {"demos.bin"});
}

void cmd_train(const RunConfig& cfg, std::ostream& os) {
  std::filesystem::create_directories(cfg.out);
  const DemoSet ds = load_demos(cfg.demos_file);
  if (ds.task != cfg.task)
    throw data_error("demo file holds " + std::string(to_string(ds.task)) +
                     " episodes but run.task is " + to_string(cfg.task));
  const Dataset data = build_chunk_dataset(ds.demos, cfg.task, cfg.chunk_len);
  os << "train: " << data.x_star.cols() << " chunks from " << ds.demos.size()
     << " episodes\n";
  const TrainResult trained =
      train_field(data, cfg.schedule, cfg.target, cfg.train_config(), cfg.policy_arch());
  save_field_checkpoint(cfg.out + "/policy.bin", trained, cfg.schedule, cfg.seed);

  const std::string curve_path = cfg.out + "/loss_curve.tsv";
  std::ofstream curve(curve_path, std::ios::binary | std::ios::trunc);
  if (!curve) throw data_error("cannot write " + curve_path);
  curve << "epoch\tloss\n";
  for (std::size_t i = 0; i < trained.loss_curve.size(); ++i)
    curve << i << '\t' << fmt_double(trained.loss_curve[i]) << '\n';
  if (!curve.flush()) throw data_error("write failed for " + curve_path);

  char buf[120];
  std::snprintf(buf, sizeof buf, "train: %d epochs, final loss %.4f -> %s/policy.bin\n",
                cfg.epochs, trained.loss_curve.back(), cfg.out.c_str());
  os << buf;
  write_manifest(cfg, "train", {cfg.demos_file}, {"policy.bin", "loss_curve.tsv"});
}

void cmd_train_classifier(const RunConfig& cfg, std::ostream& os) {
  std::filesystem::create_directories(cfg.out);
  const EnvParams p;
  const auto records =
      harvest_annotations(cfg.task, cfg.per_class,
                          splitmix64(cfg.seed ^ 0x7a6b6e01ull), cfg.harvest_episodes, p);
  const auto heldout =
      harvest_annotations(cfg.task, cfg.per_class,
                          splitmix64(cfg.seed ^ 0x7a6b6e02ull), cfg.harvest_episodes, p);
  std::array<int, kNumLabels> counts{};
  for (const auto& r : records) counts[static_cast<int>(r.label)]++;
  os << "train_classifier: " << records.size() << " records (";
  for (int k = 0; k < kNumLabels; ++k) {
    if (k) os << " ";
    os << to_char(kAllLabels[static_cast<std::size_t>(k)]) << "=" << counts[static_cast<std::size_t>(k)];
  }
  os << "), " << heldout.size() << " held out\n";
  save_annotations(cfg.out + "/annotations.tsv", records);

  const ClassifierArch arch = cfg.classifier_arch == "linear"
                                  ? ClassifierArch::SoftmaxLinear
                                  : ClassifierArch::Mlp1Hidden;

  // fixed shuffle so size-k subsets nest
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = Rng::substream(cfg.seed, 0x51ce);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);

  const std::string curve_path = cfg.out + "/accuracy_curve.tsv";
  std::ofstream curve(curve_path, std::ios::binary | std::ios::trunc);
  if (!curve) throw data_error("cannot write " + curve_path);
  curve << "size\taccuracy\n";
  double prev = -1.0;
  const double slack = 0.05;
  for (const int size : cfg.curve_sizes) {
    if (static_cast<std::size_t>(size) > records.size())
      throw config_error("classifier.sizes: " + std::to_string(size) +
                         " exceeds the " + std::to_string(records.size()) +
                         " harvested records");
    std::vector<AnnotationRecord> subset;
    subset.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i)
      subset.push_back(records[order[static_cast<std::size_t>(i)]]);
    const auto run = train_classifier(
        subset, classifier_train_config(cfg, splitmix64(cfg.seed ^ static_cast<std::uint64_t>(size))),
        arch);
    const double acc = classifier_accuracy(run.model, heldout);
    char buf[80];
    std::snprintf(buf, sizeof buf, "  size %4d held-out accuracy %.4f\n", size, acc);
    os << buf;
    curve << size << '\t' << fmt_double(acc) << '\n';
    if (prev >= 0.0 && acc < prev - slack)
      throw data_error("accuracy curve not monotone: size " + std::to_string(size) +
                       " dropped from " + fmt_double(prev) + " to " + fmt_double(acc));
    prev = acc;
  }
  if (!curve.flush()) throw data_error("write failed for " + curve_path);

  const auto final_run =
      train_classifier(records, classifier_train_config(cfg, cfg.seed), arch);
  const double final_acc = classifier_accuracy(final_run.model, heldout);
  save_classifier(cfg.out + "/classifier.bin", final_run.model);
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "train_classifier: held-out accuracy %.4f -> %s/classifier.bin\n",
                final_acc, cfg.out.c_str());
  os << buf;
  write_manifest(cfg, "train_classifier", {},
                 {"classifier.bin", "accuracy_curve.tsv", "annotations.tsv"});
}

void cmd_eval(const RunConfig& cfg, std::ostream& os) {
  std::filesystem::create_directories(cfg.out);
  const LoadedPolicy lp = load_policy(cfg);
  const ConfigMap map = make_config_map(cfg.preset);

  ClassifierModel clf;
  const bool use_clf = !cfg.classifier_file.empty();
  if (use_clf) clf = load_classifier(cfg.classifier_file);

  std::vector<EvalMode> modes;
  for (const auto& name : cfg.eval_modes) {
    if (name == "min") {
      modes.push_back({name, PolicyMode::fixed_config(map_config(DifficultyLabel::I, map))});
    } else if (name == "max") {
      modes.push_back({name, PolicyMode::fixed_config(map_config(DifficultyLabel::C, map))});
    } else {
      modes.push_back({name, use_clf ? PolicyMode::adaptive(&clf, map)
                                     : PolicyMode::adaptive_oracle(map)});
    }
  }
  os << "eval: " << to_string(cfg.task) << ", " << cfg.eval_episodes
     << " episodes per mode, preset " << to_string(cfg.preset)
     << (use_clf ? ", classifier labels" : ", rule-based labels") << "\n";
  const auto seeds = make_seeds(cfg.seed, cfg.eval_episodes);
  const auto reports = evaluate(cfg.task, lp.bundle, modes, seeds);
  write_report(reports, cfg.out, os);

  std::vector<std::string> inputs = {cfg.policy_file};
  if (use_clf) inputs.push_back(cfg.classifier_file);
  write_manifest(cfg, "eval", inputs, {"results.tsv"}, {"timing.tsv"});
}

void cmd_ablate(const RunConfig& cfg, std::ostream& os) {
  std::filesystem::create_directories(cfg.out);
  const LoadedPolicy lp = load_policy(cfg);
  const auto seeds = make_seeds(cfg.seed, cfg.ablate_episodes);

  const std::string path = cfg.out + "/ablation.tsv";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot write " + path);
  f << "steps\tsolver\tmode\tlast_step\tnfe_per_call\tepisodes\tsuccesses\t"
       "success_rate\tmean_nfe\tmean_cycles\n";
  os << "ablate: " << to_string(cfg.task) << ", " << cfg.ablate_episodes
     << " episodes per cell\n";
  for (const int steps : cfg.ablate_steps) {
    for (const auto& solver : cfg.ablate_solvers) {
      for (const auto& mode : cfg.ablate_modes) {
        for (const auto& last : cfg.ablate_last_steps) {
          InferenceConfig ic;
          ic.steps = steps;
          ic.solver = solver_from_string(solver);
          ic.mode = integration_mode_from_string(mode);
          ic.last_step = last_step_from_string(last);
          try {
            ic.validate();
          } catch (const config_error& e) {
            os << "  rejected: steps=" << steps << " " << solver << " " << mode
               << " " << last << " (" << e.what() << ")\n";
            continue;
          }
          int successes = 0;
          double nfe = 0.0;
          double cycles = 0.0;
          const auto pm = PolicyMode::fixed_config(ic);
          for (const auto seed : seeds) {
            const auto ep = run_episode(cfg.task, seed, lp.bundle, pm);
            successes += ep.success ? 1 : 0;
            nfe += static_cast<double>(ep.total_nfe);
            cycles += static_cast<double>(ep.cycles.size());
          }
          const double n = static_cast<double>(seeds.size());
          f << steps << '\t' << solver << '\t' << mode << '\t' << last << '\t'
            << predicted_nfe(ic) << '\t' << seeds.size() << '\t' << successes
            << '\t' << fmt_double(successes / n) << '\t' << fmt_double(nfe / n)
            << '\t' << fmt_double(cycles / n) << '\n';
          char buf[140];
          std::snprintf(buf, sizeof buf,
                        "  steps=%-3d %-5s %-3s %-10s success=%5.2f mean_nfe=%8.1f\n",
                        steps, solver.c_str(), mode.c_str(), last.c_str(),
                        successes / n, nfe / n);
          os << buf;
        }
      }
    }
  }
  if (!f.flush()) throw data_error("write failed for " + path);
  write_manifest(cfg, "ablate", {cfg.policy_file}, {"ablation.tsv"});
}

void run_command(const std::string& command, const RunConfig& cfg, std::ostream& os) {
  if (command == "gen_demos") return cmd_gen_demos(cfg, os);
  if (command == "train") return cmd_train(cfg, os);
  if (command == "train_classifier") return cmd_train_classifier(cfg, os);
  if (command == "eval") return cmd_eval(cfg, os);
  if (command == "ablate") return cmd_ablate(cfg, os);
  throw config_error("unknown command: " + command);
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const config_error&) {
    return kExitConfig;
  } catch (const data_error&) {
    return kExitData;
  } catch (const numeric_error&) {
    return kExitNumeric;
  } catch (...) {
    return kExitUsage;
  }
}

}  // namespace sip
