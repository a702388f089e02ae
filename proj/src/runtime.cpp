#include "sip/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sip {

namespace {

constexpr std::uint64_t kPolicyStream = 0xac7e;
constexpr std::uint64_t kSeedListStream = 0xe415;

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::string cycle_context(TaskKind task, std::uint64_t seed, int cycle) {
  std::ostringstream os;
  os << to_string(task) << " episode seed=" << seed << " cycle=" << cycle << ": ";
  return os.str();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void PolicyBundle::validate() const {
  if (field == nullptr) throw config_error("PolicyBundle: field is null");
  if (chunk_len < 1) throw config_error("PolicyBundle: chunk_len must be >= 1");
  if (exec_len < 1 || exec_len > chunk_len)
    throw config_error("PolicyBundle: exec_len must be in [1, chunk_len]");
  if (field->target() != target)
    throw config_error("PolicyBundle: target disagrees with the field head");
}

PolicyMode PolicyMode::fixed_config(const InferenceConfig& cfg) {
  PolicyMode m;
  m.kind = PolicyModeKind::Fixed;
  m.fixed = cfg;
  return m;
}

PolicyMode PolicyMode::adaptive(const ClassifierModel* model, const ConfigMap& map) {
  PolicyMode m;
  m.kind = PolicyModeKind::Adaptive;
  m.classifier = model;
  m.config_map = map;
  return m;
}

PolicyMode PolicyMode::adaptive_oracle(const ConfigMap& map) { return adaptive(nullptr, map); }

std::vector<std::uint64_t> make_seeds(std::uint64_t base, int n) {
  if (n < 1) throw config_error("make_seeds: n must be >= 1");
  Rng rng = Rng::substream(base, kSeedListStream);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
  for (auto& s : seeds) s = rng.next_u64();
  return seeds;
}

EpisodeResult run_episode(TaskKind task, std::uint64_t seed, const PolicyBundle& bundle,
                          const PolicyMode& mode, const EnvParams& p) {
  bundle.validate();
  const int ad = action_dim(task);
  if (bundle.field->action_dim() !=
      static_cast<Eigen::Index>(bundle.chunk_len) * ad)
    throw config_error("run_episode: field emits " +
                       std::to_string(bundle.field->action_dim()) +
                       " dims, task chunks need " +
                       std::to_string(bundle.chunk_len * ad));
  const Eigen::Index od = bundle.field->obs_dim();
  if (od != 0 && od != kObsDim)
    throw config_error("run_episode: field obs dim must be 0 or " +
                       std::to_string(kObsDim));
  if (mode.kind == PolicyModeKind::Adaptive && mode.classifier != nullptr &&
      mode.classifier->feature_dim != kFeatureDim)
    throw config_error("run_episode: classifier feature dim mismatch");

  SimState s = reset(task, seed, p);
  Rng rng = Rng::substream(seed, kPolicyStream);

  EpisodeResult out;
  out.seed = seed;
  bool done = is_success(s, task, p);
  int cycle = 0;
  while (!done && s.step_count < p.horizon) {
    const Vec obs = observe(s, p);

    const auto t0 = Clock::now();
    DifficultyLabel label;
    if (mode.kind == PolicyModeKind::Adaptive && mode.classifier != nullptr) {
      label = classify(*mode.classifier, featurize(s, task, p)).label;
    } else {
      label = oracle_label(s, task, p);
    }
    const auto t1 = Clock::now();

    InferenceConfig cfg = mode.kind == PolicyModeKind::Adaptive
                              ? map_config(label, mode.config_map)
                              : mode.fixed;
    // one draw per cycle in every mode keeps paired runs aligned
    cfg.seed = rng.next_u64();

    SampleOut sample;
    const auto t2 = Clock::now();
    try {
      sample = sample_actions(*bundle.field, bundle.schedule, cfg,
                              od > 0 ? obs : Vec(), rng);
    } catch (const config_error& e) {
      throw config_error(cycle_context(task, seed, cycle) + e.what());
    } catch (const schedule_error& e) {
      throw schedule_error(cycle_context(task, seed, cycle) + e.what());
    } catch (const data_error& e) {
      throw data_error(cycle_context(task, seed, cycle) + e.what());
    } catch (const numeric_error& e) {
      throw numeric_error(cycle_context(task, seed, cycle) + e.what());
    }
    const auto t3 = Clock::now();

    for (int i = 0; i < bundle.exec_len && !done && s.step_count < p.horizon; ++i) {
      const Vec a = denormalize_action(
          sample.x.segment(static_cast<Eigen::Index>(i) * ad, ad), task, p);
      s = step(s, task, a, p);
      out.actions.push_back(a);
      done = is_success(s, task, p);
    }
    const auto t4 = Clock::now();

    ControlCycleLog log;
    log.cycle = cycle;
    log.label = label;
    log.config = cfg;
    log.nfe = sample.nfe;
    log.classifier_ms = ms_between(t0, t1);
    log.sampler_ms = ms_between(t2, t3);
    log.sim_ms = ms_between(t3, t4);
    out.total_nfe += sample.nfe;
    out.classifier_s += log.classifier_ms / 1e3;
    out.sampler_s += log.sampler_ms / 1e3;
    out.sim_s += log.sim_ms / 1e3;
    out.cycles.push_back(std::move(log));
    ++cycle;
  }
  out.success = done;
  out.steps = s.step_count;
  out.total_wall_s = out.classifier_s + out.sampler_s + out.sim_s;
  return out;
}

std::vector<RunReport> evaluate(TaskKind task, const PolicyBundle& bundle,
                                const std::vector<EvalMode>& modes,
                                const std::vector<std::uint64_t>& seeds,
                                const EnvParams& p) {
  if (modes.empty()) throw config_error("evaluate: mode list is empty");
  if (seeds.empty()) throw config_error("evaluate: seed list is empty");
  std::vector<RunReport> reports;
  reports.reserve(modes.size());
  for (const auto& m : modes) {
    RunReport r;
    r.task = task;
    r.mode_name = m.name;
    r.episodes.reserve(seeds.size());
    for (const auto seed : seeds)
      r.episodes.push_back(run_episode(task, seed, bundle, m.mode, p));
    const double n = static_cast<double>(r.episodes.size());
    for (const auto& ep : r.episodes) {
      r.success_rate += ep.success ? 1.0 : 0.0;
      r.mean_nfe += static_cast<double>(ep.total_nfe);
      r.mean_cycles += static_cast<double>(ep.cycles.size());
      r.mean_steps += static_cast<double>(ep.steps);
      r.mean_wall_s += ep.total_wall_s;
      r.mean_classifier_s += ep.classifier_s;
      r.mean_sampler_s += ep.sampler_s;
      r.mean_sim_s += ep.sim_s;
    }
    r.success_rate /= n;
    r.mean_nfe /= n;
    r.mean_cycles /= n;
    r.mean_steps /= n;
    r.mean_wall_s /= n;
    r.mean_classifier_s /= n;
    r.mean_sampler_s /= n;
    r.mean_sim_s /= n;
    reports.push_back(std::move(r));
  }
  double base = 0.0;
  for (const auto& r : reports) base = std::max(base, r.mean_nfe);
  for (auto& r : reports) r.reduction_vs_max = base / r.mean_nfe;
  return reports;
}

Dataset build_chunk_dataset(const std::vector<Demonstration>& demos, TaskKind task,
                            int chunk_len, const EnvParams& p) {
  if (chunk_len < 1) throw config_error("build_chunk_dataset: chunk_len must be >= 1");
  if (demos.empty()) throw data_error("build_chunk_dataset: no demonstrations");
  const int ad = action_dim(task);
  Eigen::Index total = 0;
  for (const auto& d : demos) {
    if (d.observations.size() != d.actions.size())
      throw data_error("build_chunk_dataset: observation/action length mismatch");
    if (d.actions.empty()) throw data_error("build_chunk_dataset: empty demonstration");
    total += static_cast<Eigen::Index>(d.actions.size());
  }
  Dataset out;
  out.x_star.resize(static_cast<Eigen::Index>(chunk_len) * ad, total);
  out.obs.resize(kObsDim, total);
  Eigen::Index col = 0;
  for (const auto& d : demos) {
    const auto len = static_cast<Eigen::Index>(d.actions.size());
    for (Eigen::Index start = 0; start < len; ++start) {
      if (d.observations[start].size() != kObsDim)
        throw data_error("build_chunk_dataset: bad observation dimension");
      out.obs.col(col) = d.observations[start];
      for (int j = 0; j < chunk_len; ++j) {
        const Eigen::Index src = start + j;
        Vec a = Vec::Zero(ad);
        if (src < len) {
          if (d.actions[src].size() != ad)
            throw data_error("build_chunk_dataset: bad action dimension");
          a = normalize_action(d.actions[src], task, p);
        }
        out.x_star.block(static_cast<Eigen::Index>(j) * ad, col, ad, 1) = a;
      }
      ++col;
    }
  }
  return out;
}

void write_report(const std::vector<RunReport>& reports, const std::string& out_dir,
                  std::ostream& os) {
  if (reports.empty()) throw data_error("write_report: empty report list");
  std::filesystem::create_directories(out_dir);

  const std::string results_path = out_dir + "/results.tsv";
  std::ofstream rf(results_path, std::ios::binary | std::ios::trunc);
  if (!rf) throw data_error("write_report: cannot open " + results_path);
  rf << "task\tmode\tepisodes\tsuccesses\tsuccess_rate\tmean_nfe\t"
        "reduction_vs_max\tmean_cycles\tmean_steps\n";
  for (const auto& r : reports) {
    int successes = 0;
    for (const auto& ep : r.episodes) successes += ep.success ? 1 : 0;
    rf << to_string(r.task) << '\t' << r.mode_name << '\t' << r.episodes.size()
       << '\t' << successes << '\t' << fmt_double(r.success_rate) << '\t'
       << fmt_double(r.mean_nfe) << '\t' << fmt_double(r.reduction_vs_max) << '\t'
       << fmt_double(r.mean_cycles) << '\t' << fmt_double(r.mean_steps) << '\n';
  }
  rf.flush();
  if (!rf) throw data_error("write_report: write failed for " + results_path);

  const std::string timing_path = out_dir + "/timing.tsv";
  std::ofstream tf(timing_path, std::ios::binary | std::ios::trunc);
  if (!tf) throw data_error("write_report: cannot open " + timing_path);
  tf << "task\tmode\tmean_wall_s\tmean_classifier_s\tmean_sampler_s\tmean_sim_s\n";
  for (const auto& r : reports) {
    tf << to_string(r.task) << '\t' << r.mode_name << '\t' << fmt_double(r.mean_wall_s)
       << '\t' << fmt_double(r.mean_classifier_s) << '\t'
       << fmt_double(r.mean_sampler_s) << '\t' << fmt_double(r.mean_sim_s) << '\n';
  }
  tf.flush();
  if (!tf) throw data_error("write_report: write failed for " + timing_path);

  print_summary(reports, os);
}

std::vector<ReportRow> read_report(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("read_report: cannot open " + path);
  std::string line;
  if (!std::getline(f, line))
    throw data_error("read_report: empty file " + path);
  const std::string expected =
      "task\tmode\tepisodes\tsuccesses\tsuccess_rate\tmean_nfe\t"
      "reduction_vs_max\tmean_cycles\tmean_steps";
  if (line != expected) throw data_error("read_report: unexpected header in " + path);
  std::vector<ReportRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 9)
      throw data_error("read_report: expected 9 columns, got " +
                       std::to_string(cols.size()));
    ReportRow row;
    row.task = cols[0];
    row.mode = cols[1];
    try {
      row.episodes = std::stoi(cols[2]);
      row.successes = std::stoi(cols[3]);
      row.success_rate = std::stod(cols[4]);
      row.mean_nfe = std::stod(cols[5]);
      row.reduction_vs_max = std::stod(cols[6]);
      row.mean_cycles = std::stod(cols[7]);
      row.mean_steps = std::stod(cols[8]);
    } catch (const std::exception&) {
      throw data_error("read_report: malformed numeric field in " + path);
    }
    if (!std::isfinite(row.success_rate) || !std::isfinite(row.mean_nfe) ||
        !std::isfinite(row.reduction_vs_max))
      throw data_error("read_report: non-finite value in " + path);
    rows.push_back(std::move(row));
  }
  return rows;
}

void print_summary(const std::vector<RunReport>& reports, std::ostream& os) {
  std::string current;
  char buf[160];
  for (const auto& r : reports) {
    const std::string task_name = to_string(r.task);
    if (task_name != current) {
      current = task_name;
      os << "\n== " << task_name << " (" << r.episodes.size() << " episodes) ==\n";
      std::snprintf(buf, sizeof buf, "%-10s %9s %10s %10s %12s\n", "mode",
                    "success", "mean NFE", "reduction", "wall ms/ep");
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%-10s %8.1f%% %10.1f %9.2fx %12.2f\n",
                  r.mode_name.c_str(), 100.0 * r.success_rate, r.mean_nfe,
                  r.reduction_vs_max, 1e3 * r.mean_wall_s);
    os << buf;
  }
}

}  // namespace sip
