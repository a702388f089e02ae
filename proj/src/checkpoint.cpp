#include "sip/checkpoint.hpp"

#include <vector>

#include "sip/binio.hpp"

namespace sip {

namespace {

using namespace binio;

constexpr char kMagic[8] = {'S', 'I', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_tensors(std::string& out, const MlpField& model) {
  for (std::size_t l = 0; l < model.weights().size(); ++l) {
    const Mat& w = model.weights()[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        put_f32(out, static_cast<float>(w(r, c)));
    const Vec& b = model.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) put_f32(out, static_cast<float>(b[i]));
  }
}

void read_tensors(Reader& r, MlpField& model) {
  for (std::size_t l = 0; l < model.weights().size(); ++l) {
    Mat& w = model.weights()[l];
    for (Eigen::Index row = 0; row < w.rows(); ++row)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(row, c) = r.f32();
    Vec& b = model.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = r.f32();
  }
}

}  // namespace

void save_field_checkpoint(const std::string& path, const TrainResult& trained,
                           const InterpolantSchedule& sched, std::uint64_t seed) {
  const MlpSpec& spec = trained.model.spec();
  std::string out;
  put_bytes(out, kMagic, 8);
  put_u32(out, kVersion);
  put_u8(out, 0);  // field checkpoint
  put_u8(out, static_cast<std::uint8_t>(spec.target));
  put_u8(out, static_cast<std::uint8_t>(sched.kind));
  put_u8(out, static_cast<std::uint8_t>(spec.activation));
  put_u32(out, 0);  // class count, unused for fields
  put_u64(out, seed);
  put_u32(out, static_cast<std::uint32_t>(spec.time_embed_dim));
  put_u32(out, static_cast<std::uint32_t>(spec.action_dim));
  put_u32(out, static_cast<std::uint32_t>(spec.obs_dim));
  put_f64(out, sched.beta_min);
  put_f64(out, sched.beta_max);
  const auto dims = trained.model.layer_dims();
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (Eigen::Index d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_tensors(out, trained.raw);
  put_tensors(out, trained.model);
  write_file(path, out, "checkpoint");
}

FieldCheckpoint load_field_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path, "checkpoint");
  Reader r{bytes, "checkpoint"};
  r.need(8);
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw data_error("checkpoint: bad magic in " + path);
  r.pos = 8;
  if (r.u32() != kVersion) throw data_error("checkpoint: unsupported version in " + path);
  if (r.u8() != 0) throw data_error("checkpoint: not a field checkpoint: " + path);

  MlpSpec spec;
  spec.target = static_cast<PredictionTarget>(r.u8());
  InterpolantSchedule sched;
  sched.kind = static_cast<ScheduleKind>(r.u8());
  spec.schedule_kind = sched.kind;
  spec.activation = static_cast<Activation>(r.u8());
  r.u32();  // class count
  const std::uint64_t seed = r.u64();
  spec.time_embed_dim = r.u32();
  spec.action_dim = r.u32();
  spec.obs_dim = r.u32();
  sched.beta_min = r.f64();
  sched.beta_max = r.f64();
  const std::uint32_t ndims = r.u32();
  if (ndims < 2) throw data_error("checkpoint: bad layer count in " + path);
  std::vector<Eigen::Index> dims(ndims);
  for (auto& d : dims) d = r.u32();
  if (dims.front() != spec.action_dim + spec.time_embed_dim + spec.obs_dim ||
      dims.back() != spec.action_dim)
    throw data_error("checkpoint: inconsistent layer dims in " + path);
  spec.hidden.assign(dims.begin() + 1, dims.end() - 1);

  FieldCheckpoint ck;
  ck.schedule = sched;
  ck.seed = seed;
  ck.raw = MlpField(spec, seed);
  ck.model = MlpField(spec, seed);
  read_tensors(r, ck.raw);
  read_tensors(r, ck.model);
  if (r.pos != bytes.size()) throw data_error("checkpoint: trailing bytes in " + path);
  return ck;
}

}  // namespace sip
