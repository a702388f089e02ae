#pragma once

#include <string>

#include "sip/field.hpp"

namespace sip {

struct FieldCheckpoint {
  MlpField model;  // EMA weights
  MlpField raw;
  InterpolantSchedule schedule;
  std::uint64_t seed = 0;
};

// Versioned binary container: fixed header (format version, layer dims,
// target kind, schedule kind, seed) followed by raw and EMA parameter
// tensors as little-endian float32 in row-major order.
void save_field_checkpoint(const std::string& path, const TrainResult& trained,
                           const InterpolantSchedule& sched, std::uint64_t seed);

FieldCheckpoint load_field_checkpoint(const std::string& path);

}  // namespace sip
