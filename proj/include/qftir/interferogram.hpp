#pragma once

#include <variant>
#include <vector>

namespace qftir {

/// Raw detector trace sampled in time while the mirror moves at a nominal speed.
struct TimeSampledAxis {
  double sampling_rate = 0.0;  // Hz
  double scan_speed = 0.0;  // cm/s
  friend bool operator==(const TimeSampledAxis&, const TimeSampledAxis&) = default;
};

/// Trace resampled onto equally spaced optical path, x_m = m * step.
struct UniformPathAxis {
  double step = 0.0;  // cm
  friend bool operator==(const UniformPathAxis&, const UniformPathAxis&) = default;
};

using InterferogramAxis = std::variant<TimeSampledAxis, UniformPathAxis>;

/// Detector samples versus optical path. Kept as plain data because acquired
/// scans can be corrupt; every consumer calls validate() first.
struct Interferogram {
  std::vector<double> samples;
  InterferogramAxis axis;
  double scan_length = 0.0;  // cm

  bool time_sampled() const noexcept { return std::holds_alternative<TimeSampledAxis>(axis); }
  bool uniform_path() const noexcept { return std::holds_alternative<UniformPathAxis>(axis); }

  friend bool operator==(const Interferogram&, const Interferogram&) = default;
};

/// Throws InvalidInterferogram on empty or non-finite samples, a non-positive
/// scan length or axis parameter, or a uniform grid longer than the scan.
void validate(const Interferogram& ig);

}  // namespace qftir
