#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <mutex>

#include "qftir/error.hpp"

namespace qftir::detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

struct PlanDeleter {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

using PlanPtr = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

template <typename T>
std::unique_ptr<T[], FftwFree> alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (p == nullptr) throw Error(ErrorCode::InvalidArgument, "FFT buffer allocation failed");
  return std::unique_ptr<T[], FftwFree>(p);
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> in) {
  const std::size_t n = in.size();
  if (n == 0) return {};
  auto buf_in = alloc<double>(n);
  auto buf_out = alloc<fftw_complex>(n / 2 + 1);
  PlanPtr plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), buf_in.get(), buf_out.get(), FFTW_ESTIMATE));
  }
  std::memcpy(buf_in.get(), in.data(), n * sizeof(double));
  fftw_execute(plan.get());
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {buf_out[k][0], buf_out[k][1]};
  return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> in, std::size_t n) {
  if (n == 0) return {};
  if (in.size() != n / 2 + 1) throw Error(ErrorCode::InvalidArgument, "irfft: bin count does not match length");
  auto buf_in = alloc<fftw_complex>(n / 2 + 1);
  auto buf_out = alloc<double>(n);
  PlanPtr plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), buf_in.get(), buf_out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < in.size(); ++k) {
    buf_in[k][0] = in[k].real();
    buf_in[k][1] = in[k].imag();
  }
  fftw_execute(plan.get());
  return std::vector<double>(buf_out.get(), buf_out.get() + n);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace qftir::detail
