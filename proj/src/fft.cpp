#include "mswf/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "mswf/errors.hpp"

namespace mswf {
namespace {

// FFTW planning is not thread-safe; execution on new arrays is. Plans are
// created once per (shape, direction) under a lock and reused.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::span<const std::size_t> shape, int sign) {
    std::vector<int> dims(shape.begin(), shape.end());
    auto key = std::make_tuple(dims, sign);
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = 1;
    for (int d : dims) total *= static_cast<std::size_t>(d);
    fftw_complex* scratch = fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), scratch, scratch,
                                   sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    require(plan != nullptr, ErrorCode::Numeric, "FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::vector<int>, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void execute(const GridSpec& grid, std::span<cplx> data, int sign) {
  require(data.size() == grid.size(), ErrorCode::Input, "FFT buffer does not match grid");
  fftw_plan plan = cache().get(grid.shape(), sign);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

void fft_forward(const GridSpec& grid, std::span<cplx> data) {
  execute(grid, data, FFTW_FORWARD);
}

void fft_inverse(const GridSpec& grid, std::span<cplx> data) {
  execute(grid, data, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(grid.size());
  for (auto& v : data) v *= s;
}

void spectral_derivative(const GridSpec& grid, std::span<cplx> data, int axis) {
  apply_fourier_multiplier(grid, data, [axis](const Vec& k) { return cplx(0.0, k(axis)); });
}

}  // namespace mswf
