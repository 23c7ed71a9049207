#pragma once

#include <vector>

namespace mswf {

template <class Multiplier>
void apply_fourier_multiplier(const GridSpec& grid, std::span<cplx> data, Multiplier&& m) {
  fft_forward(grid, data);
  const int n = grid.dimension();
  std::vector<std::size_t> idx(n);
  Vec k(n);
  for (std::size_t i = 0; i < data.size(); ++i) {
    grid.unflatten(i, idx);
    for (int d = 0; d < n; ++d) k(d) = grid.frequency(d, idx[d]);
    data[i] *= m(k);
  }
  fft_inverse(grid, data);
}

}  // namespace mswf
