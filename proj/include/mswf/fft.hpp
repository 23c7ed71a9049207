#pragma once

#include <span>

#include "mswf/grid.hpp"

namespace mswf {

/// In-place n-dimensional DFT on the grid shape, unnormalized:
///   X[k] = sum_m x[m] e^{-2 pi i k m / M}.
void fft_forward(const GridSpec& grid, std::span<cplx> data);

/// In-place inverse DFT including the 1/M^n factor, so that
/// fft_inverse(fft_forward(x)) == x.
void fft_inverse(const GridSpec& grid, std::span<cplx> data);

/// Applies a diagonal Fourier multiplier m(k) to u: u <- F^{-1}[m F[u]].
template <class Multiplier>
void apply_fourier_multiplier(const GridSpec& grid, std::span<cplx> data, Multiplier&& m);

/// d/dx_axis applied spectrally (i k multiplier).
void spectral_derivative(const GridSpec& grid, std::span<cplx> data, int axis);

}  // namespace mswf

#include "mswf/fft_impl.hpp"
