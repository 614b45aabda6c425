#pragma once

#include "ddci/tensor.hpp"

namespace ddci {

/// Centered orthonormal 2D DFT per coil: ifftshift -> DFT -> fftshift,
/// scaled by 1/sqrt(H*W). DC lands at (H/2, W/2). Unitary, so the adjoint
/// equals the inverse and backprop through this node is ifft2c.
ComplexImage fft2c(const ComplexImage& x);

/// Exact inverse (unitary adjoint) of fft2c.
ComplexImage ifft2c(const ComplexImage& k);

}  // namespace ddci
