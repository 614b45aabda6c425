#pragma once

#include "ddci/sampling.hpp"
#include "ddci/tensor.hpp"

namespace ddci {

/// Hard data consistency: at every sampled column the measured value k_s
/// replaces the prediction, other columns pass through. Idempotent, and the
/// output restricted to sampled columns equals k_s bit-exactly.
ComplexImage data_consistency(const ComplexImage& k_pred, const ComplexImage& k_s,
                              const SamplingMask& mask);

/// Gradient w.r.t. k_pred: upstream gradient with sampled columns zeroed
/// (the measured branch carries no gradient).
ComplexImage data_consistency_backward(const ComplexImage& grad_out, const SamplingMask& mask);

}  // namespace ddci
