#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ddci/tensor.hpp"

namespace ddci {

enum class MaskPattern { random_lines, equispaced };

/// Cartesian per-column (readout line) undersampling mask. The same mask is
/// applied to every coil. A centered block of floor(W * center_fraction)
/// columns is always fully sampled; the rest of the round(W/R) budget is
/// spread over the remaining columns.
struct SamplingMask {
    std::size_t width = 0;
    std::vector<std::uint8_t> sampled;  // one flag per column
    double acceleration = 1.0;
    double center_fraction = 0.0;
    std::uint64_t seed = 0;
    MaskPattern pattern = MaskPattern::random_lines;

    std::size_t sampled_count() const;

    /// Rebuild a mask from a raw 0/1 column vector (e.g. after
    /// deserialization); provenance fields are derived or defaulted.
    static SamplingMask from_columns(std::vector<std::uint8_t> columns);
};

SamplingMask make_mask(std::size_t width, double acceleration, double center_fraction,
                       MaskPattern pattern, Rng rng);

/// One undersampled acquisition: the retained sparse k-space plus optional
/// ground truth for training and evaluation.
struct UndersampledSample {
    ComplexImage k_sparse;
    SamplingMask mask;
    std::optional<ComplexImage> k_full;
    std::optional<ComplexImage> image_full;
};

UndersampledSample apply_mask(const ComplexImage& k_full, const SamplingMask& mask);

/// Baseline reconstruction: inverse transform of the zero-padded sparse
/// k-space, per coil.
ComplexImage zero_fill_recon(const UndersampledSample& s);

/// Mask serialization shape per the tensor file convention: 0/1 values,
/// shape (1, 1, W).
RealTensor mask_to_tensor(const SamplingMask& mask);
SamplingMask mask_from_tensor(const RealTensor& t);

}  // namespace ddci
