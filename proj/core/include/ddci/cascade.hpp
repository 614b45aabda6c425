#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ddci/layers.hpp"
#include "ddci/sampling.hpp"
#include "ddci/tensor.hpp"

namespace ddci {

/// Configuration of the full dual-domain cascade. cir_enabled toggles the
/// cross-iteration residual additions (the only structural difference; the
/// parameter count is identical in both modes).
struct CascadeConfig {
    std::size_t iterations = 2;
    bool cir_enabled = true;
    SubnetConfig subnet;       // in_channels must equal 2 * coils
    double lambda_image = 0.5;
    double lambda_kspace = 0.5;
};

void validate(const CascadeConfig& cfg);

/// All learnable weights: one image-domain and one k-space-domain subnet per
/// iteration, no weight sharing. Also reused as the gradient container.
struct ModelParams {
    std::vector<SubnetParams> inets;
    std::vector<SubnetParams> knets;
};

ModelParams init_model(const CascadeConfig& cfg, Rng& rng);
ModelParams zero_model(const CascadeConfig& cfg);

/// Forward record: per-iteration images and k-spaces plus the subnet tapes
/// consumed by the backward pass.
struct CascadeTrace {
    std::vector<ComplexImage> images;   // I_i
    std::vector<ComplexImage> kspaces;  // K_i
    std::vector<Tape> inet_tapes;
    std::vector<Tape> knet_tapes;
    RealTensor r_out;  // RSS magnitude of the final reconstruction
};

struct LossReport {
    std::vector<double> image_terms;   // l_I per iteration
    std::vector<double> kspace_terms;  // l_K per iteration
    std::vector<double> per_iteration; // lambda_I*l_I + lambda_K*l_K
    double total = 0.0;
};

/// Runs the cascade. Iteration 1: I_1 = H_I1(IFT(K_s)),
/// K_1 = D(H_K1(D(FT(I_1), K_s)), K_s). Iterations i >= 2 add the
/// cross-iteration residuals when enabled: I_i = H_Ii(IFT(K_{i-1}) + I_{i-1}),
/// K_i = D(H_Ki(D(FT(I_i) + K_{i-1}, K_s)), K_s).
CascadeTrace cascade_forward(const UndersampledSample& sample, const ModelParams& params,
                             const CascadeConfig& cfg);

/// Mean squared complex error of each I_i against IFT(k_full) and each K_i
/// against k_full, combined with the configured weights.
LossReport cascade_loss(const CascadeTrace& trace, const UndersampledSample& sample,
                        const CascadeConfig& cfg);

/// Exact gradient of the total loss for every parameter. Consumes the trace's
/// tapes; FT/IFT nodes backpropagate through the adjoint transform, DC nodes
/// zero the sampled columns, CIR additions fan the gradient into both
/// branches.
ModelParams cascade_backward(CascadeTrace& trace, const UndersampledSample& sample,
                             const CascadeConfig& cfg);

/// Inference-only forward (no tapes); returns the final predicted k-space.
ComplexImage predict_kspace(const UndersampledSample& sample, const ModelParams& params,
                            const CascadeConfig& cfg);

/// Inference-only forward; returns the RSS magnitude of IFT(K_N).
RealTensor reconstruct(const UndersampledSample& sample, const ModelParams& params,
                       const CascadeConfig& cfg);

/// Deterministic enumeration of every parameter tensor, used by the
/// optimizer and the checkpoint format. Visits inet0..N-1 then knet0..N-1,
/// each as lift, block<j>.{conv1,conv2,se.reduce,se.expand}, project, with
/// weight before bias.
void for_each_tensor(ModelParams& params,
                     const std::function<void(const std::string&, RealTensor&)>& fn);
void for_each_tensor(const ModelParams& params,
                     const std::function<void(const std::string&, const RealTensor&)>& fn);

std::size_t parameter_count(const ModelParams& params);

}  // namespace ddci
