#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ddci/cascade.hpp"

namespace ddci {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-tensor first/second moment accumulators in for_each_tensor order,
/// plus the shared step counter.
struct OptimState {
    std::vector<RealTensor> m;
    std::vector<RealTensor> v;
    std::uint64_t step = 0;
    AdamConfig hyper;
};

OptimState init_optim(const ModelParams& params, AdamConfig hyper);

/// Standard bias-corrected Adam update; increments the step counter by
/// exactly one.
void adam_step(ModelParams& params, const ModelParams& grads, OptimState& state);

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    std::size_t val_cadence = 0;        // steps between validation passes; 0 = never
    std::string checkpoint_path;        // empty = do not write
    std::size_t checkpoint_cadence = 0; // steps between checkpoints; 0 = final only
    std::size_t max_steps = 0;          // hard cap on optimizer steps; 0 = epochs decide
    AdamConfig adam;
};

struct TrainResult {
    ModelParams params;
    OptimState optim;
    std::vector<double> loss_history;  // total loss per optimizer step
    std::vector<double> val_history;   // mean validation loss per validation pass
    std::uint64_t steps_done = 0;
    std::uint64_t epochs_done = 0;
};

/// Snapshot of a training run; storage round-trips this bit-exactly.
struct Checkpoint {
    std::uint32_t version = 1;
    std::string config_text;  // canonical model config, key=value lines
    std::uint64_t steps_done = 0;
    std::uint64_t epochs_done = 0;
    ModelParams params;
    OptimState optim;
};

/// Epoch loop at batch size 1: shuffled case order per epoch (seeded), one
/// forward/loss/backward/adam_step per case. Aborts on non-finite loss.
/// Fully deterministic for a fixed (seed, config, dataset).
TrainResult train(const std::vector<UndersampledSample>& train_set,
                  const std::vector<UndersampledSample>* val_set, const TrainConfig& cfg,
                  const CascadeConfig& ccfg, std::ostream* log = nullptr,
                  const Checkpoint* resume = nullptr);

/// Canonical key=value serialization of the model configuration; its FNV-1a
/// digest is the checkpoint compatibility check.
std::string canonical_config_text(const CascadeConfig& cfg);
CascadeConfig cascade_config_from_text(const std::string& text);

}  // namespace ddci
