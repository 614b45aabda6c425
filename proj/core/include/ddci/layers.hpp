#pragma once

#include <variant>
#include <vector>

#include "ddci/tensor.hpp"

namespace ddci {

/// Hyperparameters of one I-Net/K-Net subnetwork: a lift convolution into
/// hidden_channels, `blocks` SE-residual blocks, and a projection back to
/// in_channels with a global residual connection.
struct SubnetConfig {
    std::size_t in_channels = 2;
    std::size_t hidden_channels = 32;
    std::size_t kernel = 3;
    std::size_t se_reduction = 8;
    std::size_t blocks = 2;
};

void validate(const SubnetConfig& cfg);

struct ConvParams {
    RealTensor w;  // (out, in, k, k)
    RealTensor b;  // (out)
};

struct FcParams {
    RealTensor w;  // (out, in)
    RealTensor b;  // (out)
};

struct SeParams {
    FcParams reduce;  // ch -> ch/r
    FcParams expand;  // ch/r -> ch
};

struct BlockParams {
    ConvParams conv1, conv2;
    SeParams se;
};

struct SubnetParams {
    ConvParams lift;
    std::vector<BlockParams> blocks;
    ConvParams project;
};

/// Reverse-mode tape. Forward ops push the values their backward needs;
/// backward ops pop in exact reverse order. A pop whose node kind does not
/// match the expected op throws.
struct ConvNode {
    RealTensor x, w;
};
struct ReluNode {
    RealTensor x;
};
struct SeNode {
    RealTensor x;           // (ch, H, W) input
    RealTensor s, u, a, g;  // pooled stats, pre-relu, post-relu, gate
    RealTensor w1, w2;      // reduce / expand weights
};

class Tape {
public:
    template <class Node>
    void push(Node node) {
        nodes_.emplace_back(std::move(node));
    }

    template <class Node>
    Node pop() {
        if (nodes_.empty()) throw Error("tape order violation: backward past the start of the tape");
        if (!std::holds_alternative<Node>(nodes_.back()))
            throw Error("tape order violation: node kind does not match the op being reversed");
        Node n = std::move(std::get<Node>(nodes_.back()));
        nodes_.pop_back();
        return n;
    }

    bool empty() const { return nodes_.empty(); }
    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<std::variant<ConvNode, ReluNode, SeNode>> nodes_;
};

/// Stride-1 cross-correlation with zero padding (k-1)/2; spatial dims are
/// preserved. Pass tape = nullptr for inference-only evaluation.
RealTensor conv2d_forward(const RealTensor& x, const ConvParams& p, Tape* tape);

struct ConvGrads {
    RealTensor x, w, b;
};
ConvGrads conv2d_backward(const RealTensor& grad_out, Tape& tape);

RealTensor relu_forward(const RealTensor& x, Tape* tape);
RealTensor relu_backward(const RealTensor& grad_out, Tape& tape);  // gradient at 0 is 0

/// (ch, H, W) -> (ch) channel means.
RealTensor global_avg_pool(const RealTensor& x);
RealTensor fc_forward(const RealTensor& x, const FcParams& p);  // (in) -> (out)
RealTensor sigmoid(const RealTensor& x);

/// Channel attention: x scaled per channel by
/// sigmoid(W2 relu(W1 GAP(x) + b1) + b2).
RealTensor se_block_forward(const RealTensor& x, const SeParams& p, Tape* tape);

struct SeGrads {
    RealTensor x;
    SeParams params;
};
SeGrads se_block_backward(const RealTensor& grad_out, Tape& tape);

/// One full subnetwork. With all-zero parameters this is the identity map
/// (everything rides the global residual).
RealTensor subnet_forward(const RealTensor& x, const SubnetParams& p, const SubnetConfig& cfg,
                          Tape* tape);

struct SubnetGrads {
    RealTensor x;
    SubnetParams params;
};
SubnetGrads subnet_backward(const RealTensor& grad_out, const SubnetConfig& cfg, Tape& tape);

/// He-uniform fan-in weights, zero biases; deterministic per rng seed.
SubnetParams init_subnet_params(const SubnetConfig& cfg, Rng& rng);
SubnetParams zero_subnet_params(const SubnetConfig& cfg);

}  // namespace ddci
