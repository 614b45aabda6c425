#include "ddci/dc.hpp"

namespace ddci {

ComplexImage data_consistency(const ComplexImage& k_pred, const ComplexImage& k_s,
                              const SamplingMask& mask) {
    if (!k_pred.same_shape(k_s)) throw ShapeError("data_consistency: k_pred/k_s shape mismatch");
    if (k_pred.width() != mask.width)
        throw ShapeError("data_consistency: k-space width does not match mask");
    ComplexImage out = k_pred;
    for (std::size_t c = 0; c < out.coils(); ++c)
        for (std::size_t i = 0; i < out.height(); ++i)
            for (std::size_t j = 0; j < out.width(); ++j)
                if (mask.sampled[j]) out.at(c, i, j) = k_s.at(c, i, j);
    return out;
}

ComplexImage data_consistency_backward(const ComplexImage& grad_out, const SamplingMask& mask) {
    if (grad_out.width() != mask.width)
        throw ShapeError("data_consistency_backward: gradient width does not match mask");
    ComplexImage g = grad_out;
    for (std::size_t c = 0; c < g.coils(); ++c)
        for (std::size_t i = 0; i < g.height(); ++i)
            for (std::size_t j = 0; j < g.width(); ++j)
                if (mask.sampled[j]) g.at(c, i, j) = cplx(0.0, 0.0);
    return g;
}

}  // namespace ddci
