#include "ddci/cascade.hpp"

#include <cmath>

#include "ddci/dc.hpp"
#include "ddci/fourier.hpp"
#include "ddci/phantom.hpp"

namespace ddci {

void validate(const CascadeConfig& cfg) {
    if (cfg.iterations == 0) throw ParamError("cascade needs at least one iteration");
    if (cfg.lambda_image < 0.0 || cfg.lambda_kspace < 0.0)
        throw ParamError("loss weights must be nonnegative");
    if (cfg.subnet.in_channels % 2 != 0)
        throw ParamError("subnet in_channels must be 2 * coils");
    validate(cfg.subnet);
}

ModelParams init_model(const CascadeConfig& cfg, Rng& rng) {
    validate(cfg);
    ModelParams p;
    for (std::size_t i = 0; i < cfg.iterations; ++i)
        p.inets.push_back(init_subnet_params(cfg.subnet, rng));
    for (std::size_t i = 0; i < cfg.iterations; ++i)
        p.knets.push_back(init_subnet_params(cfg.subnet, rng));
    return p;
}

ModelParams zero_model(const CascadeConfig& cfg) {
    validate(cfg);
    ModelParams p;
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        p.inets.push_back(zero_subnet_params(cfg.subnet));
        p.knets.push_back(zero_subnet_params(cfg.subnet));
    }
    return p;
}

namespace {

void check_model(const UndersampledSample& sample, const ModelParams& params,
                 const CascadeConfig& cfg) {
    validate(cfg);
    if (params.inets.size() != cfg.iterations || params.knets.size() != cfg.iterations)
        throw ShapeError("model params iteration count does not match config");
    if (2 * sample.k_sparse.coils() != cfg.subnet.in_channels)
        throw ShapeError("sample coil count does not match subnet in_channels");
    if (sample.k_sparse.width() != sample.mask.width)
        throw ShapeError("sample k-space width does not match its mask");
}

// Subnets consume complex data as 2C real channels and emit the same layout.
ComplexImage run_subnet(const ComplexImage& x, const SubnetParams& p, const SubnetConfig& cfg,
                        Tape* tape) {
    return channels_to_complex(subnet_forward(complex_to_channels(x), p, cfg, tape));
}

// Gradient of the mean squared complex error (1/M) sum |pred - gt|^2,
// represented as a complex image holding (d/dRe, d/dIm).
ComplexImage mse_grad(const ComplexImage& pred, const ComplexImage& gt, double weight) {
    ComplexImage g = pred;
    g -= gt;
    g *= cplx(2.0 * weight / static_cast<double>(pred.size()), 0.0);
    return g;
}

double mse(const ComplexImage& pred, const ComplexImage& gt) {
    if (!pred.same_shape(gt)) throw ShapeError("loss: prediction/target shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::norm(pred[i] - gt[i]);
    return s / static_cast<double>(pred.size());
}

}  // namespace

CascadeTrace cascade_forward(const UndersampledSample& sample, const ModelParams& params,
                             const CascadeConfig& cfg) {
    check_model(sample, params, cfg);
    const ComplexImage& ks = sample.k_sparse;
    const SamplingMask& mask = sample.mask;
    const std::size_t n = cfg.iterations;

    CascadeTrace trace;
    trace.images.reserve(n);
    trace.kspaces.reserve(n);
    trace.inet_tapes.resize(n);
    trace.knet_tapes.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        ComplexImage inet_in = i == 0 ? ifft2c(ks) : ifft2c(trace.kspaces[i - 1]);
        if (i > 0 && cfg.cir_enabled) inet_in += trace.images[i - 1];
        ComplexImage img = run_subnet(inet_in, params.inets[i], cfg.subnet, &trace.inet_tapes[i]);

        ComplexImage knet_in = fft2c(img);
        if (i > 0 && cfg.cir_enabled) knet_in += trace.kspaces[i - 1];
        knet_in = data_consistency(knet_in, ks, mask);
        ComplexImage kout = run_subnet(knet_in, params.knets[i], cfg.subnet, &trace.knet_tapes[i]);
        kout = data_consistency(kout, ks, mask);

        trace.images.push_back(std::move(img));
        trace.kspaces.push_back(std::move(kout));
    }
    trace.r_out = rss_combine(ifft2c(trace.kspaces.back()));
    return trace;
}

LossReport cascade_loss(const CascadeTrace& trace, const UndersampledSample& sample,
                        const CascadeConfig& cfg) {
    if (!sample.k_full) throw ParamError("loss requires ground-truth k-space");
    if (trace.images.size() != cfg.iterations)
        throw ParamError("trace length does not match config");
    const ComplexImage image_gt = ifft2c(*sample.k_full);

    LossReport report;
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        const double li = mse(trace.images[i], image_gt);
        const double lk = mse(trace.kspaces[i], *sample.k_full);
        report.image_terms.push_back(li);
        report.kspace_terms.push_back(lk);
        report.per_iteration.push_back(cfg.lambda_image * li + cfg.lambda_kspace * lk);
        report.total += report.per_iteration.back();
    }
    return report;
}

ModelParams cascade_backward(CascadeTrace& trace, const UndersampledSample& sample,
                             const CascadeConfig& cfg) {
    if (!sample.k_full) throw ParamError("backward requires ground-truth k-space");
    const std::size_t n = cfg.iterations;
    if (trace.images.size() != n || trace.inet_tapes.size() != n)
        throw ParamError("stale or incomplete trace");
    const SamplingMask& mask = sample.mask;
    const ComplexImage image_gt = ifft2c(*sample.k_full);

    ModelParams grads;
    grads.inets.resize(n);
    grads.knets.resize(n);

    // Accumulators for dL/dI_i and dL/dK_i, filled as the reverse sweep
    // reaches each iteration. Direct loss terms seed them.
    ComplexImage grad_k = mse_grad(trace.kspaces[n - 1], *sample.k_full, cfg.lambda_kspace);
    ComplexImage grad_i_next;  // dL/dI_{i+1} contribution flowing down, unused at i = n-1

    for (std::size_t i = n; i-- > 0;) {
        // K_i = D(H_Ki(D(P_i, K_s)), K_s) with P_i = FT(I_i) [+ K_{i-1}]
        ComplexImage g_y = data_consistency_backward(grad_k, mask);
        SubnetGrads knet =
            subnet_backward(complex_to_channels(g_y), cfg.subnet, trace.knet_tapes[i]);
        grads.knets[i] = std::move(knet.params);
        ComplexImage g_p = data_consistency_backward(channels_to_complex(knet.x), mask);

        // dL/dI_i: direct loss term + FT adjoint + next iteration's image path
        ComplexImage grad_i = mse_grad(trace.images[i], image_gt, cfg.lambda_image);
        grad_i += ifft2c(g_p);
        if (i + 1 < n) grad_i += grad_i_next;

        // I_i = H_Ii(X) with X = IFT(K_S or K_{i-1}) [+ I_{i-1}]
        SubnetGrads inet =
            subnet_backward(complex_to_channels(grad_i), cfg.subnet, trace.inet_tapes[i]);
        grads.inets[i] = std::move(inet.params);
        ComplexImage g_x = channels_to_complex(inet.x);

        if (i > 0) {
            // dL/dK_{i-1}: its own loss term + adjoint of X's IFT
            // [+ CIR branch into P_i]
            grad_k = mse_grad(trace.kspaces[i - 1], *sample.k_full, cfg.lambda_kspace);
            grad_k += fft2c(g_x);
            if (cfg.cir_enabled) grad_k += g_p;
            grad_i_next = cfg.cir_enabled ? std::move(g_x) : ComplexImage::zeros_like(g_x);
        }
        // at i == 0, X = IFT(K_S): nothing upstream carries parameters
    }
    return grads;
}

ComplexImage predict_kspace(const UndersampledSample& sample, const ModelParams& params,
                            const CascadeConfig& cfg) {
    check_model(sample, params, cfg);
    const ComplexImage& ks = sample.k_sparse;
    const SamplingMask& mask = sample.mask;

    ComplexImage prev_img, prev_k;
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        ComplexImage inet_in = i == 0 ? ifft2c(ks) : ifft2c(prev_k);
        if (i > 0 && cfg.cir_enabled) inet_in += prev_img;
        ComplexImage img = run_subnet(inet_in, params.inets[i], cfg.subnet, nullptr);

        ComplexImage knet_in = fft2c(img);
        if (i > 0 && cfg.cir_enabled) knet_in += prev_k;
        knet_in = data_consistency(knet_in, ks, mask);
        ComplexImage kout = run_subnet(knet_in, params.knets[i], cfg.subnet, nullptr);
        prev_k = data_consistency(kout, ks, mask);
        prev_img = std::move(img);
    }
    return prev_k;
}

RealTensor reconstruct(const UndersampledSample& sample, const ModelParams& params,
                       const CascadeConfig& cfg) {
    return rss_combine(ifft2c(predict_kspace(sample, params, cfg)));
}

namespace {

template <class Params, class Fn>
void visit_subnet(const std::string& prefix, Params& p, const Fn& fn) {
    fn(prefix + "/lift/w", p.lift.w);
    fn(prefix + "/lift/b", p.lift.b);
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        const std::string bp = prefix + "/block" + std::to_string(b);
        fn(bp + "/conv1/w", p.blocks[b].conv1.w);
        fn(bp + "/conv1/b", p.blocks[b].conv1.b);
        fn(bp + "/conv2/w", p.blocks[b].conv2.w);
        fn(bp + "/conv2/b", p.blocks[b].conv2.b);
        fn(bp + "/se/reduce/w", p.blocks[b].se.reduce.w);
        fn(bp + "/se/reduce/b", p.blocks[b].se.reduce.b);
        fn(bp + "/se/expand/w", p.blocks[b].se.expand.w);
        fn(bp + "/se/expand/b", p.blocks[b].se.expand.b);
    }
    fn(prefix + "/project/w", p.project.w);
    fn(prefix + "/project/b", p.project.b);
}

}  // namespace

void for_each_tensor(ModelParams& params,
                     const std::function<void(const std::string&, RealTensor&)>& fn) {
    for (std::size_t i = 0; i < params.inets.size(); ++i)
        visit_subnet("inet" + std::to_string(i), params.inets[i], fn);
    for (std::size_t i = 0; i < params.knets.size(); ++i)
        visit_subnet("knet" + std::to_string(i), params.knets[i], fn);
}

void for_each_tensor(const ModelParams& params,
                     const std::function<void(const std::string&, const RealTensor&)>& fn) {
    for (std::size_t i = 0; i < params.inets.size(); ++i)
        visit_subnet("inet" + std::to_string(i), params.inets[i], fn);
    for (std::size_t i = 0; i < params.knets.size(); ++i)
        visit_subnet("knet" + std::to_string(i), params.knets[i], fn);
}

std::size_t parameter_count(const ModelParams& params) {
    std::size_t n = 0;
    for_each_tensor(params,
                    [&n](const std::string&, const RealTensor& t) { n += t.size(); });
    return n;
}

}  // namespace ddci
