#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddci/cascade.hpp"
#include "ddci/tensor.hpp"

namespace ddci {

/// 100 * ||pred - truth||^2 / ||truth||^2. Scale-invariant; rejects a
/// zero-norm truth.
double nmse_percent(const RealTensor& pred, const RealTensor& truth);
double nmse_percent(const ComplexImage& pred, const ComplexImage& truth);

/// Mean local SSIM over all 7x7 windows that fit entirely inside the image,
/// uniform weights, K1 = 0.01, K2 = 0.03. The dynamic range defaults to
/// max(truth) - min(truth) and must be positive; pass `range` to override.
double ssim(const RealTensor& pred, const RealTensor& truth,
            std::optional<double> range = std::nullopt);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t n = 0;
};

/// Paired two-tailed t-test on a - b; the p-value comes from the Student t
/// CDF evaluated through the continued-fraction incomplete beta.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), accurate to ~1e-12. Exposed for
/// the statistics tests.
double incomplete_beta(double a, double b, double x);

struct CaseMetrics {
    double ksp_nmse = 0.0, ksp_ssim = 0.0;
    double img_nmse = 0.0, img_ssim = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 when n < 2
};

struct MetricsReport {
    std::vector<CaseMetrics> cases;
    Aggregate ksp_nmse, ksp_ssim, img_nmse, img_ssim;
    std::optional<TTestResult> ttest;
};

Aggregate aggregate(std::span<const double> values);

/// Per-case reconstruction metrics: k-space NMSE%/SSIM on coil-stacked
/// magnitudes |K_N| vs |k_full|, image NMSE%/SSIM on RSS magnitudes.
MetricsReport evaluate(const std::vector<UndersampledSample>& dataset, const ModelParams& params,
                       const CascadeConfig& ccfg);

/// Coil magnitudes stacked along the height axis into a (C*H, W) tensor.
RealTensor stacked_magnitude(const ComplexImage& x);

/// Line-oriented key=value records: one `case=<i> domain=<img|ksp> ...` line
/// per case and domain, then aggregate and optional ttest lines.
std::string metrics_records(const MetricsReport& report, const std::string& model_tag = "");

/// Human-readable summary table.
std::string metrics_table(const MetricsReport& report, const std::string& title);

}  // namespace ddci
