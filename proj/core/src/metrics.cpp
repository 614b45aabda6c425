#include "ddci/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "ddci/fourier.hpp"
#include "ddci/phantom.hpp"

namespace ddci {

namespace {

constexpr std::size_t kWindow = 7;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

double nmse_from_norms(double err2, double ref2) {
    if (ref2 <= 0.0) throw MetricError("nmse: reference has zero norm");
    return 100.0 * err2 / ref2;
}

/// (H+1) x (W+1) summed-area table.
std::vector<double> integral_image(const RealTensor& x, const RealTensor& y, bool use_y,
                                   bool square, bool cross) {
    const std::size_t h = x.dim(0), w = x.dim(1);
    std::vector<double> s((h + 1) * (w + 1), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            const double a = use_y ? y[i * w + j] : x[i * w + j];
            double v = a;
            if (square) v = a * a;
            if (cross) v = x[i * w + j] * y[i * w + j];
            row += v;
            s[(i + 1) * (w + 1) + (j + 1)] = s[i * (w + 1) + (j + 1)] + row;
        }
    }
    return s;
}

double window_sum(const std::vector<double>& s, std::size_t stride, std::size_t i, std::size_t j,
                  std::size_t k) {
    return s[(i + k) * stride + (j + k)] - s[i * stride + (j + k)] - s[(i + k) * stride + j] +
           s[i * stride + j];
}

}  // namespace

double nmse_percent(const RealTensor& pred, const RealTensor& truth) {
    if (!pred.same_shape(truth)) throw ShapeError("nmse: shape mismatch");
    double err2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        err2 += d * d;
        ref2 += truth[i] * truth[i];
    }
    return nmse_from_norms(err2, ref2);
}

double nmse_percent(const ComplexImage& pred, const ComplexImage& truth) {
    if (!pred.same_shape(truth)) throw ShapeError("nmse: shape mismatch");
    double err2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        err2 += std::norm(pred[i] - truth[i]);
        ref2 += std::norm(truth[i]);
    }
    return nmse_from_norms(err2, ref2);
}

double ssim(const RealTensor& pred, const RealTensor& truth, std::optional<double> range) {
    if (pred.rank() != 2 || truth.rank() != 2) throw ShapeError("ssim expects 2D tensors");
    if (!pred.same_shape(truth)) throw ShapeError("ssim: shape mismatch");
    const std::size_t h = pred.dim(0), w = pred.dim(1);
    if (h < kWindow || w < kWindow) throw MetricError("ssim: image smaller than the 7x7 window");

    double dynamic_range;
    if (range) {
        dynamic_range = *range;
    } else {
        double lo = truth[0], hi = truth[0];
        for (std::size_t i = 0; i < truth.size(); ++i) {
            lo = std::min(lo, truth[i]);
            hi = std::max(hi, truth[i]);
        }
        dynamic_range = hi - lo;
    }
    if (dynamic_range <= 0.0) throw MetricError("ssim: dynamic range must be positive");
    const double c1 = (kK1 * dynamic_range) * (kK1 * dynamic_range);
    const double c2 = (kK2 * dynamic_range) * (kK2 * dynamic_range);

    const auto sx = integral_image(pred, truth, false, false, false);
    const auto sy = integral_image(pred, truth, true, false, false);
    const auto sxx = integral_image(pred, truth, false, true, false);
    const auto syy = integral_image(pred, truth, true, true, false);
    const auto sxy = integral_image(pred, truth, false, false, true);

    const std::size_t stride = w + 1;
    const double inv_n = 1.0 / static_cast<double>(kWindow * kWindow);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + kWindow <= h; ++i) {
        for (std::size_t j = 0; j + kWindow <= w; ++j) {
            const double mx = window_sum(sx, stride, i, j, kWindow) * inv_n;
            const double my = window_sum(sy, stride, i, j, kWindow) * inv_n;
            const double vx = window_sum(sxx, stride, i, j, kWindow) * inv_n - mx * mx;
            const double vy = window_sum(syy, stride, i, j, kWindow) * inv_n - my * my;
            const double cxy = window_sum(sxy, stride, i, j, kWindow) * inv_n - mx * my;
            const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw MetricError("incomplete beta continued fraction failed to converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ParamError("incomplete_beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("paired_t_test: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw MetricError("paired_t_test needs n >= 2");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (var <= 0.0) throw MetricError("paired_t_test: differences have zero variance");

    const double t = mean / std::sqrt(var / static_cast<double>(n));
    const double df = static_cast<double>(n - 1);
    const double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return TTestResult{t, p, n};
}

RealTensor stacked_magnitude(const ComplexImage& x) {
    RealTensor out({x.coils() * x.height(), x.width()});
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
    return out;
}

Aggregate aggregate(std::span<const double> values) {
    Aggregate agg;
    if (values.empty()) return agg;
    for (double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
        agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return agg;
}

MetricsReport evaluate(const std::vector<UndersampledSample>& dataset, const ModelParams& params,
                       const CascadeConfig& ccfg) {
    if (dataset.empty()) throw ParamError("evaluate: dataset is empty");
    MetricsReport report;
    std::vector<double> kn, ks, in, is;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const UndersampledSample& sample = dataset[i];
        if (!sample.k_full) throw ParamError("evaluate: case lacks ground truth");
        try {
            const ComplexImage k_pred = predict_kspace(sample, params, ccfg);
            const RealTensor ksp_pred = stacked_magnitude(k_pred);
            const RealTensor ksp_true = stacked_magnitude(*sample.k_full);
            const RealTensor img_pred = rss_combine(ifft2c(k_pred));
            const RealTensor img_true = rss_combine(ifft2c(*sample.k_full));
            CaseMetrics cm;
            cm.ksp_nmse = nmse_percent(ksp_pred, ksp_true);
            cm.ksp_ssim = ssim(ksp_pred, ksp_true);
            cm.img_nmse = nmse_percent(img_pred, img_true);
            cm.img_ssim = ssim(img_pred, img_true);
            report.cases.push_back(cm);
            kn.push_back(cm.ksp_nmse);
            ks.push_back(cm.ksp_ssim);
            in.push_back(cm.img_nmse);
            is.push_back(cm.img_ssim);
        } catch (const MetricError& e) {
            throw MetricError("case " + std::to_string(i) + ": " + e.what());
        }
    }
    report.ksp_nmse = aggregate(kn);
    report.ksp_ssim = aggregate(ks);
    report.img_nmse = aggregate(in);
    report.img_ssim = aggregate(is);
    return report;
}

std::string metrics_records(const MetricsReport& report, const std::string& model_tag) {
    const std::string tag = model_tag.empty() ? "" : "model=" + model_tag + " ";
    std::string out;
    char buf[192];
    for (std::size_t i = 0; i < report.cases.size(); ++i) {
        const CaseMetrics& c = report.cases[i];
        std::snprintf(buf, sizeof(buf), "case=%zu %sdomain=img nmse=%.10g ssim=%.10g\n", i,
                      tag.c_str(), c.img_nmse, c.img_ssim);
        out += buf;
        std::snprintf(buf, sizeof(buf), "case=%zu %sdomain=ksp nmse=%.10g ssim=%.10g\n", i,
                      tag.c_str(), c.ksp_nmse, c.ksp_ssim);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "aggregate %sdomain=img nmse_mean=%.10g nmse_std=%.10g ssim_mean=%.10g "
                  "ssim_std=%.10g\n",
                  tag.c_str(), report.img_nmse.mean, report.img_nmse.stddev, report.img_ssim.mean,
                  report.img_ssim.stddev);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "aggregate %sdomain=ksp nmse_mean=%.10g nmse_std=%.10g ssim_mean=%.10g "
                  "ssim_std=%.10g\n",
                  tag.c_str(), report.ksp_nmse.mean, report.ksp_nmse.stddev, report.ksp_ssim.mean,
                  report.ksp_ssim.stddev);
    out += buf;
    if (report.ttest) {
        std::snprintf(buf, sizeof(buf), "ttest n=%zu t=%.10g p=%.10g\n", report.ttest->n,
                      report.ttest->t, report.ttest->p);
        out += buf;
    }
    return out;
}

std::string metrics_table(const MetricsReport& report, const std::string& title) {
    std::string out = title + "\n";
    out += "  domain   NMSE% (mean +- sd)      SSIM (mean +- sd)\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  image    %8.4f +- %-8.4f   %8.4f +- %-8.4f\n",
                  report.img_nmse.mean, report.img_nmse.stddev, report.img_ssim.mean,
                  report.img_ssim.stddev);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  k-space  %8.4f +- %-8.4f   %8.4f +- %-8.4f\n",
                  report.ksp_nmse.mean, report.ksp_nmse.stddev, report.ksp_ssim.mean,
                  report.ksp_ssim.stddev);
    out += buf;
    if (report.ttest) {
        std::snprintf(buf, sizeof(buf), "  paired t-test on image NMSE: t=%.6g p=%.6g n=%zu\n",
                      report.ttest->t, report.ttest->p, report.ttest->n);
        out += buf;
    }
    return out;
}

}  // namespace ddci
