// ddci: dataset synthesis, training, reconstruction, and evaluation for the
// dual-domain cross-iteration SE cascade.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "ddci/cascade.hpp"
#include "ddci/fourier.hpp"
#include "ddci/metrics.hpp"
#include "ddci/phantom.hpp"
#include "ddci/sampling.hpp"
#include "ddci/storage.hpp"
#include "ddci/training.hpp"

namespace {

using namespace ddci;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Union of subcommand parameters with an order-stable canonical text form
/// (sorted key=value lines). Feeds manifests and checkpoint digests.
class RunConfig {
public:
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set(const std::string& key, std::size_t v) { kv_[key] = std::to_string(v); }
    void set(const std::string& key, double v) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        kv_[key] = buf;
    }

    std::vector<std::pair<std::string, std::string>> lines() const {
        return {kv_.begin(), kv_.end()};
    }

    std::string canonical_text() const {
        std::string out;
        for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
        return out;
    }

private:
    std::map<std::string, std::string> kv_;
};

struct PhantomArgs {
    std::string out;
    std::size_t n = 4;
    std::size_t size = 64;
    std::size_t coils = 4;
    double jitter = 0.15;
    std::uint64_t seed = 0;
};

int cmd_phantom(const PhantomArgs& a) {
    if (a.n == 0) throw UsageError("--n must be >= 1");
    if (a.size == 0 || a.size % 2 != 0) throw UsageError("--size must be positive and even");
    if (a.coils == 0) throw UsageError("--coils must be >= 1");
    if (a.jitter < 0.0) throw UsageError("--jitter must be nonnegative");

    auto cases = generate_dataset(a.n, a.size, a.size, a.coils, a.jitter, Rng(a.seed));
    RunConfig rc;
    rc.set("coils", a.coils);
    rc.set("height", a.size);
    rc.set("jitter", a.jitter);
    rc.set("n", a.n);
    rc.set("seed", static_cast<std::size_t>(a.seed));
    rc.set("width", a.size);
    save_dataset(a.out, cases, rc.lines());
    std::printf("wrote=%zu dir=%s\n", cases.size(), a.out.c_str());
    return 0;
}

struct MaskedDataset {
    std::vector<UndersampledSample> samples;
    std::size_t coils = 0;
};

// Masks are generated from (seed, case index) at train/eval time rather than
// stored with the dataset, so one dataset serves any acceleration.
MaskedDataset masked_dataset(const std::string& dir, double accel, double center_frac,
                             std::uint64_t seed) {
    StoredDataset ds = load_dataset(dir);
    if (ds.cases.empty()) throw Error("dataset is empty: " + dir);
    MaskedDataset out;
    out.coils = ds.cases[0].k_full.coils();
    for (std::size_t i = 0; i < ds.cases.size(); ++i) {
        SamplingMask mask = make_mask(ds.cases[i].k_full.width(), accel, center_frac,
                                      MaskPattern::random_lines,
                                      Rng(derive_seed(seed, stream_tag::mask, i)));
        UndersampledSample s = apply_mask(ds.cases[i].k_full, mask);
        s.image_full = ds.cases[i].image_full;
        out.samples.push_back(std::move(s));
    }
    return out;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::size_t iters = 2;
    bool cir = true;
    double accel = 4.0;
    double center_frac = 0.08;
    std::size_t epochs = 10;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::size_t max_steps = 0;
    std::string val_data;
    std::size_t val_cadence = 0;
};

int cmd_train(const TrainArgs& a) {
    if (a.epochs == 0) throw UsageError("--epochs must be >= 1");
    if (a.iters == 0) throw UsageError("--iters must be >= 1");
    if (a.lr <= 0.0) throw UsageError("--lr must be positive");

    MaskedDataset data = masked_dataset(a.data, a.accel, a.center_frac, a.seed);
    MaskedDataset val;
    if (!a.val_data.empty()) val = masked_dataset(a.val_data, a.accel, a.center_frac, a.seed);

    CascadeConfig ccfg;
    ccfg.iterations = a.iters;
    ccfg.cir_enabled = a.cir;
    ccfg.subnet.in_channels = 2 * data.coils;

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.seed = a.seed;
    tc.adam.lr = a.lr;
    tc.checkpoint_path = a.out;
    tc.max_steps = a.max_steps;
    tc.val_cadence = a.val_cadence;

    TrainResult res = train(data.samples, a.val_data.empty() ? nullptr : &val.samples, tc, ccfg,
                            &std::cout);
    std::printf("steps=%llu final_loss=%.10g\n",
                static_cast<unsigned long long>(res.steps_done),
                res.loss_history.empty() ? 0.0 : res.loss_history.back());
    return 0;
}

struct ReconstructArgs {
    std::string ckpt;
    std::string kspace;
    std::string mask;
    std::string out_img;
    std::string out_k;
};

int cmd_reconstruct(const ReconstructArgs& a) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    const CascadeConfig ccfg = cascade_config_from_text(ck.config_text);
    ComplexImage ks = read_complex_image(a.kspace);
    SamplingMask mask = mask_from_tensor(read_real_tensor(a.mask));

    if (2 * ks.coils() != ccfg.subnet.in_channels)
        throw Error("config mismatch: checkpoint expects " +
                    std::to_string(ccfg.subnet.in_channels / 2) + " coils, input has " +
                    std::to_string(ks.coils()));
    if (ks.width() != mask.width)
        throw Error("config mismatch: mask width does not match k-space width");

    UndersampledSample s = apply_mask(ks, mask);
    ComplexImage k_out = predict_kspace(s, ck.params, ccfg);
    RealTensor img = rss_combine(ifft2c(k_out));
    export_pgm(img, a.out_img);
    write_tensor(a.out_k, k_out);
    std::printf("out_img=%s out_k=%s\n", a.out_img.c_str(), a.out_k.c_str());
    return 0;
}

struct EvaluateArgs {
    std::string ckpt_a;
    std::string ckpt_b;
    std::string data;
    double accel = 4.0;
    double center_frac = 0.08;
    std::uint64_t seed = 0;
    std::string report;
};

MetricsReport evaluate_checkpoint(const std::string& path, const MaskedDataset& data) {
    Checkpoint ck = load_checkpoint(path);
    const CascadeConfig ccfg = cascade_config_from_text(ck.config_text);
    if (2 * data.coils != ccfg.subnet.in_channels)
        throw Error("config mismatch: checkpoint " + path + " expects " +
                    std::to_string(ccfg.subnet.in_channels / 2) + " coils");
    return evaluate(data.samples, ck.params, ccfg);
}

int cmd_evaluate(const EvaluateArgs& a) {
    MaskedDataset data = masked_dataset(a.data, a.accel, a.center_frac, a.seed);

    MetricsReport report_a = evaluate_checkpoint(a.ckpt_a, data);
    std::string records;
    std::string table;
    if (a.ckpt_b.empty()) {
        records = metrics_records(report_a);
        table = metrics_table(report_a, "checkpoint: " + a.ckpt_a);
    } else {
        if (data.samples.size() < 2)
            throw Error("degenerate test: paired comparison needs at least 2 cases");
        MetricsReport report_b = evaluate_checkpoint(a.ckpt_b, data);
        std::vector<double> nmse_a, nmse_b;
        for (const CaseMetrics& c : report_a.cases) nmse_a.push_back(c.img_nmse);
        for (const CaseMetrics& c : report_b.cases) nmse_b.push_back(c.img_nmse);
        report_b.ttest = paired_t_test(nmse_a, nmse_b);
        records = metrics_records(report_a, "A") + metrics_records(report_b, "B");
        table = metrics_table(report_a, "checkpoint A: " + a.ckpt_a) +
                metrics_table(report_b, "checkpoint B: " + a.ckpt_b);
    }
    std::cout << table;
    std::cout << records;
    if (!a.report.empty()) atomic_write_text(a.report, records);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-domain cross-iteration SE cascade for undersampled MRI"};
    app.require_subcommand(1);

    PhantomArgs pa;
    CLI::App* phantom = app.add_subcommand("phantom", "generate a synthetic dataset");
    phantom->add_option("--out", pa.out, "output directory")->required();
    phantom->add_option("--n", pa.n, "number of cases");
    phantom->add_option("--size", pa.size, "image height and width");
    phantom->add_option("--coils", pa.coils, "coil count");
    phantom->add_option("--jitter", pa.jitter, "relative perturbation of the ellipse table");
    phantom->add_option("--seed", pa.seed, "dataset seed");

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "train a cascade on a dataset");
    train_cmd->add_option("--data", ta.data, "dataset directory")->required();
    train_cmd->add_option("--out", ta.out, "checkpoint output path")->required();
    train_cmd->add_option("--iters", ta.iters, "cascade iterations");
    train_cmd->add_option("--cir", ta.cir, "enable cross-iteration residuals");
    train_cmd->add_option("--accel", ta.accel, "acceleration factor R");
    train_cmd->add_option("--center-frac", ta.center_frac, "fully sampled center fraction");
    train_cmd->add_option("--epochs", ta.epochs, "training epochs");
    train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
    train_cmd->add_option("--seed", ta.seed, "training seed");
    train_cmd->add_option("--max-steps", ta.max_steps, "cap on optimizer steps (0 = no cap)");
    train_cmd->add_option("--val-data", ta.val_data, "validation dataset directory");
    train_cmd->add_option("--val-cadence", ta.val_cadence, "steps between validation passes");

    ReconstructArgs ra;
    CLI::App* rec = app.add_subcommand("reconstruct", "reconstruct one acquisition");
    rec->add_option("--ckpt", ra.ckpt, "checkpoint path")->required();
    rec->add_option("--kspace", ra.kspace, "sparse k-space tensor file")->required();
    rec->add_option("--mask", ra.mask, "mask tensor file (1x1xW)")->required();
    rec->add_option("--out-img", ra.out_img, "output PGM image")->required();
    rec->add_option("--out-k", ra.out_k, "output predicted k-space tensor")->required();

    EvaluateArgs ea;
    CLI::App* ev = app.add_subcommand("evaluate", "evaluate checkpoints on a dataset");
    ev->add_option("--ckpt", ea.ckpt_a, "checkpoint A")->required();
    ev->add_option("--ckpt-b", ea.ckpt_b, "checkpoint B for a paired comparison");
    ev->add_option("--data", ea.data, "dataset directory")->required();
    ev->add_option("--accel", ea.accel, "acceleration factor R");
    ev->add_option("--center-frac", ea.center_frac, "fully sampled center fraction");
    ev->add_option("--seed", ea.seed, "mask seed");
    ev->add_option("--report", ea.report, "write key=value records to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (phantom->parsed()) return cmd_phantom(pa);
        if (train_cmd->parsed()) return cmd_train(ta);
        if (rec->parsed()) return cmd_reconstruct(ra);
        if (ev->parsed()) return cmd_evaluate(ea);
        std::fprintf(stderr, "no subcommand given\n");
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        std::fprintf(stderr, "%s\n", app.help().c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
