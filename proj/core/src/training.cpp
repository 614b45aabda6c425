#include "ddci/training.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "ddci/storage.hpp"

namespace ddci {

OptimState init_optim(const ModelParams& params, AdamConfig hyper) {
    OptimState st;
    st.hyper = hyper;
    for_each_tensor(params, [&st](const std::string&, const RealTensor& t) {
        st.m.push_back(RealTensor(t.shape()));
        st.v.push_back(RealTensor(t.shape()));
    });
    return st;
}

void adam_step(ModelParams& params, const ModelParams& grads, OptimState& state) {
    std::vector<RealTensor*> ps;
    std::vector<const RealTensor*> gs;
    for_each_tensor(params, [&ps](const std::string&, RealTensor& t) { ps.push_back(&t); });
    for_each_tensor(grads,
                    [&gs](const std::string&, const RealTensor& t) { gs.push_back(&t); });
    if (ps.size() != gs.size() || ps.size() != state.m.size())
        throw ShapeError("adam_step: params/grads/state tensor counts disagree");

    state.step += 1;
    const AdamConfig& h = state.hyper;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < ps.size(); ++t) {
        RealTensor& p = *ps[t];
        const RealTensor& g = *gs[t];
        RealTensor& m = state.m[t];
        RealTensor& v = state.v[t];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw ShapeError("adam_step: tensor shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
        }
    }
}

namespace {

double validation_loss(const std::vector<UndersampledSample>& val_set, const ModelParams& params,
                       const CascadeConfig& ccfg) {
    double total = 0.0;
    for (const UndersampledSample& s : val_set) {
        CascadeTrace trace = cascade_forward(s, params, ccfg);
        total += cascade_loss(trace, s, ccfg).total;
    }
    return total / static_cast<double>(val_set.size());
}

}  // namespace

TrainResult train(const std::vector<UndersampledSample>& train_set,
                  const std::vector<UndersampledSample>* val_set, const TrainConfig& cfg,
                  const CascadeConfig& ccfg, std::ostream* log, const Checkpoint* resume) {
    if (cfg.epochs == 0) throw ParamError("train: epochs must be >= 1");
    if (cfg.batch_size != 1) throw ParamError("train: only batch size 1 is supported");
    if (train_set.empty()) throw ParamError("train: dataset is empty");
    for (const UndersampledSample& s : train_set)
        if (!s.k_full) throw ParamError("train: every case needs ground truth");
    validate(ccfg);

    TrainResult res;
    if (resume) {
        if (resume->config_text != canonical_config_text(ccfg))
            throw FormatError("config mismatch: checkpoint was trained with a different model config");
        res.params = resume->params;
        res.optim = resume->optim;
        res.steps_done = resume->steps_done;
        res.epochs_done = resume->epochs_done;
    } else {
        Rng init_rng(derive_seed(cfg.seed, 0x696E6974ULL /* "init" */, 0));
        res.params = init_model(ccfg, init_rng);
        res.optim = init_optim(res.params, cfg.adam);
    }

    const std::size_t n_cases = train_set.size();
    std::vector<std::size_t> order(n_cases);

    for (std::size_t epoch = res.epochs_done; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(cfg.seed, stream_tag::epoch_shuffle, epoch));
        for (std::size_t i = n_cases; i-- > 1;) {
            const std::size_t j = shuffle_rng.below(i + 1);
            std::swap(order[i], order[j]);
        }

        for (std::size_t idx : order) {
            if (cfg.max_steps != 0 && res.steps_done >= cfg.max_steps) break;
            const UndersampledSample& sample = train_set[idx];
            CascadeTrace trace = cascade_forward(sample, res.params, ccfg);
            const LossReport loss = cascade_loss(trace, sample, ccfg);
            if (!std::isfinite(loss.total)) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "non-finite training loss at step %llu",
                              static_cast<unsigned long long>(res.steps_done + 1));
                throw Error(buf);
            }
            ModelParams grads = cascade_backward(trace, sample, ccfg);
            adam_step(res.params, grads, res.optim);
            res.steps_done += 1;
            res.loss_history.push_back(loss.total);
            if (log) {
                char buf[96];
                std::snprintf(buf, sizeof(buf), "step=%llu loss=%.10g\n",
                              static_cast<unsigned long long>(res.steps_done), loss.total);
                (*log) << buf;
            }
            if (val_set && cfg.val_cadence != 0 && res.steps_done % cfg.val_cadence == 0) {
                const double vl = validation_loss(*val_set, res.params, ccfg);
                res.val_history.push_back(vl);
                if (log) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf), "step=%llu val_loss=%.10g\n",
                                  static_cast<unsigned long long>(res.steps_done), vl);
                    (*log) << buf;
                }
            }
            if (!cfg.checkpoint_path.empty() && cfg.checkpoint_cadence != 0 &&
                res.steps_done % cfg.checkpoint_cadence == 0) {
                Checkpoint ck{1, canonical_config_text(ccfg), res.steps_done, res.epochs_done,
                              res.params, res.optim};
                save_checkpoint(cfg.checkpoint_path, ck);
            }
        }
        res.epochs_done = epoch + 1;
        if (cfg.max_steps != 0 && res.steps_done >= cfg.max_steps) break;
    }

    if (!cfg.checkpoint_path.empty()) {
        Checkpoint ck{1, canonical_config_text(ccfg), res.steps_done, res.epochs_done, res.params,
                      res.optim};
        save_checkpoint(cfg.checkpoint_path, ck);
    }
    return res;
}

std::string canonical_config_text(const CascadeConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["blocks"] = std::to_string(cfg.subnet.blocks);
    kv["cir"] = cfg.cir_enabled ? "true" : "false";
    kv["hidden"] = std::to_string(cfg.subnet.hidden_channels);
    kv["in_channels"] = std::to_string(cfg.subnet.in_channels);
    kv["iters"] = std::to_string(cfg.iterations);
    kv["kernel"] = std::to_string(cfg.subnet.kernel);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.lambda_image);
    kv["lambda_i"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.lambda_kspace);
    kv["lambda_k"] = buf;
    kv["reduction"] = std::to_string(cfg.subnet.se_reduction);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

CascadeConfig cascade_config_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("malformed config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const auto need = [&kv](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(std::string("config missing key: ") + key);
        return it->second;
    };
    CascadeConfig cfg;
    try {
        cfg.subnet.blocks = std::stoul(need("blocks"));
        cfg.cir_enabled = need("cir") == "true";
        cfg.subnet.hidden_channels = std::stoul(need("hidden"));
        cfg.subnet.in_channels = std::stoul(need("in_channels"));
        cfg.iterations = std::stoul(need("iters"));
        cfg.subnet.kernel = std::stoul(need("kernel"));
        cfg.lambda_image = std::stod(need("lambda_i"));
        cfg.lambda_kspace = std::stod(need("lambda_k"));
        cfg.subnet.se_reduction = std::stoul(need("reduction"));
    } catch (const std::logic_error&) {
        throw FormatError("config contains a non-numeric value");
    }
    validate(cfg);
    return cfg;
}

}  // namespace ddci
