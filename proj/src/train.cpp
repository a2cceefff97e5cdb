#include "hoidet/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hoidet {

void adamw_step(ParamSet& params, const std::vector<Tensor>& grads, std::vector<Tensor>& m,
                std::vector<Tensor>& v, int t, const OptimizerConfig& opt) {
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
    for (size_t i = 0; i < params.values.size(); ++i) {
        Tensor& p = params.values[i];
        const Tensor& g = grads[i];
        Tensor& mi = m[i];
        Tensor& vi = v[i];
        for (size_t j = 0; j < p.numel(); ++j) {
            mi.data[j] = opt.beta1 * mi.data[j] + (1.0 - opt.beta1) * g.data[j];
            vi.data[j] = opt.beta2 * vi.data[j] + (1.0 - opt.beta2) * g.data[j] * g.data[j];
            const double mhat = mi.data[j] / bc1;
            const double vhat = vi.data[j] / bc2;
            p.data[j] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps) + opt.weight_decay * p.data[j];
        }
    }
}

TrainResult train(const std::vector<Tensor>& images,
                  const std::vector<std::vector<GtInstance>>& gts, const ModelConfig& cfg,
                  const TrainConfig& tcfg) {
    if (images.empty()) throw std::invalid_argument("train: empty dataset");
    if (images.size() != gts.size()) {
        throw std::invalid_argument("train: image/annotation count mismatch");
    }
    if (tcfg.steps < 0) throw std::invalid_argument("train: negative step count");

    TrainResult result;
    result.params = init_params(cfg);
    const size_t n_params = result.params.values.size();
    std::vector<Tensor> m, v;
    m.reserve(n_params);
    v.reserve(n_params);
    for (const Tensor& p : result.params.values) {
        m.emplace_back(p.shape);
        v.emplace_back(p.shape);
    }

    const double inv_n = 1.0 / static_cast<double>(images.size());
    result.log.reserve(static_cast<size_t>(tcfg.steps));
    for (int step = 0; step < tcfg.steps; ++step) {
        std::vector<Tensor> grad_sum;
        grad_sum.reserve(n_params);
        for (const Tensor& p : result.params.values) grad_sum.emplace_back(p.shape);
        LossBreakdown mean;
        for (size_t img = 0; img < images.size(); ++img) {
            LossGradients lg;
            try {
                lg = loss_gradients(images[img], gts[img], result.params, cfg, tcfg.cost_weights,
                                    tcfg.loss_weights, tcfg.focal);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train: diverged at step " + std::to_string(step) + ": " +
                                         e.what());
            }
            for (size_t i = 0; i < n_params; ++i) {
                for (size_t j = 0; j < grad_sum[i].numel(); ++j) {
                    grad_sum[i].data[j] += lg.grads[i].data[j];
                }
            }
            mean.box += lg.final_layer.box * inv_n;
            mean.giou += lg.final_layer.giou * inv_n;
            mean.obj_class += lg.final_layer.obj_class * inv_n;
            mean.action += lg.final_layer.action * inv_n;
            mean.total += lg.total * inv_n;
        }
        if (!std::isfinite(mean.total)) {
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
        }
        for (size_t i = 0; i < n_params; ++i) {
            for (size_t j = 0; j < grad_sum[i].numel(); ++j) grad_sum[i].data[j] *= inv_n;
        }
        adamw_step(result.params, grad_sum, m, v, step + 1, tcfg.optim);
        result.log.push_back({step, mean});
    }
    return result;
}

}  // namespace hoidet
