#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoneg/errors.hpp"
#include "autoneg/rng.hpp"
#include "autoneg/tensor.hpp"

namespace autoneg {

enum class Activation { linear, relu, tanh_fn };

struct LayerSpec {
    enum class Kind { dense, conv1d, softmax };
    Kind kind = Kind::dense;
    std::size_t units = 0;    // dense output width
    std::size_t filters = 0;  // conv1d
    std::size_t kernel = 0;   // conv1d
    Activation activation = Activation::linear;

    static LayerSpec dense(std::size_t units, Activation act) {
        LayerSpec s;
        s.kind = Kind::dense;
        s.units = units;
        s.activation = act;
        return s;
    }
    static LayerSpec conv1d(std::size_t filters, std::size_t kernel, Activation act) {
        LayerSpec s;
        s.kind = Kind::conv1d;
        s.filters = filters;
        s.kernel = kernel;
        s.activation = act;
        return s;
    }
    static LayerSpec softmax() {
        LayerSpec s;
        s.kind = Kind::softmax;
        return s;
    }
};

namespace detail {

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu:
            return z > 0.0 ? z : 0.0;
        case Activation::tanh_fn:
            return std::tanh(z);
        case Activation::linear:
            return z;
    }
    return z;
}

inline double activate_grad(Activation a, double z) {
    switch (a) {
        case Activation::relu:
            return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh_fn: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::linear:
            return 1.0;
    }
    return 1.0;
}

}  // namespace detail

// Intermediate activations from a forward pass, consumed by backward().
struct ForwardCache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> inputs;  // input to each layer
    std::vector<std::vector<double>> pre;     // pre-activation (or softmax output)
};

struct Gradients {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
    std::vector<double> input;  // dLoss/dInput, batch-major
};

// Fixed layer-sequence network: dense and valid-padding 1D cross-correlation
// layers plus a final softmax. No general autodiff graph; the two
// architectures used here (small MLPs and a conv stack) only need this.
class Network {
public:
    Network() = default;

    // input geometry: length x channels; plain feature vectors use length = n,
    // channels = 1.
    Network(std::size_t input_len, std::size_t input_channels, std::vector<LayerSpec> specs)
        : input_len_(input_len), input_ch_(input_channels), specs_(std::move(specs)) {
        std::size_t len = input_len_, ch = input_ch_;
        for (const LayerSpec& s : specs_) {
            Geometry g{len, ch, 0, 0};
            switch (s.kind) {
                case LayerSpec::Kind::dense: {
                    if (s.units == 0) throw StructuralError("dense layer needs units > 0");
                    g.out_len = 1;
                    g.out_ch = s.units;
                    weights_.emplace_back(std::vector<std::size_t>{len * ch, s.units});
                    biases_.emplace_back(std::vector<std::size_t>{s.units});
                    break;
                }
                case LayerSpec::Kind::conv1d: {
                    if (s.filters == 0 || s.kernel == 0)
                        throw StructuralError("conv1d layer needs filters and kernel > 0");
                    if (s.kernel > len)
                        throw StructuralError("conv1d kernel longer than input length");
                    g.out_len = len - s.kernel + 1;
                    g.out_ch = s.filters;
                    weights_.emplace_back(std::vector<std::size_t>{s.kernel, ch, s.filters});
                    biases_.emplace_back(std::vector<std::size_t>{s.filters});
                    break;
                }
                case LayerSpec::Kind::softmax: {
                    g.out_len = len;
                    g.out_ch = ch;
                    weights_.emplace_back(std::vector<std::size_t>{0});
                    biases_.emplace_back(std::vector<std::size_t>{0});
                    break;
                }
            }
            geometry_.push_back(g);
            len = g.out_len;
            ch = g.out_ch;
        }
    }

    std::size_t input_size() const { return input_len_ * input_ch_; }
    std::size_t output_size() const {
        return geometry_.empty() ? input_size()
                                 : geometry_.back().out_len * geometry_.back().out_ch;
    }
    std::size_t input_len() const { return input_len_; }
    std::size_t input_channels() const { return input_ch_; }
    const std::vector<LayerSpec>& specs() const { return specs_; }
    std::vector<Tensor>& weights() { return weights_; }
    std::vector<Tensor>& biases() { return biases_; }
    const std::vector<Tensor>& weights() const { return weights_; }
    const std::vector<Tensor>& biases() const { return biases_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Tensor& t : weights_) n += t.size();
        for (const Tensor& t : biases_) n += t.size();
        return n;
    }

    void init_glorot_uniform(std::uint64_t seed) {
        Rng rng(seed);
        for (std::size_t l = 0; l < specs_.size(); ++l) {
            const LayerSpec& s = specs_[l];
            double fan_in = 0.0, fan_out = 0.0;
            if (s.kind == LayerSpec::Kind::dense) {
                fan_in = static_cast<double>(geometry_[l].in_len * geometry_[l].in_ch);
                fan_out = static_cast<double>(s.units);
            } else if (s.kind == LayerSpec::Kind::conv1d) {
                fan_in = static_cast<double>(s.kernel * geometry_[l].in_ch);
                fan_out = static_cast<double>(s.kernel * s.filters);
            } else {
                continue;
            }
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (double& w : weights_[l].data) w = rng.uniform(-limit, limit);
            biases_[l].fill(0.0);
        }
    }

    // Forward pass over a batch (batch-major layout). Pure in the parameters:
    // repeated calls with the same input give identical outputs.
    std::vector<double> forward(std::span<const double> input, std::size_t batch,
                                ForwardCache* cache = nullptr) const {
        if (input.size() != batch * input_size())
            throw StructuralError("forward: input size does not match network input shape");
        if (cache) {
            cache->batch = batch;
            cache->inputs.assign(specs_.size(), {});
            cache->pre.assign(specs_.size(), {});
        }
        std::vector<double> x(input.begin(), input.end());
        for (std::size_t l = 0; l < specs_.size(); ++l) {
            if (cache) cache->inputs[l] = x;
            x = forward_layer(l, x, batch, cache ? &cache->pre[l] : nullptr);
        }
        return x;
    }

    // Reverse-mode gradients for every parameter and for the input.
    // `upstream` is dLoss/dOutput including any batch-mean factors, so the
    // parameter gradients come out summed over the batch.
    Gradients backward(const ForwardCache& cache, std::span<const double> upstream) const {
        if (cache.inputs.size() != specs_.size())
            throw StateError("backward called without a matching forward cache");
        const std::size_t batch = cache.batch;
        if (upstream.size() != batch * output_size())
            throw StructuralError("backward: upstream gradient has wrong size");
        Gradients g;
        g.weights.reserve(specs_.size());
        g.biases.reserve(specs_.size());
        for (std::size_t l = 0; l < specs_.size(); ++l) {
            g.weights.emplace_back(weights_[l].shape);
            g.biases.emplace_back(biases_[l].shape);
        }
        std::vector<double> grad(upstream.begin(), upstream.end());
        for (std::size_t l = specs_.size(); l-- > 0;) {
            grad = backward_layer(l, cache, grad, batch, g.weights[l], g.biases[l]);
        }
        g.input = std::move(grad);
        return g;
    }

private:
    struct Geometry {
        std::size_t in_len, in_ch, out_len, out_ch;
    };

    std::vector<double> forward_layer(std::size_t l, const std::vector<double>& x,
                                      std::size_t batch, std::vector<double>* pre) const {
        const LayerSpec& s = specs_[l];
        const Geometry& g = geometry_[l];
        const std::size_t in_n = g.in_len * g.in_ch;
        const std::size_t out_n = g.out_len * g.out_ch;
        std::vector<double> z(batch * out_n, 0.0);
        switch (s.kind) {
            case LayerSpec::Kind::dense: {
                const double* W = weights_[l].data.data();
                const double* bias = biases_[l].data.data();
                for (std::size_t b = 0; b < batch; ++b) {
                    double* zb = z.data() + b * out_n;
                    const double* xb = x.data() + b * in_n;
                    for (std::size_t o = 0; o < out_n; ++o) zb[o] = bias[o];
                    for (std::size_t f = 0; f < in_n; ++f) {
                        const double xv = xb[f];
                        if (xv == 0.0) continue;
                        const double* Wf = W + f * out_n;
                        for (std::size_t o = 0; o < out_n; ++o) zb[o] += xv * Wf[o];
                    }
                }
                break;
            }
            case LayerSpec::Kind::conv1d: {
                // valid cross-correlation, stride 1
                const double* W = weights_[l].data.data();
                const double* bias = biases_[l].data.data();
                const std::size_t K = s.kernel, C = g.in_ch, F = s.filters;
                for (std::size_t b = 0; b < batch; ++b) {
                    const double* xb = x.data() + b * in_n;
                    double* zb = z.data() + b * out_n;
                    for (std::size_t p = 0; p < g.out_len; ++p) {
                        double* zp = zb + p * F;
                        for (std::size_t f = 0; f < F; ++f) zp[f] = bias[f];
                        for (std::size_t dk = 0; dk < K; ++dk) {
                            const double* xrow = xb + (p + dk) * C;
                            const double* Wrow = W + dk * C * F;
                            for (std::size_t c = 0; c < C; ++c) {
                                const double xv = xrow[c];
                                const double* Wc = Wrow + c * F;
                                for (std::size_t f = 0; f < F; ++f) zp[f] += xv * Wc[f];
                            }
                        }
                    }
                }
                break;
            }
            case LayerSpec::Kind::softmax: {
                for (std::size_t b = 0; b < batch; ++b) {
                    const double* xb = x.data() + b * in_n;
                    double* zb = z.data() + b * out_n;
                    double mx = xb[0];
                    for (std::size_t i = 1; i < in_n; ++i) mx = std::max(mx, xb[i]);
                    double sum = 0.0;
                    for (std::size_t i = 0; i < in_n; ++i) {
                        zb[i] = std::exp(xb[i] - mx);
                        sum += zb[i];
                    }
                    for (std::size_t i = 0; i < in_n; ++i) zb[i] /= sum;
                }
                if (pre) *pre = z;  // softmax caches its output
                return z;
            }
        }
        if (pre) *pre = z;
        if (s.activation == Activation::linear) return z;
        std::vector<double> y(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) y[i] = detail::activate(s.activation, z[i]);
        return y;
    }

    std::vector<double> backward_layer(std::size_t l, const ForwardCache& cache,
                                       const std::vector<double>& upstream, std::size_t batch,
                                       Tensor& dW, Tensor& db) const {
        const LayerSpec& s = specs_[l];
        const Geometry& g = geometry_[l];
        const std::size_t in_n = g.in_len * g.in_ch;
        const std::size_t out_n = g.out_len * g.out_ch;
        const std::vector<double>& x = cache.inputs[l];
        const std::vector<double>& z = cache.pre[l];
        std::vector<double> dx(batch * in_n, 0.0);

        if (s.kind == LayerSpec::Kind::softmax) {
            // z holds the softmax output y; dx_i = y_i (g_i - sum_j g_j y_j)
            for (std::size_t b = 0; b < batch; ++b) {
                const double* yb = z.data() + b * out_n;
                const double* gb = upstream.data() + b * out_n;
                double dot = 0.0;
                for (std::size_t i = 0; i < out_n; ++i) dot += gb[i] * yb[i];
                double* dxb = dx.data() + b * in_n;
                for (std::size_t i = 0; i < out_n; ++i) dxb[i] = yb[i] * (gb[i] - dot);
            }
            return dx;
        }

        // activation backprop into dz
        std::vector<double> dz(batch * out_n);
        if (s.activation == Activation::linear) {
            std::copy(upstream.begin(), upstream.end(), dz.begin());
        } else {
            for (std::size_t i = 0; i < dz.size(); ++i)
                dz[i] = upstream[i] * detail::activate_grad(s.activation, z[i]);
        }

        if (s.kind == LayerSpec::Kind::dense) {
            const double* W = weights_[l].data.data();
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xb = x.data() + b * in_n;
                const double* dzb = dz.data() + b * out_n;
                double* dxb = dx.data() + b * in_n;
                for (std::size_t o = 0; o < out_n; ++o) db.data[o] += dzb[o];
                for (std::size_t f = 0; f < in_n; ++f) {
                    const double xv = xb[f];
                    const double* Wf = W + f * out_n;
                    double* dWf = dW.data.data() + f * out_n;
                    double acc = 0.0;
                    for (std::size_t o = 0; o < out_n; ++o) {
                        dWf[o] += xv * dzb[o];
                        acc += Wf[o] * dzb[o];
                    }
                    dxb[f] = acc;
                }
            }
        } else {  // conv1d
            const double* W = weights_[l].data.data();
            const std::size_t K = s.kernel, C = g.in_ch, F = s.filters;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xb = x.data() + b * in_n;
                const double* dzb = dz.data() + b * out_n;
                double* dxb = dx.data() + b * in_n;
                for (std::size_t p = 0; p < g.out_len; ++p) {
                    const double* dzp = dzb + p * F;
                    for (std::size_t f = 0; f < F; ++f) db.data[f] += dzp[f];
                    for (std::size_t dk = 0; dk < K; ++dk) {
                        const double* xrow = xb + (p + dk) * C;
                        double* dxrow = dxb + (p + dk) * C;
                        const double* Wrow = W + dk * C * F;
                        double* dWrow = dW.data.data() + dk * C * F;
                        for (std::size_t c = 0; c < C; ++c) {
                            const double xv = xrow[c];
                            const double* Wc = Wrow + c * F;
                            double* dWc = dWrow + c * F;
                            double acc = 0.0;
                            for (std::size_t f = 0; f < F; ++f) {
                                dWc[f] += xv * dzp[f];
                                acc += Wc[f] * dzp[f];
                            }
                            dxrow[c] += acc;
                        }
                    }
                }
            }
        }
        return dx;
    }

    std::size_t input_len_ = 0, input_ch_ = 0;
    std::vector<LayerSpec> specs_;
    std::vector<Geometry> geometry_;
    std::vector<Tensor> weights_;
    std::vector<Tensor> biases_;
};

// --- losses -----------------------------------------------------------------

inline double mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw StructuralError("mse: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

inline std::vector<double> mse_grad(std::span<const double> pred, std::span<const double> target) {
    std::vector<double> g(pred.size());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
    return g;
}

constexpr double kProbClip = 1e-7;

// Cross-entropy of one predicted distribution against a one-hot target.
// Probabilities are clipped to [1e-7, 1 - 1e-7] before the log.
inline double categorical_crossentropy(std::span<const double> probs,
                                       std::span<const double> one_hot) {
    if (probs.size() != one_hot.size())
        throw StructuralError("crossentropy: size mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (one_hot[i] == 0.0) continue;
        const double p = std::clamp(probs[i], kProbClip, 1.0 - kProbClip);
        loss -= one_hot[i] * std::log(p);
    }
    return loss;
}

// Batch mean loss and gradient wrt the probabilities (batch-major).
inline double categorical_crossentropy_batch(std::span<const double> probs,
                                             std::span<const int> labels, std::size_t classes,
                                             std::vector<double>* grad = nullptr) {
    const std::size_t batch = labels.size();
    if (probs.size() != batch * classes)
        throw StructuralError("crossentropy: batch size mismatch");
    if (grad) grad->assign(probs.size(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double raw = probs[b * classes + labels[b]];
        const double p = std::clamp(raw, kProbClip, 1.0 - kProbClip);
        loss -= std::log(p);
        if (grad && raw > kProbClip && raw < 1.0 - kProbClip)
            (*grad)[b * classes + labels[b]] = -1.0 / (p * static_cast<double>(batch));
    }
    return loss / static_cast<double>(batch);
}

// --- Adam -------------------------------------------------------------------

// One Adam step on a raw parameter array. `step` must already be incremented
// for the bias correction (first call passes step = 1).
inline void adam_update(std::span<double> param, std::span<const double> grad,
                        std::span<double> m, std::span<double> v, long step, double lr,
                        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
        throw StructuralError("adam: size mismatch");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// Adam state for a whole network: first/second moments shaped like the
// parameters plus a shared step counter.
struct AdamState {
    std::vector<Tensor> mW, vW, mB, vB;
    long step = 0;

    explicit AdamState(const Network& net) {
        for (const Tensor& w : net.weights()) {
            mW.emplace_back(w.shape);
            vW.emplace_back(w.shape);
        }
        for (const Tensor& b : net.biases()) {
            mB.emplace_back(b.shape);
            vB.emplace_back(b.shape);
        }
    }
};

inline void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    ++state.step;
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        adam_update(net.weights()[l].data, grads.weights[l].data, state.mW[l].data,
                    state.vW[l].data, state.step, lr, beta1, beta2, eps);
        adam_update(net.biases()[l].data, grads.biases[l].data, state.mB[l].data,
                    state.vB[l].data, state.step, lr, beta1, beta2, eps);
    }
}

// --- serialization -----------------------------------------------------------

// JSON model format, version 1. nlohmann serializes doubles with the
// shortest round-trip representation, so save/load is bit-exact.
inline nlohmann::ordered_json network_to_json(const Network& net) {
    nlohmann::ordered_json j;
    j["format"] = "autoneg-model";
    j["version"] = 1;
    j["input_len"] = net.input_len();
    j["input_channels"] = net.input_channels();
    j["layers"] = nlohmann::ordered_json::array();
    for (const LayerSpec& s : net.specs()) {
        nlohmann::ordered_json jl;
        switch (s.kind) {
            case LayerSpec::Kind::dense:
                jl["kind"] = "dense";
                jl["units"] = s.units;
                break;
            case LayerSpec::Kind::conv1d:
                jl["kind"] = "conv1d";
                jl["filters"] = s.filters;
                jl["kernel"] = s.kernel;
                break;
            case LayerSpec::Kind::softmax:
                jl["kind"] = "softmax";
                break;
        }
        if (s.kind != LayerSpec::Kind::softmax) {
            switch (s.activation) {
                case Activation::linear: jl["activation"] = "linear"; break;
                case Activation::relu: jl["activation"] = "relu"; break;
                case Activation::tanh_fn: jl["activation"] = "tanh"; break;
            }
        }
        j["layers"].push_back(std::move(jl));
    }
    j["weights"] = nlohmann::ordered_json::array();
    j["biases"] = nlohmann::ordered_json::array();
    for (const Tensor& w : net.weights()) j["weights"].push_back(w.data);
    for (const Tensor& b : net.biases()) j["biases"].push_back(b.data);
    return j;
}

inline Network network_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "autoneg-model" || j.at("version") != 1)
        throw StructuralError("unsupported model file format/version");
    std::vector<LayerSpec> specs;
    for (const auto& jl : j.at("layers")) {
        const std::string kind = jl.at("kind");
        Activation act = Activation::linear;
        if (jl.contains("activation")) {
            const std::string a = jl.at("activation");
            if (a == "relu") act = Activation::relu;
            else if (a == "tanh") act = Activation::tanh_fn;
            else if (a == "linear") act = Activation::linear;
            else throw StructuralError("unknown activation: " + a);
        }
        if (kind == "dense") {
            specs.push_back(LayerSpec::dense(jl.at("units").get<std::size_t>(), act));
        } else if (kind == "conv1d") {
            specs.push_back(LayerSpec::conv1d(jl.at("filters").get<std::size_t>(),
                                              jl.at("kernel").get<std::size_t>(), act));
        } else if (kind == "softmax") {
            specs.push_back(LayerSpec::softmax());
        } else {
            throw StructuralError("unknown layer kind: " + kind);
        }
    }
    Network net(j.at("input_len").get<std::size_t>(), j.at("input_channels").get<std::size_t>(),
                std::move(specs));
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (jw.size() != net.weights().size() || jb.size() != net.biases().size())
        throw StructuralError("model file parameter count mismatch");
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        std::vector<double> w = jw[l].get<std::vector<double>>();
        std::vector<double> b = jb[l].get<std::vector<double>>();
        if (w.size() != net.weights()[l].size() || b.size() != net.biases()[l].size())
            throw StructuralError("model file tensor shape mismatch");
        net.weights()[l].data = std::move(w);
        net.biases()[l].data = std::move(b);
    }
    return net;
}

}  // namespace autoneg
