#pragma once

// Fully-connected network with hand-written backprop, Adam and Polyak averaging.
// Everything is double precision; relu'(0) is taken as 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "steady_replay/errors.hpp"

namespace steady_replay {

enum class OutputActivation { identity, tanh };

/// One affine layer; weights are row-major out x in.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), biases(out_dim, 0.0) {}

    double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
    double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }

    bool same_shape(const DenseLayer& other) const { return in == other.in && out == other.out; }
};

struct Mlp {
    std::vector<std::size_t> layer_dims;
    std::vector<DenseLayer> layers;
    OutputActivation output_activation = OutputActivation::identity;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.biases.size();
        return n;
    }

    bool same_architecture(const Mlp& other) const {
        return layer_dims == other.layer_dims && output_activation == other.output_activation;
    }
};

/// Gradient carrier, shape-congruent with the Mlp it was made for.
struct ParamGrads {
    std::vector<DenseLayer> layers;

    static ParamGrads zeros_like(const Mlp& net) {
        ParamGrads g;
        g.layers.reserve(net.layers.size());
        for (const auto& l : net.layers) g.layers.emplace_back(l.in, l.out);
        return g;
    }

    void set_zero() {
        for (auto& l : layers) {
            std::fill(l.weights.begin(), l.weights.end(), 0.0);
            std::fill(l.biases.begin(), l.biases.end(), 0.0);
        }
    }

    bool congruent(const Mlp& net) const {
        if (layers.size() != net.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (!layers[i].same_shape(net.layers[i])) return false;
        return true;
    }
};

/// activations[0] is the input, activations[l + 1] the post-activation of layer l.
struct ForwardCache {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre;

    const std::vector<double>& output() const { return activations.back(); }
};

struct BackwardScratch {
    std::vector<double> delta;
    std::vector<double> next;
};

inline void validate_dims(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    for (auto d : dims)
        if (d == 0) throw ConfigError("network layer sizes must be positive");
}

/// Hidden layers: U(+-1/sqrt(fan_in)). Final layer: U(+-3e-3).
inline Mlp init_mlp(const std::vector<std::size_t>& layer_dims, OutputActivation output_activation,
                    std::uint64_t seed) {
    validate_dims(layer_dims);
    Mlp net;
    net.layer_dims = layer_dims;
    net.output_activation = output_activation;
    std::mt19937_64 rng(seed);
    const std::size_t n_layers = layer_dims.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        DenseLayer layer(layer_dims[l], layer_dims[l + 1]);
        const double bound = (l + 1 == n_layers) ? 3e-3 : 1.0 / std::sqrt(static_cast<double>(layer.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : layer.weights) w = dist(rng);
        for (auto& b : layer.biases) b = dist(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline void forward_into(const Mlp& net, std::span<const double> x, ForwardCache& cache) {
    if (x.size() != net.input_dim())
        throw ContractViolation("forward: input has " + std::to_string(x.size()) + " components, net expects " +
                                std::to_string(net.input_dim()));
    const std::size_t n_layers = net.layers.size();
    cache.activations.resize(n_layers + 1);
    cache.pre.resize(n_layers);
    cache.activations[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = net.layers[l];
        const std::vector<double>& in = cache.activations[l];
        std::vector<double>& z = cache.pre[l];
        std::vector<double>& a = cache.activations[l + 1];
        z.resize(layer.out);
        a.resize(layer.out);
        const double* w = layer.weights.data();
        const double* xin = in.data();
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* row = w + o * layer.in;
            double s = 0.0;
            for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * xin[i];
            z[o] = s + layer.biases[o];
        }
        const bool last = l + 1 == n_layers;
        if (!last) {
            for (std::size_t o = 0; o < layer.out; ++o) a[o] = z[o] > 0.0 ? z[o] : 0.0;
        } else if (net.output_activation == OutputActivation::tanh) {
            for (std::size_t o = 0; o < layer.out; ++o) a[o] = std::tanh(z[o]);
        } else {
            a = z;
        }
    }
}

inline std::pair<std::vector<double>, ForwardCache> forward(const Mlp& net, std::span<const double> x) {
    ForwardCache cache;
    forward_into(net, x, cache);
    return {cache.output(), std::move(cache)};
}

inline bool cache_matches(const Mlp& net, const ForwardCache& cache) {
    if (cache.activations.size() != net.layers.size() + 1 || cache.pre.size() != net.layers.size()) return false;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (cache.activations[l].size() != net.layers[l].in) return false;
        if (cache.pre[l].size() != net.layers[l].out) return false;
    }
    return cache.activations.back().size() == net.output_dim();
}

/// Gradients of <dy, y> w.r.t. parameters (accumulated into *grads when non-null) and input (written to dx).
inline void backward_into(const Mlp& net, const ForwardCache& cache, std::span<const double> dy, ParamGrads* grads,
                          std::span<double> dx, BackwardScratch& scratch) {
    if (!cache_matches(net, cache)) throw ContractViolation("backward: cache does not match network");
    if (dy.size() != net.output_dim()) throw ContractViolation("backward: dy has wrong dimension");
    if (dx.size() != net.input_dim()) throw ContractViolation("backward: dx has wrong dimension");
    if (grads && !grads->congruent(net)) throw ContractViolation("backward: gradient shape mismatch");

    const std::size_t n_layers = net.layers.size();
    std::vector<double>& delta = scratch.delta;
    std::vector<double>& next = scratch.next;
    delta.assign(dy.begin(), dy.end());
    if (net.output_activation == OutputActivation::tanh) {
        const auto& y = cache.activations.back();
        for (std::size_t o = 0; o < delta.size(); ++o) delta[o] *= 1.0 - y[o] * y[o];
    }
    for (std::size_t l = n_layers; l-- > 0;) {
        const DenseLayer& layer = net.layers[l];
        const double* xin = cache.activations[l].data();
        if (grads) {
            DenseLayer& g = grads->layers[l];
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                g.biases[o] += d;
                if (d == 0.0) continue;
                double* grow = g.weights.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * xin[i];
            }
        }
        next.assign(layer.in, 0.0);
        double* nx = next.data();
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) nx[i] += row[i] * d;
        }
        if (l > 0) {
            const auto& z = cache.pre[l - 1];
            for (std::size_t i = 0; i < layer.in; ++i)
                if (!(z[i] > 0.0)) next[i] = 0.0;
        }
        std::swap(delta, next);
    }
    std::copy(delta.begin(), delta.end(), dx.begin());
}

inline std::pair<ParamGrads, std::vector<double>> backward(const Mlp& net, const ForwardCache& cache,
                                                           std::span<const double> dy) {
    ParamGrads grads = ParamGrads::zeros_like(net);
    std::vector<double> dx(net.input_dim());
    BackwardScratch scratch;
    backward_into(net, cache, dy, &grads, dx, scratch);
    return {std::move(grads), std::move(dx)};
}

struct AdamState {
    ParamGrads m;
    ParamGrads v;
    std::int64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;

    static AdamState for_net(const Mlp& net, double lr) {
        AdamState s;
        s.m = ParamGrads::zeros_like(net);
        s.v = ParamGrads::zeros_like(net);
        s.lr = lr;
        return s;
    }
};

inline bool all_finite(const ParamGrads& g) {
    for (const auto& l : g.layers) {
        for (double x : l.weights)
            if (!std::isfinite(x)) return false;
        for (double x : l.biases)
            if (!std::isfinite(x)) return false;
    }
    return true;
}

/// Bias-corrected Adam; throws DivergenceError before touching anything if a gradient is non-finite.
inline void adam_step(Mlp& net, const ParamGrads& grads, AdamState& state) {
    if (!grads.congruent(net) || !state.m.congruent(net) || !state.v.congruent(net))
        throw ContractViolation("adam_step: shape mismatch");
    if (state.t < 0) throw ContractViolation("adam_step: negative step counter");
    if (!all_finite(grads)) throw DivergenceError("adam_step: non-finite gradient component");

    state.t += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        update(net.layers[l].weights, grads.layers[l].weights, state.m.layers[l].weights, state.v.layers[l].weights);
        update(net.layers[l].biases, grads.layers[l].biases, state.m.layers[l].biases, state.v.layers[l].biases);
    }
}

/// target <- tau * source + (1 - tau) * target.
inline void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (!target.same_architecture(source)) throw ContractViolation("soft_update: architecture mismatch");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ContractViolation("soft_update: tau outside [0, 1]");
    auto blend = [tau](std::vector<double>& t, const std::vector<double>& s) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
    };
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        blend(target.layers[l].weights, source.layers[l].weights);
        blend(target.layers[l].biases, source.layers[l].biases);
    }
}

// --- batched evaluation -------------------------------------------------------------------------
// Same math as forward_into/backward_into with one column per sample.

using Matrix = Eigen::MatrixXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutableRowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct BatchCache {
    std::vector<Matrix> activations;
    std::vector<Matrix> pre;

    const Matrix& output() const { return activations.back(); }
};

inline void forward_batch(const Mlp& net, const Matrix& x, BatchCache& cache) {
    if (static_cast<std::size_t>(x.rows()) != net.input_dim())
        throw ContractViolation("forward_batch: input rows do not match the network input size");
    const std::size_t n_layers = net.layers.size();
    cache.activations.resize(n_layers + 1);
    cache.pre.resize(n_layers);
    cache.activations[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = net.layers[l];
        const RowMajorMap w(layer.weights.data(), static_cast<Eigen::Index>(layer.out),
                            static_cast<Eigen::Index>(layer.in));
        const Eigen::Map<const Eigen::VectorXd> b(layer.biases.data(), static_cast<Eigen::Index>(layer.out));
        Matrix& z = cache.pre[l];
        z.noalias() = w * cache.activations[l];
        z.colwise() += b;
        if (l + 1 < n_layers) {
            cache.activations[l + 1] = z.cwiseMax(0.0);
        } else if (net.output_activation == OutputActivation::tanh) {
            cache.activations[l + 1] = z.array().tanh().matrix();
        } else {
            cache.activations[l + 1] = z;
        }
    }
}

/// Sums the per-column gradients of <dy_j, y_j> into *grads (if non-null); dx gets one column per sample.
inline void backward_batch(const Mlp& net, const BatchCache& cache, const Matrix& dy, ParamGrads* grads,
                           Matrix* dx) {
    if (cache.activations.size() != net.layers.size() + 1 || cache.output().rows() != dy.rows() ||
        cache.output().cols() != dy.cols())
        throw ContractViolation("backward_batch: cache does not match network or dy");
    if (grads && !grads->congruent(net)) throw ContractViolation("backward_batch: gradient shape mismatch");
    Matrix delta = dy;
    if (net.output_activation == OutputActivation::tanh)
        delta.array() *= 1.0 - cache.output().array().square();
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const DenseLayer& layer = net.layers[l];
        const RowMajorMap w(layer.weights.data(), static_cast<Eigen::Index>(layer.out),
                            static_cast<Eigen::Index>(layer.in));
        if (grads) {
            DenseLayer& g = grads->layers[l];
            MutableRowMajorMap gw(g.weights.data(), static_cast<Eigen::Index>(g.out), static_cast<Eigen::Index>(g.in));
            Eigen::Map<Eigen::VectorXd> gb(g.biases.data(), static_cast<Eigen::Index>(g.out));
            gw.noalias() += delta * cache.activations[l].transpose();
            gb += delta.rowwise().sum();
        }
        if (l == 0 && !dx) break;
        Matrix next = w.transpose() * delta;
        if (l > 0) next.array() *= (cache.pre[l - 1].array() > 0.0).cast<double>();
        delta = std::move(next);
    }
    if (dx) *dx = std::move(delta);
}

/// Parameters in layer order, each layer's weights (row-major) followed by its biases.
inline std::vector<double> flatten(const Mlp& net) {
    std::vector<double> out;
    out.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
}

inline std::vector<double> flatten(const ParamGrads& g) {
    std::vector<double> out;
    for (const auto& l : g.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
}

inline void unflatten(Mlp& net, std::span<const double> params) {
    if (params.size() != net.parameter_count()) throw ContractViolation("unflatten: parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : net.layers) {
        for (auto& w : l.weights) w = params[k++];
        for (auto& b : l.biases) b = params[k++];
    }
}

/// Central differences, one coordinate at a time.
inline std::vector<double> numerical_gradient(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> x, double h) {
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace steady_replay
