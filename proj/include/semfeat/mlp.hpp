#pragma once

// Three-hidden-layer ReLU regressor with a linear scalar head, trained by
// mini-batch Adam on mean squared error. Backpropagation is written out by
// hand; grad_check() compares it against central differences.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace semfeat {

inline constexpr std::size_t kAffineLayers = 4;

struct NetworkSpec {
    std::size_t input_dim = 1;
    std::array<std::size_t, 3> hidden_dims{256, 128, 64};

    /// Width of each affine layer's input and output, input first.
    std::array<std::size_t, kAffineLayers + 1> widths() const {
        return {input_dim, hidden_dims[0], hidden_dims[1], hidden_dims[2], 1};
    }

    void validate() const {
        if (input_dim < 1) fail(ErrorKind::domain, "input_dim must be >= 1");
        for (auto h : hidden_dims)
            if (h < 1) fail(ErrorKind::domain, "hidden dims must be >= 1");
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// All parameters live in one flat buffer: for each affine layer, the
/// weight matrix (out x in, row-major) followed by the bias vector. Gradients
/// and optimizer moments use the same layout.
class Network {
public:
    Network() = default;

    explicit Network(NetworkSpec spec) : spec_(spec) {
        spec_.validate();
        const auto w = spec_.widths();
        std::size_t off = 0;
        for (std::size_t l = 0; l < kAffineLayers; ++l) {
            weight_offset_[l] = off;
            off += w[l + 1] * w[l];
            bias_offset_[l] = off;
            off += w[l + 1];
        }
        params_.assign(off, 0.0);
    }

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::size_t in_width(std::size_t l) const { return spec_.widths()[l]; }
    std::size_t out_width(std::size_t l) const { return spec_.widths()[l + 1]; }

    std::span<double> weights(std::size_t l) {
        return {params_.data() + weight_offset_[l], out_width(l) * in_width(l)};
    }
    std::span<const double> weights(std::size_t l) const {
        return {params_.data() + weight_offset_[l], out_width(l) * in_width(l)};
    }
    std::span<double> bias(std::size_t l) { return {params_.data() + bias_offset_[l], out_width(l)}; }
    std::span<const double> bias(std::size_t l) const { return {params_.data() + bias_offset_[l], out_width(l)}; }

    std::size_t weight_offset(std::size_t l) const { return weight_offset_[l]; }
    std::size_t bias_offset(std::size_t l) const { return bias_offset_[l]; }

    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    friend bool operator==(const Network&, const Network&) = default;

private:
    NetworkSpec spec_;
    std::array<std::size_t, kAffineLayers> weight_offset_{};
    std::array<std::size_t, kAffineLayers> bias_offset_{};
    std::vector<double> params_;
};

using Gradients = std::vector<double>;

struct TrainHyper {
    double learning_rate = 1e-3;
    std::size_t epochs = 150;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const {
        if (!(learning_rate > 0.0)) fail(ErrorKind::domain, "learning_rate must be > 0");
        if (epochs < 1) fail(ErrorKind::domain, "epochs must be >= 1");
        if (batch_size < 1) fail(ErrorKind::domain, "batch_size must be >= 1");
    }
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// ---------------------------------------------------------------------------
// Initialization and forward pass

/// He-uniform weights, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); zero biases.
inline Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
    Network net(spec);
    Rng rng(seed);
    for (std::size_t l = 0; l < kAffineLayers; ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(net.in_width(l)));
        for (double& w : net.weights(l)) w = rng.uniform(-bound, bound);
    }
    return net;
}

namespace detail {

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

/// Affine map of one row: out = W * in + b.
inline void affine(std::span<const double> W, std::span<const double> b, std::span<const double> in,
                   std::span<double> out) {
    const std::size_t n_in = in.size();
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double* w = W.data() + j * n_in;
        double s = b[j];
        for (std::size_t i = 0; i < n_in; ++i) s += w[i] * in[i];
        out[j] = s;
    }
}

/// Batch activations kept for backpropagation. pre[l] holds the affine
/// output of layer l, post[l] the input to layer l (post[0] is the batch).
struct Workspace {
    std::array<Matrix, kAffineLayers> pre;
    std::array<Matrix, kAffineLayers + 1> post;
    std::array<Matrix, kAffineLayers> delta;

    void resize(const Network& net, std::size_t batch) {
        for (std::size_t l = 0; l < kAffineLayers; ++l) {
            if (pre[l].rows() != batch || pre[l].cols() != net.out_width(l)) {
                pre[l] = Matrix(batch, net.out_width(l));
                delta[l] = Matrix(batch, net.out_width(l));
            }
            if (post[l + 1].rows() != batch || post[l + 1].cols() != net.out_width(l))
                post[l + 1] = Matrix(batch, net.out_width(l));
        }
    }
};

inline void forward_batch(const Network& net, const Matrix& X, Workspace& ws) {
    ws.resize(net, X.rows());
    ws.post[0] = X;
    for (std::size_t l = 0; l < kAffineLayers; ++l) {
        const bool hidden = l + 1 < kAffineLayers;
        for (std::size_t r = 0; r < X.rows(); ++r) {
            affine(net.weights(l), net.bias(l), ws.post[l].row(r), ws.pre[l].row(r));
            auto z = ws.pre[l].row(r);
            auto a = ws.post[l + 1].row(r);
            for (std::size_t j = 0; j < z.size(); ++j) a[j] = hidden ? relu(z[j]) : z[j];
        }
    }
}

/// Gradient of the batch-mean squared error, written into `grad`
/// (same layout as the network parameters). Requires forward_batch first.
inline void backward_batch(const Network& net, std::span<const double> y, Workspace& ws, Gradients& grad) {
    grad.assign(net.parameter_count(), 0.0);
    const std::size_t batch = y.size();
    const double scale = 2.0 / static_cast<double>(batch);
    for (std::size_t r = 0; r < batch; ++r) ws.delta[kAffineLayers - 1](r, 0) = scale * (ws.pre[kAffineLayers - 1](r, 0) - y[r]);

    for (std::size_t l = kAffineLayers; l-- > 0;) {
        const std::size_t n_in = net.in_width(l);
        const std::size_t n_out = net.out_width(l);
        double* gW = grad.data() + net.weight_offset(l);
        double* gb = grad.data() + net.bias_offset(l);
        for (std::size_t r = 0; r < batch; ++r) {
            const auto a = ws.post[l].row(r);
            const auto d = ws.delta[l].row(r);
            for (std::size_t j = 0; j < n_out; ++j) {
                const double dj = d[j];
                if (dj == 0.0) continue;
                gb[j] += dj;
                double* row = gW + j * n_in;
                for (std::size_t i = 0; i < n_in; ++i) row[i] += dj * a[i];
            }
        }
        if (l == 0) break;
        // Propagate to the previous hidden layer; ReLU'(0) = 0.
        const auto W = net.weights(l);
        for (std::size_t r = 0; r < batch; ++r) {
            auto prev = ws.delta[l - 1].row(r);
            std::fill(prev.begin(), prev.end(), 0.0);
            const auto d = ws.delta[l].row(r);
            for (std::size_t j = 0; j < n_out; ++j) {
                const double dj = d[j];
                if (dj == 0.0) continue;
                const double* w = W.data() + j * n_in;
                for (std::size_t i = 0; i < n_in; ++i) prev[i] += dj * w[i];
            }
            const auto z = ws.pre[l - 1].row(r);
            for (std::size_t i = 0; i < n_in; ++i)
                if (!(z[i] > 0.0)) prev[i] = 0.0;
        }
    }
}

} // namespace detail

inline double forward(const Network& net, std::span<const double> x) {
    if (x.size() != net.spec().input_dim)
        fail(ErrorKind::shape, "input has " + std::to_string(x.size()) + " entries, network expects " +
                                   std::to_string(net.spec().input_dim));
    std::vector<double> in(x.begin(), x.end());
    std::vector<double> out;
    for (std::size_t l = 0; l < kAffineLayers; ++l) {
        out.assign(net.out_width(l), 0.0);
        detail::affine(net.weights(l), net.bias(l), in, out);
        if (l + 1 < kAffineLayers)
            for (double& v : out) v = detail::relu(v);
        in.swap(out);
    }
    return in[0];
}

inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty()) fail(ErrorKind::domain, "loss of an empty batch");
    if (pred.size() != target.size()) fail(ErrorKind::shape, "prediction and target lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

/// Mean squared error of the network over a batch.
inline double batch_loss(const Network& net, const Matrix& X, std::span<const double> y) {
    std::vector<double> pred(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) pred[r] = forward(net, X.row(r));
    return loss_mse(pred, y);
}

inline Gradients gradients(const Network& net, const Matrix& batch_x, std::span<const double> batch_y) {
    if (batch_x.rows() == 0) fail(ErrorKind::domain, "empty batch");
    if (batch_x.rows() != batch_y.size()) fail(ErrorKind::shape, "batch rows and targets differ in length");
    if (batch_x.cols() != net.spec().input_dim) fail(ErrorKind::shape, "batch width does not match input_dim");
    detail::Workspace ws;
    detail::forward_batch(net, batch_x, ws);
    Gradients g;
    detail::backward_batch(net, batch_y, ws, g);
    return g;
}

/// One bias-corrected Adam update, in place.
inline void adam_step(Network& net, const Gradients& grads, AdamState& state, const TrainHyper& hyper) {
    auto& p = net.params();
    if (grads.size() != p.size() || state.m.size() != p.size() || state.v.size() != p.size())
        fail(ErrorKind::shape, "optimizer state does not match network");
    ++state.t;
    const double b1 = hyper.adam_beta1;
    const double b2 = hyper.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        p[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.adam_epsilon);
    }
}

// ---------------------------------------------------------------------------
// Standardization

inline constexpr double kStdFloor = 1e-8;

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Standardizer fit(const Matrix& X) {
        Standardizer s;
        s.mean.assign(X.cols(), 0.0);
        s.stddev.assign(X.cols(), 0.0);
        const double n = static_cast<double>(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r)
            for (std::size_t c = 0; c < X.cols(); ++c) s.mean[c] += X(r, c);
        for (double& m : s.mean) m /= n;
        for (std::size_t r = 0; r < X.rows(); ++r)
            for (std::size_t c = 0; c < X.cols(); ++c) {
                const double d = X(r, c) - s.mean[c];
                s.stddev[c] += d * d;
            }
        for (double& v : s.stddev) v = std::max(std::sqrt(v / n), kStdFloor);
        return s;
    }

    void apply(std::span<const double> in, std::span<double> out) const {
        for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / stddev[c];
    }

    Matrix transform(const Matrix& X) const {
        if (X.cols() != mean.size()) fail(ErrorKind::shape, "standardizer width mismatch");
        Matrix out(X.rows(), X.cols());
        for (std::size_t r = 0; r < X.rows(); ++r) apply(X.row(r), out.row(r));
        return out;
    }
};

// ---------------------------------------------------------------------------
// Training

struct TrainedModel {
    Network network;
    Standardizer standardizer;
    std::string feature;
    std::size_t layer = 0;
    double final_loss = 0.0;
    std::string model_id; // dump the model was trained on
    std::string pooling;
};

inline void check_finite(const Matrix& X, std::span<const double> y) {
    for (double v : X.data())
        if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite value in design matrix");
    for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite target value");
}

inline TrainedModel train(const Matrix& X, std::span<const double> y, const NetworkSpec& spec_in,
                          const TrainHyper& hyper) {
    hyper.validate();
    if (X.rows() != y.size()) fail(ErrorKind::shape, "design rows and targets differ in length");
    if (X.rows() < 2) fail(ErrorKind::domain, "training needs at least 2 rows");
    check_finite(X, y);
    NetworkSpec spec = spec_in;
    spec.input_dim = X.cols();

    TrainedModel model;
    model.standardizer = Standardizer::fit(X);
    const Matrix Z = model.standardizer.transform(X);
    model.network = init_network(spec, derive_seed(hyper.seed, {tag_of("init")}));

    AdamState state(model.network.parameter_count());
    Rng shuffle_rng(derive_seed(hyper.seed, {tag_of("shuffle")}));
    std::vector<std::size_t> order(X.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    detail::Workspace ws;
    Gradients grad;
    Matrix batch_x;
    std::vector<double> batch_y;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            if (batch_x.rows() != idx.size()) batch_x = Matrix(idx.size(), Z.cols());
            batch_y.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                auto src = Z.row(idx[i]);
                std::copy(src.begin(), src.end(), batch_x.row(i).begin());
                batch_y[i] = y[idx[i]];
            }
            detail::forward_batch(model.network, batch_x, ws);
            detail::backward_batch(model.network, batch_y, ws, grad);
            adam_step(model.network, grad, state, hyper);
        }
    }
    model.final_loss = batch_loss(model.network, Z, y);
    return model;
}

inline std::vector<double> predict(const TrainedModel& model, const Matrix& X) {
    if (X.cols() != model.network.spec().input_dim)
        fail(ErrorKind::shape, "design has " + std::to_string(X.cols()) + " columns, model expects " +
                                   std::to_string(model.network.spec().input_dim));
    std::vector<double> out(X.rows());
    std::vector<double> z(X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        model.standardizer.apply(X.row(r), z);
        out[r] = forward(model.network, z);
    }
    return out;
}

inline double predict_one(const TrainedModel& model, std::span<const double> x) {
    if (x.size() != model.network.spec().input_dim) fail(ErrorKind::shape, "input width does not match model");
    std::vector<double> z(x.size());
    model.standardizer.apply(x, z);
    return forward(model.network, z);
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps
/// parameters whose true gradient is zero (dead ReLUs) from turning
/// finite-difference rounding noise into a large ratio.
inline constexpr double kGradCheckFloor = 1e-6;

/// Largest relative disagreement between backprop and central differences
/// over every parameter of `net` on the batch.
inline double grad_check(const Network& net, const Matrix& batch_x, std::span<const double> batch_y, double h) {
    if (!(h > 0.0)) fail(ErrorKind::domain, "finite-difference step must be > 0");
    const Gradients analytic = gradients(net, batch_x, batch_y);
    Network probe = net;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
        const double saved = probe.params()[i];
        probe.params()[i] = saved + h;
        const double up = batch_loss(probe, batch_x, batch_y);
        probe.params()[i] = saved - h;
        const double down = batch_loss(probe, batch_x, batch_y);
        probe.params()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

/// Convenience form: builds a network from (spec, seed) and checks it.
inline double grad_check(const NetworkSpec& spec, std::uint64_t seed, const Matrix& batch_x,
                         std::span<const double> batch_y, double h) {
    return grad_check(init_network(spec, seed), batch_x, batch_y, h);
}

// ---------------------------------------------------------------------------
// Model files: "SMLP" | u32 version | u32 json_len | JSON | f32 parameters

inline std::string serialize_model(const TrainedModel& m) {
    nlohmann::json j;
    const auto& spec = m.network.spec();
    j["spec"] = {{"input_dim", spec.input_dim},
                 {"hidden_dims", {spec.hidden_dims[0], spec.hidden_dims[1], spec.hidden_dims[2]}},
                 {"activation", "relu"}};
    j["feature"] = m.feature;
    j["layer"] = m.layer;
    j["final_loss"] = m.final_loss;
    j["model_id"] = m.model_id;
    j["pooling"] = m.pooling;
    j["standardizer"] = {{"mean", m.standardizer.mean}, {"stddev", m.standardizer.stddev}};
    j["parameter_count"] = m.network.parameter_count();
    const std::string manifest = j.dump();

    std::string out = "SMLP";
    auto put_u32 = [&out](std::uint32_t v) {
        char b[4];
        std::memcpy(b, &v, 4);
        out.append(b, 4);
    };
    put_u32(1);
    put_u32(static_cast<std::uint32_t>(manifest.size()));
    out += manifest;
    for (double p : m.network.params()) {
        const float f = static_cast<float>(p);
        char b[4];
        std::memcpy(b, &f, 4);
        out.append(b, 4);
    }
    return out;
}

inline TrainedModel parse_model(std::string_view bytes) {
    auto read_u32 = [&bytes](std::size_t at) {
        if (bytes.size() < at + 4) fail(ErrorKind::length, "truncated model file at byte offset " + std::to_string(at));
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + at, 4);
        return v;
    };
    if (bytes.substr(0, 4) != "SMLP") fail(ErrorKind::format, "bad magic, expected 'SMLP'");
    if (read_u32(4) != 1) fail(ErrorKind::format, "unsupported model file version");
    const std::uint32_t len = read_u32(8);
    if (bytes.size() < 12 + len) fail(ErrorKind::length, "truncated model manifest");
    TrainedModel m;
    try {
        const auto j = nlohmann::json::parse(bytes.substr(12, len));
        NetworkSpec spec;
        spec.input_dim = j.at("spec").at("input_dim").get<std::size_t>();
        const auto hidden = j.at("spec").at("hidden_dims").get<std::vector<std::size_t>>();
        if (hidden.size() != 3) fail(ErrorKind::format, "model must have three hidden layers");
        spec.hidden_dims = {hidden[0], hidden[1], hidden[2]};
        m.network = Network(spec);
        m.feature = j.at("feature").get<std::string>();
        m.layer = j.at("layer").get<std::size_t>();
        m.final_loss = j.at("final_loss").get<double>();
        m.model_id = j.at("model_id").get<std::string>();
        m.pooling = j.at("pooling").get<std::string>();
        m.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
        m.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("bad model manifest: ") + e.what());
    }
    const std::size_t n = m.network.parameter_count();
    const std::size_t at = 12 + len;
    if (bytes.size() != at + 4 * n)
        fail(ErrorKind::length, "model payload has " + std::to_string(bytes.size() - at) + " bytes, expected " +
                                    std::to_string(4 * n));
    for (std::size_t i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + at + 4 * i, 4);
        m.network.params()[i] = f;
    }
    return m;
}

inline void write_model(const TrainedModel& m, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(m));
}

inline TrainedModel read_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

} // namespace semfeat
