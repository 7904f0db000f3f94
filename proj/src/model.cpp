#include "cfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cfl {

Dataset::Dataset(std::size_t dim, std::size_t classes, std::vector<double> features, std::vector<std::uint32_t> labels)
    : dim_(dim), classes_(classes), features_(std::move(features)), labels_(std::move(labels)) {
    if (features_.size() != labels_.size() * dim_) {
        throw std::invalid_argument("dataset: " + std::to_string(labels_.size()) + " labels but " +
                                    std::to_string(features_.size()) + " feature values for dim " +
                                    std::to_string(dim_));
    }
    for (auto y : labels_) {
        if (y >= classes_) throw std::invalid_argument("dataset: label " + std::to_string(y) + " out of range");
    }
    for (double v : features_) {
        if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite feature");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> f;
    std::vector<std::uint32_t> l;
    f.reserve(indices.size() * dim_);
    l.reserve(indices.size());
    for (std::size_t i : indices) {
        auto r = row(i);
        f.insert(f.end(), r.begin(), r.end());
        l.push_back(labels_.at(i));
    }
    return Dataset(dim_, classes_, std::move(f), std::move(l));
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(classes_, 0);
    for (auto y : labels_) ++counts[y];
    return counts;
}

ModelParams::ModelParams(Shapes s, std::vector<double> t) : shapes(s), theta(std::move(t)) {
    if (theta.size() != shapes.param_count()) {
        throw std::invalid_argument("model params: expected " + std::to_string(shapes.param_count()) +
                                    " values, got " + std::to_string(theta.size()));
    }
}

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be finite and >= 0");
    if (local_steps < 1) throw std::invalid_argument("train: local_steps must be >= 1");
}

ModelParams init_params(std::uint64_t seed, Shapes shapes) {
    if (shapes.input == 0 || shapes.hidden == 0 || shapes.classes == 0) {
        throw std::invalid_argument("init_params: all shape dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<double> theta;
    theta.reserve(shapes.param_count());
    auto fill = [&](std::size_t count, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < count; ++i) theta.push_back(dist(rng));
    };
    fill(shapes.hidden * shapes.input + shapes.hidden, shapes.input);
    fill(shapes.classes * shapes.hidden + shapes.classes, shapes.hidden);
    return ModelParams(shapes, std::move(theta));
}

namespace {

struct Layout {
    std::size_t w1, b1, w2, b2;
    explicit Layout(const Shapes& s)
        : w1(0), b1(s.hidden * s.input), w2(b1 + s.hidden), b2(w2 + s.classes * s.hidden) {}
};

void check_shapes(const ModelParams& p, const Dataset& d) {
    if (p.theta.size() != p.shapes.param_count()) throw std::invalid_argument("model params length mismatch");
    if (p.shapes.input != d.dim() || p.shapes.classes != d.classes()) {
        throw std::invalid_argument("shape mismatch: model expects " + std::to_string(p.shapes.input) + "x" +
                                    std::to_string(p.shapes.classes) + ", data is " + std::to_string(d.dim()) +
                                    "x" + std::to_string(d.classes()));
    }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Forward pass for one sample. Fills hidden activations and logits.
void forward(const ModelParams& p, const Layout& lay, std::span<const double> x, std::vector<double>& hidden,
             std::vector<double>& logits) {
    const auto& s = p.shapes;
    const double* th = p.theta.data();
    for (std::size_t j = 0; j < s.hidden; ++j) {
        double z = th[lay.b1 + j];
        const double* w = th + lay.w1 + j * s.input;
        for (std::size_t k = 0; k < s.input; ++k) z += w[k] * x[k];
        hidden[j] = sigmoid(z);
    }
    for (std::size_t c = 0; c < s.classes; ++c) {
        double z = th[lay.b2 + c];
        const double* w = th + lay.w2 + c * s.hidden;
        for (std::size_t j = 0; j < s.hidden; ++j) z += w[j] * hidden[j];
        logits[c] = z;
    }
}

// Overwrites logits with softmax probabilities, returns log-sum-exp.
double softmax_inplace(std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - mx);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return mx + std::log(sum);
}

}  // namespace

LossGrad loss_and_grad(const ModelParams& p, const Dataset& d) {
    check_shapes(p, d);
    if (d.empty()) throw std::invalid_argument("loss on an empty dataset");
    const auto& s = p.shapes;
    const Layout lay(s);
    const double* th = p.theta.data();

    LossGrad out;
    out.grad.assign(p.theta.size(), 0.0);
    double* g = out.grad.data();
    std::vector<double> hidden(s.hidden), probs(s.classes), delta1(s.hidden);
    double total = 0.0;

    for (std::size_t n = 0; n < d.size(); ++n) {
        auto x = d.row(n);
        const std::size_t y = d.label(n);
        forward(p, lay, x, hidden, probs);
        const double logit_y = probs[y];
        total += softmax_inplace(probs) - logit_y;
        probs[y] -= 1.0;  // now dL/dz2

        std::fill(delta1.begin(), delta1.end(), 0.0);
        for (std::size_t c = 0; c < s.classes; ++c) {
            const double dc = probs[c];
            g[lay.b2 + c] += dc;
            double* gw = g + lay.w2 + c * s.hidden;
            const double* w = th + lay.w2 + c * s.hidden;
            for (std::size_t j = 0; j < s.hidden; ++j) {
                gw[j] += dc * hidden[j];
                delta1[j] += w[j] * dc;
            }
        }
        for (std::size_t j = 0; j < s.hidden; ++j) {
            const double dj = delta1[j] * hidden[j] * (1.0 - hidden[j]);
            g[lay.b1 + j] += dj;
            double* gw = g + lay.w1 + j * s.input;
            for (std::size_t k = 0; k < s.input; ++k) gw[k] += dj * x[k];
        }
    }
    const double inv = 1.0 / static_cast<double>(d.size());
    out.loss = total / static_cast<double>(d.size());
    for (double& v : out.grad) v *= inv;
    return out;
}

double loss(const ModelParams& p, const Dataset& d) {
    check_shapes(p, d);
    if (d.empty()) throw std::invalid_argument("loss on an empty dataset");
    const Layout lay(p.shapes);
    std::vector<double> hidden(p.shapes.hidden), logits(p.shapes.classes);
    double total = 0.0;
    for (std::size_t n = 0; n < d.size(); ++n) {
        forward(p, lay, d.row(n), hidden, logits);
        const double logit_y = logits[d.label(n)];
        total += softmax_inplace(logits) - logit_y;
    }
    return total / static_cast<double>(d.size());
}

std::vector<double> grad(const ModelParams& p, const Dataset& d) {
    return loss_and_grad(p, d).grad;
}

ModelParams gd_steps(const ModelParams& p, const Dataset& d, const TrainConfig& cfg) {
    cfg.validate();
    ModelParams cur = p;
    for (std::size_t step = 0; step < cfg.local_steps; ++step) {
        LossGrad lg = loss_and_grad(cur, d);
        if (!std::isfinite(lg.loss)) {
            throw DivergenceError("training diverged: non-finite loss at local step " + std::to_string(step));
        }
        for (std::size_t k = 0; k < cur.theta.size(); ++k) cur.theta[k] -= cfg.lr * lg.grad[k];
    }
    for (double v : cur.theta) {
        if (!std::isfinite(v)) throw DivergenceError("training diverged: non-finite parameters");
    }
    return cur;
}

std::vector<std::uint32_t> predict(const ModelParams& p, const Dataset& d) {
    check_shapes(p, d);
    const Layout lay(p.shapes);
    std::vector<double> hidden(p.shapes.hidden), logits(p.shapes.classes);
    std::vector<std::uint32_t> out(d.size());
    for (std::size_t n = 0; n < d.size(); ++n) {
        forward(p, lay, d.row(n), hidden, logits);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c) {
            if (logits[c] > logits[best]) best = c;
        }
        out[n] = static_cast<std::uint32_t>(best);
    }
    return out;
}

double accuracy(const ModelParams& p, const Dataset& d) {
    if (d.empty()) return 0.0;
    const auto pred = predict(p, d);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < d.size(); ++n) hits += (pred[n] == d.label(n));
    return static_cast<double>(hits) / static_cast<double>(d.size());
}

}  // namespace cfl
