#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfl {

// Row-major n_samples x dim features with class labels in [0, classes).
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t dim, std::size_t classes, std::vector<double> features, std::vector<std::uint32_t> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t classes() const noexcept { return classes_; }
    bool empty() const noexcept { return labels_.empty(); }

    std::span<const double> row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
    std::uint32_t label(std::size_t i) const { return labels_[i]; }
    const std::vector<double>& features() const noexcept { return features_; }
    const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }

    Dataset subset(std::span<const std::size_t> indices) const;
    std::vector<std::size_t> class_counts() const;

private:
    std::size_t dim_ = 0;
    std::size_t classes_ = 0;
    std::vector<double> features_;
    std::vector<std::uint32_t> labels_;
};

struct Shapes {
    std::size_t input = 0;
    std::size_t hidden = 50;
    std::size_t classes = 0;

    std::size_t param_count() const noexcept { return input * hidden + hidden + hidden * classes + classes; }
    bool operator==(const Shapes&) const = default;
};

// One sigmoid hidden layer, softmax output. theta layout:
//   W1 (hidden x input, row-major) | b1 (hidden) | W2 (classes x hidden) | b2 (classes)
struct ModelParams {
    Shapes shapes;
    std::vector<double> theta;

    ModelParams() = default;
    ModelParams(Shapes s, std::vector<double> t);
    static ModelParams zeros(Shapes s) { return ModelParams(s, std::vector<double>(s.param_count(), 0.0)); }
};

struct TrainConfig {
    double lr = 0.1;
    std::size_t local_steps = 1;

    void validate() const;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Uniform in +/- 1/sqrt(fan_in) per layer, biases included.
ModelParams init_params(std::uint64_t seed, Shapes shapes);

double loss(const ModelParams& p, const Dataset& d);
std::vector<double> grad(const ModelParams& p, const Dataset& d);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};
LossGrad loss_and_grad(const ModelParams& p, const Dataset& d);

// Full-batch gradient descent, local_steps times. Throws DivergenceError when
// the loss or the parameters become non-finite.
ModelParams gd_steps(const ModelParams& p, const Dataset& d, const TrainConfig& cfg);

// Ties in argmax go to the lowest class index.
double accuracy(const ModelParams& p, const Dataset& d);
std::vector<std::uint32_t> predict(const ModelParams& p, const Dataset& d);

struct SynthSpec {
    std::uint64_t seed = 1;
    std::size_t n_per_device = 500;
    std::size_t n_devices = 6;
    std::size_t dim = 16;
    std::size_t classes = 10;
    std::size_t shards_per_device = 2;  // == classes gives an IID split
    double separation = 0.0;            // class means at separation * e_k; 0 selects 4 * sqrt(dim)
    std::size_t test_samples = 1000;
};

struct FederatedData {
    std::vector<Dataset> devices;
    Dataset test;
};

// Unit-covariance Gaussian blobs. Device i draws its samples round-robin from
// labels {(i * s + t) mod K : t < s}.
FederatedData synth_data(const SynthSpec& spec);

// Partition an existing pool into per-device shards the same way synth_data
// assigns labels. Samples are taken in pool order without replacement.
std::vector<Dataset> partition_by_label(const Dataset& pool, std::size_t n_devices, std::size_t n_per_device,
                                        std::size_t shards_per_device);

class IdxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

struct IdxImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

// MNIST-style pair; pixels scaled by 1/255, ten classes.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

}  // namespace cfl
