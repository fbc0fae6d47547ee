#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockscramble/adaptnet.hpp"
#include "blockscramble/core.hpp"
#include "blockscramble/losses.hpp"

namespace blockscramble {

struct ModelConfig {
    std::optional<AdaptMode> adapt = AdaptMode::ELE; // nullopt: classifier sees the image directly
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t block_size = 4;
    std::size_t feature_channels = 3;
    bool nibble_input = true;
    std::size_t num_classes = 10;
    std::size_t conv1_channels = 16;
    std::size_t conv2_channels = 32;
    // Uniform noise half-width added to the identity-like sub-network kernels.
    double subnet_init_noise = 0.01;

    std::size_t in_channels() const noexcept { return nibble_input ? 6 : 3; }
    std::size_t head_input_channels() const noexcept { return adapt ? feature_channels : 3; }
    std::size_t flat_features() const noexcept { return (height / 4) * (width / 4) * conv2_channels; }
    void validate() const;
};

// Small CNN standing in for the large classification network:
// conv3x3 -> ReLU -> maxpool2 -> conv3x3 -> ReLU -> maxpool2 -> linear -> softmax.
struct HeadParams {
    std::vector<double> conv1_weight; // [F1][3][3][C]
    std::vector<double> conv1_bias;
    std::vector<double> conv2_weight; // [F2][3][3][F1]
    std::vector<double> conv2_bias;
    std::vector<double> fc_weight; // [K][(H/4)(W/4)F2]
    std::vector<double> fc_bias;
};

struct TensorSlot {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<double> values;
};

struct ConstTensorSlot {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<const double> values;
};

// Everything one forward pass keeps for its backward pass.
struct ForwardCache {
    bool valid = false;
    std::vector<double> blocks;   // N x L sub-network inputs
    std::vector<double> features; // N x D sub-network outputs
    FeatureMap feature_map;       // adaptation output (classifier input)
    std::vector<double> cols1, act1, pool1;
    std::vector<std::size_t> arg1;
    std::vector<double> cols2, act2, pool2;
    std::vector<std::size_t> arg2;
    std::vector<double> logits;
    std::vector<double> probs;
};

class Model {
public:
    Model() = default;
    // All-zero parameters with the shapes implied by cfg (U = identity in ELE mode).
    explicit Model(ModelConfig cfg);

    // Deterministic random initialisation from a 64-bit seed.
    static Model initialize(const ModelConfig& cfg, std::uint64_t seed);
    Model zeros_like() const;

    const ModelConfig& config() const noexcept { return cfg_; }
    const std::optional<AdaptNetParams>& adapt() const noexcept { return adapt_; }
    std::optional<AdaptNetParams>& adapt() noexcept { return adapt_; }
    const HeadParams& head() const noexcept { return head_; }
    HeadParams& head() noexcept { return head_; }

    std::vector<TensorSlot> slots();
    std::vector<ConstTensorSlot> slots() const;
    std::size_t parameter_count() const;
    void set_zero();
    void add(const Model& other);

    ForwardCache forward(const Image8& img) const;
    // grad_feature_map is an extra gradient on the adaptation output (the
    // smoothness term); pass an empty span when there is none.
    void backward(const ForwardCache& cache, std::span<const double> grad_logits,
                  std::span<const double> grad_feature_map, Model& grads) const;

private:
    ModelConfig cfg_;
    std::optional<AdaptNetParams> adapt_;
    HeadParams head_;
};

// Number of gradient partial sums per batch. Fixed so the reduction order,
// and hence every result bit, is independent of the worker count.
inline constexpr std::size_t kGradientChunks = 8;

struct BatchResult {
    LossBreakdown loss;
    std::size_t correct = 0;
    std::size_t count = 0;
    bool ce_clamped = false;
};

class BatchEngine {
public:
    explicit BatchEngine(const Model& model);

    // total = CE + lambda_u * L_U + lambda_s * L_s over the batch.
    // Gradients (when requested) land in `grads`, overwriting its contents.
    BatchResult run(const Model& model, std::span<const LabeledExample* const> batch,
                    double lambda_u, double lambda_s, Model* grads);

private:
    std::vector<Model> partials_;
};

struct Prediction {
    std::size_t label = 0;
    std::vector<double> posterior;
};

std::vector<Prediction> predict(const Model& model, std::span<const LabeledExample> data);

} // namespace blockscramble
