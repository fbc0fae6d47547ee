#include "blockscramble/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "blockscramble/kernels.hpp"
#include "blockscramble/keying.hpp"

namespace blockscramble {

namespace {

void fill_uniform(std::span<double> values, SubkeyStream& stream, double half_width) {
    for (double& v : values) v = (2.0 * stream.uniform_real() - 1.0) * half_width;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

} // namespace

void ModelConfig::validate() const {
    if (height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0)
        throw DimensionError("model: image size " + std::to_string(height) + "x" +
                             std::to_string(width) + " must be a positive multiple of 4");
    if (num_classes < 2) throw DimensionError("model: need at least 2 classes");
    if (conv1_channels == 0 || conv2_channels == 0 || feature_channels == 0)
        throw DimensionError("model: channel counts must be positive");
    if (adapt && (block_size == 0 || height % block_size != 0 || width % block_size != 0))
        throw DimensionError("model: image size " + std::to_string(height) + "x" +
                             std::to_string(width) + " is not divisible by block size " +
                             std::to_string(block_size));
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.adapt)
        adapt_.emplace(*cfg_.adapt, cfg_.block_size, cfg_.in_channels(), cfg_.feature_channels,
                       cfg_.height / cfg_.block_size, cfg_.width / cfg_.block_size);
    const std::size_t c = cfg_.head_input_channels();
    head_.conv1_weight.assign(cfg_.conv1_channels * 9 * c, 0.0);
    head_.conv1_bias.assign(cfg_.conv1_channels, 0.0);
    head_.conv2_weight.assign(cfg_.conv2_channels * 9 * cfg_.conv1_channels, 0.0);
    head_.conv2_bias.assign(cfg_.conv2_channels, 0.0);
    head_.fc_weight.assign(cfg_.num_classes * cfg_.flat_features(), 0.0);
    head_.fc_bias.assign(cfg_.num_classes, 0.0);
}

Model Model::initialize(const ModelConfig& cfg, std::uint64_t seed) {
    Model model(cfg);
    const Seed256 root = seed_from_u64(seed);

    if (model.adapt_) {
        AdaptNetParams& a = *model.adapt_;
        SubkeyStream noise = derive(root, "init/adapt.kernel", 0);
        fill_uniform(a.kernel, noise, cfg.subnet_init_noise);
        // Identity-like start: output (channel c, offset dh, dw) reads input
        // pixel (dh, dw), channel c. With nibble input the two halves are
        // weighted 16/17 and 1/17, which reproduces v/255 - 0.5 exactly.
        const std::size_t B = a.block_size;
        const std::size_t L = a.block_length();
        for (std::size_t s = 0; s < a.sets(); ++s)
            for (std::size_t c = 0; c < a.feature_channels; ++c)
                for (std::size_t dh = 0; dh < B; ++dh)
                    for (std::size_t dw = 0; dw < B; ++dw) {
                        const std::size_t d = c * B * B + dh * B + dw;
                        const std::size_t src_c = c % 3;
                        double* row = &a.kernel[(s * a.depth() + d) * L + (dh * B + dw) * a.in_channels];
                        if (cfg.nibble_input) {
                            row[2 * src_c] += 16.0 / 17.0;
                            row[2 * src_c + 1] += 1.0 / 17.0;
                        } else {
                            row[src_c] += 1.0;
                        }
                    }
        if (a.mode == AdaptMode::ELE) {
            // Dense start, like a fully connected layer: U[-1/sqrt(N), 1/sqrt(N)].
            SubkeyStream u_noise = derive(root, "init/adapt.U", 0);
            fill_uniform(a.u.entries, u_noise, 1.0 / std::sqrt(static_cast<double>(a.u.n)));
        }
    }

    HeadParams& h = model.head_;
    const std::size_t c = cfg.head_input_channels();
    SubkeyStream s1 = derive(root, "init/head.conv1.weight", 0);
    fill_uniform(h.conv1_weight, s1, std::sqrt(6.0 / static_cast<double>(9 * c)));
    SubkeyStream s2 = derive(root, "init/head.conv2.weight", 0);
    fill_uniform(h.conv2_weight, s2, std::sqrt(6.0 / static_cast<double>(9 * cfg.conv1_channels)));
    SubkeyStream s3 = derive(root, "init/head.fc.weight", 0);
    fill_uniform(h.fc_weight, s3, std::sqrt(1.0 / static_cast<double>(cfg.flat_features())));
    return model;
}

Model Model::zeros_like() const {
    Model z = *this;
    z.set_zero();
    return z;
}

std::vector<TensorSlot> Model::slots() {
    std::vector<TensorSlot> out;
    const std::size_t c = cfg_.head_input_channels();
    if (adapt_) {
        AdaptNetParams& a = *adapt_;
        out.push_back({"adapt.kernel", {a.sets(), a.depth(), a.block_length()}, a.kernel});
        out.push_back({"adapt.bias", {a.sets(), a.depth()}, a.bias});
        if (a.mode == AdaptMode::ELE) out.push_back({"adapt.U", {a.u.n, a.u.n}, a.u.entries});
    }
    out.push_back({"head.conv1.weight", {cfg_.conv1_channels, 3, 3, c}, head_.conv1_weight});
    out.push_back({"head.conv1.bias", {cfg_.conv1_channels}, head_.conv1_bias});
    out.push_back({"head.conv2.weight", {cfg_.conv2_channels, 3, 3, cfg_.conv1_channels},
                   head_.conv2_weight});
    out.push_back({"head.conv2.bias", {cfg_.conv2_channels}, head_.conv2_bias});
    out.push_back({"head.fc.weight", {cfg_.num_classes, cfg_.flat_features()}, head_.fc_weight});
    out.push_back({"head.fc.bias", {cfg_.num_classes}, head_.fc_bias});
    return out;
}

std::vector<ConstTensorSlot> Model::slots() const {
    std::vector<ConstTensorSlot> out;
    for (auto& s : const_cast<Model*>(this)->slots())
        out.push_back({std::move(s.name), std::move(s.shape), s.values});
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : slots()) n += s.values.size();
    return n;
}

void Model::set_zero() {
    for (auto& s : slots()) std::fill(s.values.begin(), s.values.end(), 0.0);
}

void Model::add(const Model& other) {
    auto mine = slots();
    const auto theirs = other.slots();
    if (mine.size() != theirs.size()) throw DimensionError("Model::add: layouts differ");
    for (std::size_t t = 0; t < mine.size(); ++t) {
        if (mine[t].values.size() != theirs[t].values.size())
            throw DimensionError("Model::add: tensor '" + mine[t].name + "' differs in size");
        for (std::size_t i = 0; i < mine[t].values.size(); ++i)
            mine[t].values[i] += theirs[t].values[i];
    }
}

ForwardCache Model::forward(const Image8& img) const {
    if (img.height() != cfg_.height || img.width() != cfg_.width || img.channels() != 3)
        throw DimensionError("model expects " + std::to_string(cfg_.height) + "x" +
                             std::to_string(cfg_.width) + "x3 images, got " +
                             std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                             "x" + std::to_string(img.channels()));
    ForwardCache fc;
    if (adapt_) {
        const AdaptNetParams& a = *adapt_;
        const FeatureMap input = encode_input(img, cfg_.nibble_input);
        fc.blocks = gather_blocks(input, a.block_size);
        fc.features.assign(a.blocks() * a.depth(), 0.0);
        kernels::subnet_forward(fc.blocks, a.blocks(), a.block_length(), a.kernel, a.bias,
                                a.sets(), a.depth(), fc.features);
        std::vector<double> mixed;
        std::span<const double> grid = fc.features;
        if (a.mode == AdaptMode::ELE) {
            mixed.assign(fc.features.size(), 0.0);
            kernels::perm_apply(a.u.entries, a.blocks(), fc.features, a.depth(), mixed);
            grid = mixed;
        }
        fc.feature_map = FeatureMap(cfg_.height, cfg_.width, a.feature_channels);
        kernels::pixel_shuffle(grid, a.rows, a.cols, a.feature_channels, a.block_size,
                               fc.feature_map.data);
    } else {
        fc.feature_map = encode_input(img, false);
    }

    const std::size_t H = cfg_.height, W = cfg_.width;
    const std::size_t C = cfg_.head_input_channels();
    const std::size_t F1 = cfg_.conv1_channels, F2 = cfg_.conv2_channels;

    fc.cols1.resize(H * W * 9 * C);
    kernels::im2col3x3(fc.feature_map.data, H, W, C, fc.cols1);
    fc.act1.resize(H * W * F1);
    kernels::conv3x3_forward(fc.cols1, H, W, C, head_.conv1_weight, head_.conv1_bias, F1, fc.act1);
    kernels::relu_forward(fc.act1);
    fc.pool1.resize((H / 2) * (W / 2) * F1);
    fc.arg1.resize(fc.pool1.size());
    kernels::maxpool2_forward(fc.act1, H, W, F1, fc.pool1, fc.arg1);

    const std::size_t H2 = H / 2, W2 = W / 2;
    fc.cols2.resize(H2 * W2 * 9 * F1);
    kernels::im2col3x3(fc.pool1, H2, W2, F1, fc.cols2);
    fc.act2.resize(H2 * W2 * F2);
    kernels::conv3x3_forward(fc.cols2, H2, W2, F1, head_.conv2_weight, head_.conv2_bias, F2,
                             fc.act2);
    kernels::relu_forward(fc.act2);
    fc.pool2.resize((H2 / 2) * (W2 / 2) * F2);
    fc.arg2.resize(fc.pool2.size());
    kernels::maxpool2_forward(fc.act2, H2, W2, F2, fc.pool2, fc.arg2);

    fc.logits.resize(cfg_.num_classes);
    kernels::linear_forward(fc.pool2, head_.fc_weight, head_.fc_bias, cfg_.num_classes, fc.logits);
    fc.probs = softmax(fc.logits);
    fc.valid = true;
    return fc;
}

void Model::backward(const ForwardCache& fc, std::span<const double> grad_logits,
                     std::span<const double> grad_feature_map, Model& grads) const {
    if (!fc.valid) throw StateError("backward called without a completed forward pass");
    if (grad_logits.size() != cfg_.num_classes)
        throw DimensionError("backward: logit gradient has wrong length");

    const std::size_t H = cfg_.height, W = cfg_.width;
    const std::size_t C = cfg_.head_input_channels();
    const std::size_t F1 = cfg_.conv1_channels, F2 = cfg_.conv2_channels;
    const std::size_t H2 = H / 2, W2 = W / 2;
    HeadParams& gh = grads.head_;

    std::vector<double> d_pool2(fc.pool2.size(), 0.0);
    kernels::linear_backward(fc.pool2, head_.fc_weight, cfg_.num_classes, grad_logits,
                             gh.fc_weight, gh.fc_bias, d_pool2);

    std::vector<double> d_act2(fc.act2.size(), 0.0);
    kernels::maxpool2_backward(fc.arg2, d_pool2, d_act2);
    kernels::relu_backward(fc.act2, d_act2);
    std::vector<double> d_pool1(fc.pool1.size(), 0.0);
    kernels::conv3x3_backward(fc.cols2, H2, W2, F1, head_.conv2_weight, F2, d_act2,
                              gh.conv2_weight, gh.conv2_bias, d_pool1);

    std::vector<double> d_act1(fc.act1.size(), 0.0);
    kernels::maxpool2_backward(fc.arg1, d_pool1, d_act1);
    kernels::relu_backward(fc.act1, d_act1);

    if (!adapt_) {
        kernels::conv3x3_backward(fc.cols1, H, W, C, head_.conv1_weight, F1, d_act1,
                                  gh.conv1_weight, gh.conv1_bias, {});
        return;
    }

    std::vector<double> d_map(fc.feature_map.data.size(), 0.0);
    kernels::conv3x3_backward(fc.cols1, H, W, C, head_.conv1_weight, F1, d_act1, gh.conv1_weight,
                              gh.conv1_bias, d_map);
    if (!grad_feature_map.empty()) {
        if (grad_feature_map.size() != d_map.size())
            throw DimensionError("backward: feature-map gradient has wrong length");
        for (std::size_t i = 0; i < d_map.size(); ++i) d_map[i] += grad_feature_map[i];
    }

    const AdaptNetParams& a = *adapt_;
    AdaptNetParams& ga = *grads.adapt_;
    std::vector<double> d_grid(a.blocks() * a.depth(), 0.0);
    kernels::pixel_unshuffle(d_map, a.rows, a.cols, a.feature_channels, a.block_size, d_grid);

    std::vector<double> d_features;
    if (a.mode == AdaptMode::ELE) {
        d_features.assign(d_grid.size(), 0.0);
        kernels::perm_backward(a.u.entries, a.blocks(), fc.features, a.depth(), d_grid,
                               ga.u.entries, d_features);
    } else {
        d_features = std::move(d_grid);
    }
    kernels::subnet_backward(fc.blocks, a.blocks(), a.block_length(), d_features, a.sets(),
                             a.depth(), ga.kernel, ga.bias);
}

BatchEngine::BatchEngine(const Model& model) {
    partials_.reserve(kGradientChunks);
    for (std::size_t i = 0; i < kGradientChunks; ++i) partials_.push_back(model.zeros_like());
}

BatchResult BatchEngine::run(const Model& model, std::span<const LabeledExample* const> batch,
                             double lambda_u, double lambda_s, Model* grads) {
    const std::size_t m = batch.size();
    if (m == 0) throw DomainError("batch is empty");
    const std::size_t K = model.config().num_classes;
    const bool adapt = model.adapt().has_value();
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<double> ce(m, 0.0), smooth(m, 0.0);
    std::vector<unsigned char> correct(m, 0), clamped(m, 0);
    std::vector<std::exception_ptr> failure(kGradientChunks);
    const std::size_t chunks = std::min(kGradientChunks, m);

#pragma omp parallel for schedule(static, 1)
    for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(chunks); ++ci) {
        const auto chunk = static_cast<std::size_t>(ci);
        try {
            Model& partial = partials_[chunk];
            if (grads) partial.set_zero();
            const std::size_t begin = chunk * m / chunks;
            const std::size_t end = (chunk + 1) * m / chunks;
            for (std::size_t i = begin; i < end; ++i) {
                const LabeledExample& ex = *batch[i];
                check_label(ex, K);
                const ForwardCache fc = model.forward(ex.image);
                double p = fc.probs[ex.label];
                if (p < kProbabilityFloor) {
                    p = kProbabilityFloor;
                    clamped[i] = 1;
                }
                ce[i] = -std::log(p);
                correct[i] = argmax(fc.probs) == ex.label;
                if (adapt) smooth[i] = smoothness(fc.feature_map);
                if (!grads) continue;

                std::vector<double> d_logits(K);
                for (std::size_t k = 0; k < K; ++k)
                    d_logits[k] = (fc.probs[k] - (k == ex.label ? 1.0 : 0.0)) * inv_m;
                std::vector<double> d_map;
                if (adapt && lambda_s != 0.0) {
                    d_map.assign(fc.feature_map.data.size(), 0.0);
                    smoothness_gradient(fc.feature_map, lambda_s * inv_m, d_map);
                }
                model.backward(fc, d_logits, d_map, partial);
            }
        } catch (...) {
            failure[chunk] = std::current_exception();
        }
    }
    for (const auto& f : failure)
        if (f) std::rethrow_exception(f);

    BatchResult result;
    result.count = m;
    double ce_sum = 0.0, s_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        ce_sum += ce[i];
        s_sum += smooth[i];
        result.correct += correct[i];
        result.ce_clamped = result.ce_clamped || clamped[i];
    }
    double u_pen = 0.0;
    const bool has_u = adapt && model.adapt()->mode == AdaptMode::ELE;
    if (has_u) u_pen = loss_u(model.adapt()->u);
    result.loss = loss_total(ce_sum * inv_m, u_pen, s_sum * inv_m, lambda_u, lambda_s);

    if (grads) {
        grads->set_zero();
        for (std::size_t c = 0; c < chunks; ++c) grads->add(partials_[c]);
        if (has_u && lambda_u != 0.0)
            loss_u_gradient(model.adapt()->u.entries, model.adapt()->u.n, lambda_u,
                            grads->adapt()->u.entries);
    }
    return result;
}

std::vector<Prediction> predict(const Model& model, std::span<const LabeledExample> data) {
    std::vector<Prediction> out(data.size());
    std::vector<std::exception_ptr> failure(data.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(data.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            const ForwardCache fc = model.forward(data[i].image);
            out[i].label = argmax(fc.probs);
            out[i].posterior = fc.probs;
        } catch (...) {
            failure[i] = std::current_exception();
        }
    }
    for (const auto& f : failure)
        if (f) std::rethrow_exception(f);
    return out;
}

} // namespace blockscramble
