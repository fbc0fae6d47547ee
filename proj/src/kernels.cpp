#include "blockscramble/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace blockscramble::kernels {

namespace {

inline double dot(const double* a, const double* b, std::size_t len) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
    return acc;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

} // namespace

void subnet_forward(std::span<const double> x, std::size_t n, std::size_t len,
                    std::span<const double> weight, std::span<const double> bias, std::size_t sets,
                    std::size_t depth, std::span<double> out) {
    const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t bi = 0; bi < count; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const std::size_t s = sets == 1 ? 0 : b;
        const double* xb = &x[b * len];
        for (std::size_t d = 0; d < depth; ++d)
            out[b * depth + d] = bias[s * depth + d] + dot(&weight[(s * depth + d) * len], xb, len);
    }
}

void subnet_backward(std::span<const double> x, std::size_t n, std::size_t len,
                     std::span<const double> grad_out, std::size_t sets, std::size_t depth,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
    if (sets == 1) {
        // Shared parameters: each output row d is owned by one thread and
        // accumulates over blocks in index order.
        const std::int64_t rows = static_cast<std::int64_t>(depth);
#pragma omp parallel for schedule(static)
        for (std::int64_t di = 0; di < rows; ++di) {
            const auto d = static_cast<std::size_t>(di);
            double* gw = &grad_weight[d * len];
            for (std::size_t b = 0; b < n; ++b) {
                const double g = grad_out[b * depth + d];
                grad_bias[d] += g;
                axpy(g, &x[b * len], gw, len);
            }
        }
        return;
    }
    const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t bi = 0; bi < count; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const double* xb = &x[b * len];
        for (std::size_t d = 0; d < depth; ++d) {
            const double g = grad_out[b * depth + d];
            grad_bias[b * depth + d] += g;
            axpy(g, xb, &grad_weight[(b * depth + d) * len], len);
        }
    }
}

void perm_apply(std::span<const double> u, std::size_t n, std::span<const double> f,
                std::size_t depth, std::span<double> out) {
    const std::int64_t rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* row = &out[i * depth];
        std::fill(row, row + depth, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double uij = u[i * n + j];
            if (uij != 0.0) axpy(uij, &f[j * depth], row, depth);
        }
    }
}

void perm_backward(std::span<const double> u, std::size_t n, std::span<const double> f,
                   std::size_t depth, std::span<const double> grad_out, std::span<double> grad_u,
                   std::span<double> grad_f) {
    const std::int64_t rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < n; ++j)
            grad_u[i * n + j] += dot(&grad_out[i * depth], &f[j * depth], depth);
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t jj = 0; jj < rows; ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        double* gf = &grad_f[j * depth];
        for (std::size_t i = 0; i < n; ++i) axpy(u[i * n + j], &grad_out[i * depth], gf, depth);
    }
}

void im2col3x3(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
               std::span<double> cols) {
    const std::size_t k = 9 * c;
    const std::int64_t height = static_cast<std::int64_t>(h);
#pragma omp parallel for schedule(static)
    for (std::int64_t yi = 0; yi < height; ++yi) {
        const auto y = static_cast<std::size_t>(yi);
        for (std::size_t x = 0; x < w; ++x) {
            double* row = &cols[(y * w + x) * k];
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    double* dst = row + (ky * 3 + kx) * c;
                    const std::size_t sy = y + ky; // shifted by the padding of 1
                    const std::size_t sx = x + kx;
                    if (sy < 1 || sy > h || sx < 1 || sx > w) {
                        std::fill(dst, dst + c, 0.0);
                    } else {
                        const double* src = &in[((sy - 1) * w + (sx - 1)) * c];
                        std::copy(src, src + c, dst);
                    }
                }
            }
        }
    }
}

void conv3x3_forward(std::span<const double> cols, std::size_t h, std::size_t w, std::size_t c,
                     std::span<const double> weight, std::span<const double> bias,
                     std::size_t out_channels, std::span<double> out) {
    const std::size_t k = 9 * c;
    const std::int64_t pixels = static_cast<std::int64_t>(h * w);
#pragma omp parallel for schedule(static)
    for (std::int64_t pi = 0; pi < pixels; ++pi) {
        const auto p = static_cast<std::size_t>(pi);
        const double* row = &cols[p * k];
        for (std::size_t o = 0; o < out_channels; ++o)
            out[p * out_channels + o] = bias[o] + dot(&weight[o * k], row, k);
    }
}

void conv3x3_backward(std::span<const double> cols, std::size_t h, std::size_t w, std::size_t c,
                      std::span<const double> weight, std::size_t out_channels,
                      std::span<const double> grad_out, std::span<double> grad_weight,
                      std::span<double> grad_bias, std::span<double> grad_in) {
    const std::size_t k = 9 * c;
    const std::size_t pixels = h * w;
    const std::int64_t outs = static_cast<std::int64_t>(out_channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t oi = 0; oi < outs; ++oi) {
        const auto o = static_cast<std::size_t>(oi);
        double* gw = &grad_weight[o * k];
        double gb = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) {
            const double g = grad_out[p * out_channels + o];
            gb += g;
            axpy(g, &cols[p * k], gw, k);
        }
        grad_bias[o] += gb;
    }
    if (grad_in.empty()) return;

    // Gather form: input pixel (y, x) receives from every output pixel whose
    // 3x3 window covers it, so rows can be processed independently.
    const std::int64_t height = static_cast<std::int64_t>(h);
#pragma omp parallel for schedule(static)
    for (std::int64_t yi = 0; yi < height; ++yi) {
        const auto y = static_cast<std::size_t>(yi);
        for (std::size_t x = 0; x < w; ++x) {
            double* gi = &grad_in[(y * w + x) * c];
            for (std::size_t ky = 0; ky < 3; ++ky) {
                // output row oy uses input row oy + ky - 1
                if (y + 1 < ky || y + 1 - ky >= h) continue;
                const std::size_t oy = y + 1 - ky;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    if (x + 1 < kx || x + 1 - kx >= w) continue;
                    const std::size_t ox = x + 1 - kx;
                    const double* go = &grad_out[(oy * w + ox) * out_channels];
                    for (std::size_t o = 0; o < out_channels; ++o)
                        axpy(go[o], &weight[o * k + (ky * 3 + kx) * c], gi, c);
                }
            }
        }
    }
}

void relu_forward(std::span<double> values) {
    for (double& v : values) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> activated, std::span<double> grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (activated[i] <= 0.0) grad[i] = 0.0;
}

void maxpool2_forward(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
                      std::span<double> out, std::span<std::size_t> argmax) {
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                std::size_t best = ((2 * y) * w + 2 * x) * c + ch;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
                        if (in[idx] > in[best]) best = idx;
                    }
                const std::size_t o = (y * ow + x) * c + ch;
                out[o] = in[best];
                argmax[o] = best;
            }
        }
    }
}

void maxpool2_backward(std::span<const std::size_t> argmax, std::span<const double> grad_out,
                       std::span<double> grad_in) {
    for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[argmax[o]] += grad_out[o];
}

void linear_forward(std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::size_t out_size, std::span<double> out) {
    const std::size_t len = in.size();
    for (std::size_t k = 0; k < out_size; ++k)
        out[k] = bias[k] + dot(&weight[k * len], in.data(), len);
}

void linear_backward(std::span<const double> in, std::span<const double> weight,
                     std::size_t out_size, std::span<const double> grad_out,
                     std::span<double> grad_weight, std::span<double> grad_bias,
                     std::span<double> grad_in) {
    const std::size_t len = in.size();
    for (std::size_t k = 0; k < out_size; ++k) {
        grad_bias[k] += grad_out[k];
        axpy(grad_out[k], in.data(), &grad_weight[k * len], len);
        if (!grad_in.empty()) axpy(grad_out[k], &weight[k * len], grad_in.data(), len);
    }
}

void pixel_shuffle(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c_out,
                   std::size_t r, std::span<double> out) {
    const std::size_t c_in = c_out * r * r;
    const std::size_t ow = w * r;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < c_out; ++c)
                for (std::size_t dy = 0; dy < r; ++dy)
                    for (std::size_t dx = 0; dx < r; ++dx)
                        out[((y * r + dy) * ow + x * r + dx) * c_out + c] =
                            in[(y * w + x) * c_in + c * r * r + dy * r + dx];
}

void pixel_unshuffle(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c_out,
                     std::size_t r, std::span<double> out) {
    const std::size_t c_in = c_out * r * r;
    const std::size_t iw = w * r;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < c_out; ++c)
                for (std::size_t dy = 0; dy < r; ++dy)
                    for (std::size_t dx = 0; dx < r; ++dx)
                        out[(y * w + x) * c_in + c * r * r + dy * r + dx] =
                            in[((y * r + dy) * iw + x * r + dx) * c_out + c];
}

} // namespace blockscramble::kernels
