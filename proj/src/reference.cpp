// Straight transcriptions of the kernel formulas, single-threaded. Kept as the
// oracle for the optimized kernels and as the benchmark baseline.
#include "blockscramble/kernels.hpp"

namespace blockscramble::reference {

void subnet_forward(std::span<const double> x, std::size_t n, std::size_t len,
                    std::span<const double> weight, std::span<const double> bias, std::size_t sets,
                    std::size_t depth, std::span<double> out) {
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t s = sets == 1 ? 0 : b;
        for (std::size_t d = 0; d < depth; ++d) {
            double acc = bias[s * depth + d];
            for (std::size_t l = 0; l < len; ++l)
                acc += weight[(s * depth + d) * len + l] * x[b * len + l];
            out[b * depth + d] = acc;
        }
    }
}

void subnet_backward(std::span<const double> x, std::size_t n, std::size_t len,
                     std::span<const double> grad_out, std::size_t sets, std::size_t depth,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t s = sets == 1 ? 0 : b;
        for (std::size_t d = 0; d < depth; ++d) {
            grad_bias[s * depth + d] += grad_out[b * depth + d];
            for (std::size_t l = 0; l < len; ++l)
                grad_weight[(s * depth + d) * len + l] += grad_out[b * depth + d] * x[b * len + l];
        }
    }
}

void perm_apply(std::span<const double> u, std::size_t n, std::span<const double> f,
                std::size_t depth, std::span<double> out) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < depth; ++d) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += u[i * n + j] * f[j * depth + d];
            out[i * depth + d] = acc;
        }
}

void perm_backward(std::span<const double> u, std::size_t n, std::span<const double> f,
                   std::size_t depth, std::span<const double> grad_out, std::span<double> grad_u,
                   std::span<double> grad_f) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t d = 0; d < depth; ++d) {
                grad_u[i * n + j] += grad_out[i * depth + d] * f[j * depth + d];
                grad_f[j * depth + d] += u[i * n + j] * grad_out[i * depth + d];
            }
}

void conv3x3_forward(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
                     std::span<const double> weight, std::span<const double> bias,
                     std::size_t out_channels, std::span<double> out) {
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t o = 0; o < out_channels; ++o) {
                double acc = bias[o];
                for (std::size_t ky = 0; ky < 3; ++ky)
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const long sy = static_cast<long>(y + ky) - 1;
                        const long sx = static_cast<long>(x + kx) - 1;
                        if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) ||
                            sx >= static_cast<long>(w))
                            continue;
                        for (std::size_t ch = 0; ch < c; ++ch)
                            acc += weight[((o * 3 + ky) * 3 + kx) * c + ch] *
                                   in[(static_cast<std::size_t>(sy) * w +
                                       static_cast<std::size_t>(sx)) * c + ch];
                    }
                out[(y * w + x) * out_channels + o] = acc;
            }
}

void conv3x3_backward(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
                      std::span<const double> weight, std::size_t out_channels,
                      std::span<const double> grad_out, std::span<double> grad_weight,
                      std::span<double> grad_bias, std::span<double> grad_in) {
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t o = 0; o < out_channels; ++o) {
                const double g = grad_out[(y * w + x) * out_channels + o];
                grad_bias[o] += g;
                for (std::size_t ky = 0; ky < 3; ++ky)
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const long sy = static_cast<long>(y + ky) - 1;
                        const long sx = static_cast<long>(x + kx) - 1;
                        if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) ||
                            sx >= static_cast<long>(w))
                            continue;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            const std::size_t wi = ((o * 3 + ky) * 3 + kx) * c + ch;
                            const std::size_t ii = (static_cast<std::size_t>(sy) * w +
                                                    static_cast<std::size_t>(sx)) * c + ch;
                            grad_weight[wi] += g * in[ii];
                            if (!grad_in.empty()) grad_in[ii] += g * weight[wi];
                        }
                    }
            }
}

} // namespace blockscramble::reference
