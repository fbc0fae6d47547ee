#pragma once

// Dense numeric kernels behind the adaptation network and classifier head.
//
// Layouts are row-major throughout:
//   block features  X  [N][L]        L = B*B*C_in
//   subnet weights  W  [S][D][L]     S = N (per block) or 1 (shared)
//   subnet bias        [S][D]
//   feature rows    F  [N][D]
//   permutation     U  [N][N]
//   images / maps      [H][W][C]
//   conv weights       [O][3][3][C]  (3x3, stride 1, zero padding 1)
//
// Two implementations exist. `kernels::` is the OpenMP version used by the
// model; every output element is reduced by a single thread in a fixed
// order, so results do not depend on the thread count. `reference::` holds
// direct loop transcriptions of the formulas; tests and the benchmark compare
// the two. Backward kernels accumulate (+=) into gradient buffers.

#include <cstddef>
#include <span>
#include <vector>

namespace blockscramble {

namespace kernels {

void subnet_forward(std::span<const double> x, std::size_t n, std::size_t len,
                    std::span<const double> weight, std::span<const double> bias, std::size_t sets,
                    std::size_t depth, std::span<double> out);

void subnet_backward(std::span<const double> x, std::size_t n, std::size_t len,
                     std::span<const double> grad_out, std::size_t sets, std::size_t depth,
                     std::span<double> grad_weight, std::span<double> grad_bias);

// out = U * F
void perm_apply(std::span<const double> u, std::size_t n, std::span<const double> f,
                std::size_t depth, std::span<double> out);

// grad_u += dG * F^T ; grad_f += U^T * dG
void perm_backward(std::span<const double> u, std::size_t n, std::span<const double> f,
                   std::size_t depth, std::span<const double> grad_out, std::span<double> grad_u,
                   std::span<double> grad_f);

// Patch matrix [H*W][9*C]; row (y, x) holds the zero-padded 3x3 neighbourhood.
void im2col3x3(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
               std::span<double> cols);

void conv3x3_forward(std::span<const double> cols, std::size_t h, std::size_t w, std::size_t c,
                     std::span<const double> weight, std::span<const double> bias,
                     std::size_t out_channels, std::span<double> out);

// grad_in may be empty when the input gradient is not needed.
void conv3x3_backward(std::span<const double> cols, std::size_t h, std::size_t w, std::size_t c,
                      std::span<const double> weight, std::size_t out_channels,
                      std::span<const double> grad_out, std::span<double> grad_weight,
                      std::span<double> grad_bias, std::span<double> grad_in);

void relu_forward(std::span<double> values);
void relu_backward(std::span<const double> activated, std::span<double> grad);

// 2x2 stride-2 max pooling. `argmax` receives the flat input index of each maximum.
void maxpool2_forward(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
                      std::span<double> out, std::span<std::size_t> argmax);
void maxpool2_backward(std::span<const std::size_t> argmax, std::span<const double> grad_out,
                       std::span<double> grad_in);

// out[k] = bias[k] + sum_i weight[k][i] * in[i]
void linear_forward(std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::size_t out_size, std::span<double> out);
void linear_backward(std::span<const double> in, std::span<const double> weight,
                     std::size_t out_size, std::span<const double> grad_out,
                     std::span<double> grad_weight, std::span<double> grad_bias,
                     std::span<double> grad_in);

// out[h*r+dh][w*r+dw][c] = in[h][w][c*r*r + dh*r + dw]
void pixel_shuffle(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c_out,
                   std::size_t r, std::span<double> out);
// Exact inverse rearrangement; also the gradient of pixel_shuffle.
void pixel_unshuffle(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c_out,
                     std::size_t r, std::span<double> out);

} // namespace kernels

namespace reference {

void subnet_forward(std::span<const double> x, std::size_t n, std::size_t len,
                    std::span<const double> weight, std::span<const double> bias, std::size_t sets,
                    std::size_t depth, std::span<double> out);
void subnet_backward(std::span<const double> x, std::size_t n, std::size_t len,
                     std::span<const double> grad_out, std::size_t sets, std::size_t depth,
                     std::span<double> grad_weight, std::span<double> grad_bias);
void perm_apply(std::span<const double> u, std::size_t n, std::span<const double> f,
                std::size_t depth, std::span<double> out);
void perm_backward(std::span<const double> u, std::size_t n, std::span<const double> f,
                   std::size_t depth, std::span<const double> grad_out, std::span<double> grad_u,
                   std::span<double> grad_f);
// Direct convolution on the image (no patch matrix).
void conv3x3_forward(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
                     std::span<const double> weight, std::span<const double> bias,
                     std::size_t out_channels, std::span<double> out);
void conv3x3_backward(std::span<const double> in, std::size_t h, std::size_t w, std::size_t c,
                      std::span<const double> weight, std::size_t out_channels,
                      std::span<const double> grad_out, std::span<double> grad_weight,
                      std::span<double> grad_bias, std::span<double> grad_in);

} // namespace reference

} // namespace blockscramble
