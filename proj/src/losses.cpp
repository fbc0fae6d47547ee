#include "blockscramble/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace blockscramble {

CrossEntropy loss_ce(std::span<const double> probs, std::span<const double> one_hot,
                     std::size_t classes) {
    if (classes == 0 || probs.size() != one_hot.size() || probs.size() % classes != 0)
        throw DimensionError("loss_ce: probability and label matrices disagree in shape");
    const std::size_t rows = probs.size() / classes;
    if (rows == 0) throw DomainError("loss_ce: empty batch");

    CrossEntropy result;
    double sum = 0.0;
    for (std::size_t m = 0; m < rows; ++m) {
        double row_sum = 0.0;
        for (std::size_t k = 0; k < classes; ++k) row_sum += probs[m * classes + k];
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw DomainError("loss_ce: row " + std::to_string(m) + " sums to " +
                              std::to_string(row_sum));
        for (std::size_t k = 0; k < classes; ++k) {
            const double t = one_hot[m * classes + k];
            if (t == 0.0) continue;
            double p = probs[m * classes + k];
            if (p < kProbabilityFloor) {
                p = kProbabilityFloor;
                result.clamped = true;
            }
            sum -= t * std::log(p);
        }
    }
    result.value = sum / static_cast<double>(rows);
    return result;
}

double loss_u(std::span<const double> u, std::size_t n) {
    if (u.size() != n * n) throw DimensionError("loss_u: matrix is not square");
    if (n == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double l1 = 0.0, l2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            l1 += std::abs(u[i * n + j]);
            l2 += u[i * n + j] * u[i * n + j];
        }
        total += l1 - std::sqrt(l2);
    }
    for (std::size_t j = 0; j < n; ++j) {
        double l1 = 0.0, l2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            l1 += std::abs(u[i * n + j]);
            l2 += u[i * n + j] * u[i * n + j];
        }
        total += l1 - std::sqrt(l2);
    }
    return total / static_cast<double>(n * n);
}

double loss_u(const PseudoPermMatrix& u) { return loss_u(u.entries, u.n); }

void loss_u_gradient(std::span<const double> u, std::size_t n, double scale,
                     std::span<double> grad) {
    if (u.size() != n * n || grad.size() != n * n)
        throw DimensionError("loss_u_gradient: shape mismatch");
    std::vector<double> row_norm(n, 0.0), col_norm(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = u[i * n + j];
            row_norm[i] += v * v;
            col_norm[j] += v * v;
        }
    for (auto& v : row_norm) v = std::sqrt(v);
    for (auto& v : col_norm) v = std::sqrt(v);

    const double norm = scale / static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = u[i * n + j];
            const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            double g = 2.0 * sign;
            if (row_norm[i] > 0.0) g -= v / row_norm[i];
            if (col_norm[j] > 0.0) g -= v / col_norm[j];
            grad[i * n + j] += norm * g;
        }
}

double smoothness(const FeatureMap& fm) {
    const std::size_t H = fm.height, W = fm.width, C = fm.channels;
    if (H == 0 || W == 0) throw DimensionError("smoothness: empty feature map");
    double horizontal = 0.0, vertical = 0.0;
    if (W > 1) {
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w + 1 < W; ++w)
                for (std::size_t c = 0; c < C; ++c) {
                    const double d = fm.at(h, w + 1, c) - fm.at(h, w, c);
                    horizontal += d * d;
                }
        horizontal /= static_cast<double>(H * (W - 1) * C);
    }
    if (H > 1) {
        for (std::size_t h = 0; h + 1 < H; ++h)
            for (std::size_t w = 0; w < W; ++w)
                for (std::size_t c = 0; c < C; ++c) {
                    const double d = fm.at(h + 1, w, c) - fm.at(h, w, c);
                    vertical += d * d;
                }
        vertical /= static_cast<double>((H - 1) * W * C);
    }
    return horizontal + vertical;
}

void smoothness_gradient(const FeatureMap& fm, double scale, std::span<double> grad) {
    const std::size_t H = fm.height, W = fm.width, C = fm.channels;
    if (grad.size() != fm.data.size()) throw DimensionError("smoothness_gradient: shape mismatch");
    auto idx = [&](std::size_t h, std::size_t w, std::size_t c) { return (h * W + w) * C + c; };
    if (W > 1) {
        const double k = 2.0 * scale / static_cast<double>(H * (W - 1) * C);
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w + 1 < W; ++w)
                for (std::size_t c = 0; c < C; ++c) {
                    const double d = fm.at(h, w + 1, c) - fm.at(h, w, c);
                    grad[idx(h, w + 1, c)] += k * d;
                    grad[idx(h, w, c)] -= k * d;
                }
    }
    if (H > 1) {
        const double k = 2.0 * scale / static_cast<double>((H - 1) * W * C);
        for (std::size_t h = 0; h + 1 < H; ++h)
            for (std::size_t w = 0; w < W; ++w)
                for (std::size_t c = 0; c < C; ++c) {
                    const double d = fm.at(h + 1, w, c) - fm.at(h, w, c);
                    grad[idx(h + 1, w, c)] += k * d;
                    grad[idx(h, w, c)] -= k * d;
                }
    }
}

double loss_s(std::span<const FeatureMap> maps) {
    if (maps.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& fm : maps) sum += smoothness(fm);
    return sum / static_cast<double>(maps.size());
}

LossBreakdown loss_total(double ce, double u_penalty, double smooth, double lambda_u,
                         double lambda_s) {
    LossBreakdown out;
    out.ce = ce;
    out.u_penalty = u_penalty;
    out.smooth = smooth;
    out.lambda_u = lambda_u;
    out.lambda_s = lambda_s;
    out.total = ce + lambda_u * u_penalty + lambda_s * smooth;
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double peak = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

} // namespace blockscramble
