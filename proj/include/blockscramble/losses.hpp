#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "blockscramble/core.hpp"

namespace blockscramble {

inline constexpr double kDefaultLambdaU = 0.001;
inline constexpr double kDefaultLambdaS = 0.1;
inline constexpr double kProbabilityFloor = 1e-12;

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double u_penalty = 0.0;
    double smooth = 0.0;
    double lambda_u = kDefaultLambdaU;
    double lambda_s = kDefaultLambdaS;
};

struct CrossEntropy {
    double value = 0.0;
    bool clamped = false; // a true-class probability fell below kProbabilityFloor
};

// -(1/M) sum_m sum_k t[m][k] log p[m][k] over row-major M x K matrices.
// Rows of `probs` must sum to 1 within 1e-6 (DomainError otherwise).
CrossEntropy loss_ce(std::span<const double> probs, std::span<const double> one_hot,
                     std::size_t classes);

// L1-L2 penalty over rows and columns, divided by N*N.
double loss_u(const PseudoPermMatrix& u);
double loss_u(std::span<const double> u, std::size_t n);
// Adds scale * dL_U/dU into grad. sign(0) is taken as 0, which is also the
// central-difference value of |u| at 0.
void loss_u_gradient(std::span<const double> u, std::size_t n, double scale,
                     std::span<double> grad);

// Smoothness of a single map: horizontal term over H(W-1)C, vertical over (H-1)WC.
double smoothness(const FeatureMap& fm);
void smoothness_gradient(const FeatureMap& fm, double scale, std::span<double> grad);
// Mean of smoothness() over the maps.
double loss_s(std::span<const FeatureMap> maps);

LossBreakdown loss_total(double ce, double u_penalty, double smooth,
                         double lambda_u = kDefaultLambdaU, double lambda_s = kDefaultLambdaS);

// Numerically stable softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

} // namespace blockscramble
