#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blockscramble/losses.hpp"
#include "blockscramble/model.hpp"
#include "blockscramble/scramble.hpp"

namespace blockscramble {

struct LrPhase {
    std::size_t begin = 0; // first epoch, inclusive
    std::size_t end = 0;   // exclusive
    double rate = 0.1;
};

struct LrSchedule {
    std::vector<LrPhase> phases;

    std::size_t epochs() const noexcept { return phases.empty() ? 0 : phases.back().end; }
    // Phases must tile [0, epochs) in order with positive rates. No phases
    // means zero epochs.
    void validate() const;
};

// 0.1 / 0.01 / 0.001 over epochs [0,150) / [150,225) / [225,300).
LrSchedule full_schedule();
// base, base/10, base/100 with boundaries at 1/2 and 3/4 of `epochs`
// (rounded down); phases that come out empty are dropped.
LrSchedule scaled_schedule(std::size_t epochs, double base_rate = 0.1);
// "0-150:0.1,150-225:0.01,225-300:0.001"
LrSchedule parse_schedule(std::string_view text);
std::string format_schedule(const LrSchedule& schedule);

double lr_at(const LrSchedule& schedule, std::size_t epoch);

// Nesterov momentum in the look-ahead parameterisation: the stored
// parameters are the look-ahead point, so gradients are always evaluated
// there. Per element: v' = mu*v - lr*g ; theta' = theta + mu*v' - lr*g.
// This equals v' = mu*v - lr*grad(theta_true + mu*v), theta_true' = theta_true + v'
// with theta = theta_true + mu*v.
void sgd_nesterov_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum);

// Base rate of the desk-scale schedule.
inline constexpr double kDefaultBaseRate = 0.1;

struct TrainConfig {
    std::size_t batch_size = 128;
    LrSchedule schedule = scaled_schedule(30, kDefaultBaseRate);
    double momentum = 0.9;
    double lambda_u = kDefaultLambdaU;
    double lambda_s = kDefaultLambdaS;
    std::uint64_t seed = 1;
    bool augment = false; // pad-4 reflect, random 32x32 crop, horizontal flip
};

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    LossBreakdown train_loss; // mean over the epoch's batches
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double u_penalty = 0.0;   // loss_u(U) after the epoch, 0 without U
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double initial_u_penalty = 0.0;
    double final_u_penalty = 0.0;
};

// Training images. With a plan, `examples` hold plain images that are
// (optionally augmented and then) scrambled afresh every epoch; without one
// they are used as given. The examples themselves are never modified.
struct TrainSource {
    std::span<const LabeledExample> examples;
    const ScramblePlan* plan = nullptr;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainReport train(Model& model, const TrainSource& source, std::span<const LabeledExample> test,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0; // cross entropy
    std::vector<Prediction> predictions;
};

EvalResult evaluate(const Model& model, std::span<const LabeledExample> data);

// One line per epoch: "epoch=0 lr=0.1 total=... ce=... u=... s=... train_acc=... test_acc=... seconds=..."
std::string format_epoch_record(const EpochRecord& record);

} // namespace blockscramble
