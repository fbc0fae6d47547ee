#include "blockscramble/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>

#include "blockscramble/dataio.hpp"
#include "blockscramble/keying.hpp"

namespace blockscramble {

void LrSchedule::validate() const {
    std::size_t expect = 0;
    for (const auto& p : phases) {
        if (p.begin != expect)
            throw DomainError("learning-rate schedule: phase starting at epoch " +
                              std::to_string(p.begin) + " leaves a gap or overlap at epoch " +
                              std::to_string(expect));
        if (p.end <= p.begin) throw DomainError("learning-rate schedule: empty phase");
        if (!(p.rate > 0.0) || !std::isfinite(p.rate))
            throw DomainError("learning-rate schedule: rates must be positive and finite");
        expect = p.end;
    }
}

LrSchedule full_schedule() { return {{{0, 150, 0.1}, {150, 225, 0.01}, {225, 300, 0.001}}}; }

LrSchedule scaled_schedule(std::size_t epochs, double base_rate) {
    const std::size_t a = epochs * 150 / 300;
    const std::size_t b = epochs * 225 / 300;
    LrSchedule s;
    for (const LrPhase& p : {LrPhase{0, a, base_rate}, LrPhase{a, b, base_rate / 10},
                            LrPhase{b, epochs, base_rate / 100}})
        if (p.end > p.begin) s.phases.push_back(p);
    return s;
}

LrSchedule parse_schedule(std::string_view text) {
    LrSchedule s;
    std::istringstream in{std::string(text)};
    std::string part;
    if (text.empty()) return s;
    while (std::getline(in, part, ',')) {
        LrPhase p;
        char dash = 0, colon = 0;
        std::istringstream ps(part);
        if (!(ps >> p.begin >> dash >> p.end >> colon >> p.rate) || dash != '-' || colon != ':' ||
            !(ps >> std::ws).eof())
            throw ParseError("schedule: cannot parse phase '" + part +
                             "' (expected begin-end:rate)");
        s.phases.push_back(p);
    }
    s.validate();
    return s;
}

std::string format_schedule(const LrSchedule& schedule) {
    std::ostringstream out;
    for (std::size_t i = 0; i < schedule.phases.size(); ++i) {
        const auto& p = schedule.phases[i];
        if (i) out << ',';
        out << p.begin << '-' << p.end << ':' << p.rate;
    }
    return out.str();
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
    for (const auto& p : schedule.phases)
        if (epoch >= p.begin && epoch < p.end) return p.rate;
    throw RangeError("epoch " + std::to_string(epoch) + " is outside the schedule [0, " +
                     std::to_string(schedule.epochs()) + ")");
}

void sgd_nesterov_step(std::span<double> params, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw DimensionError("sgd_nesterov_step: parameter, gradient and velocity sizes differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double v = momentum * velocity[i] - lr * grads[i];
        params[i] += momentum * v - lr * grads[i];
        velocity[i] = v;
    }
}

namespace {

// Name of the first tensor holding a NaN or infinity, empty if none.
std::string first_non_finite(const Model& model) {
    for (const auto& s : model.slots())
        for (double v : s.values)
            if (!std::isfinite(v)) return s.name;
    return {};
}

double u_penalty_of(const Model& model) {
    const auto& a = model.adapt();
    return a && a->mode == AdaptMode::ELE ? loss_u(a->u) : 0.0;
}

} // namespace

TrainReport train(Model& model, const TrainSource& source, std::span<const LabeledExample> test,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.schedule.validate();
    if (cfg.batch_size == 0) throw DomainError("batch size must be positive");
    if (source.examples.empty()) throw DomainError("training set is empty");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw DomainError("momentum must lie in [0, 1)");
    const std::size_t K = model.config().num_classes;
    for (const auto& ex : source.examples) check_label(ex, K);
    for (const auto& ex : test) check_label(ex, K);

    const std::size_t n = source.examples.size();
    const Seed256 root = seed_from_u64(cfg.seed);
    Model grads = model.zeros_like();
    Model velocity = model.zeros_like();
    BatchEngine engine(model);

    TrainReport report;
    report.initial_u_penalty = u_penalty_of(model);

    std::vector<LabeledExample> epoch_data;
    const bool transform = source.plan != nullptr || cfg.augment;
    for (std::size_t epoch = 0; epoch < cfg.schedule.epochs(); ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(cfg.schedule, epoch);

        std::span<const LabeledExample> data = source.examples;
        if (transform) {
            epoch_data.assign(n, {});
            std::vector<std::exception_ptr> failure(n);
#pragma omp parallel for schedule(dynamic, 16)
            for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
                const auto i = static_cast<std::size_t>(ii);
                try {
                    Image8 img = source.examples[i].image;
                    if (cfg.augment) {
                        SubkeyStream s = derive(root, "train/augment", epoch * n + i);
                        img = augment(img, s);
                    }
                    if (source.plan) img = scramble(img, *source.plan);
                    epoch_data[i] = {std::move(img), source.examples[i].label};
                } catch (...) {
                    failure[i] = std::current_exception();
                }
            }
            for (const auto& f : failure)
                if (f) std::rethrow_exception(f);
            data = epoch_data;
        }

        SubkeyStream order_stream = derive(root, "train/shuffle", epoch);
        const auto order = random_permutation(order_stream, n);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        std::size_t correct = 0;
        std::vector<const LabeledExample*> batch;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
            const BatchResult r = engine.run(model, batch, cfg.lambda_u, cfg.lambda_s, &grads);
            if (!std::isfinite(r.loss.total)) {
                std::string where;
                if (const auto p = first_non_finite(model); !p.empty())
                    where = " (parameter '" + p + "')";
                else if (const auto g = first_non_finite(grads); !g.empty())
                    where = " (gradient of '" + g + "')";
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch starting at " + std::to_string(start) + where);
            }
            const double w = static_cast<double>(r.count) / static_cast<double>(n);
            rec.train_loss.total += w * r.loss.total;
            rec.train_loss.ce += w * r.loss.ce;
            rec.train_loss.u_penalty += w * r.loss.u_penalty;
            rec.train_loss.smooth += w * r.loss.smooth;
            correct += r.correct;

            auto p = model.slots();
            auto g = grads.slots();
            auto v = velocity.slots();
            for (std::size_t t = 0; t < p.size(); ++t)
                sgd_nesterov_step(p[t].values, g[t].values, v[t].values, lr, cfg.momentum);
        }
        if (const auto bad = first_non_finite(model); !bad.empty())
            throw NumericError("tensor '" + bad + "' became non-finite during epoch " +
                               std::to_string(epoch));
        rec.train_loss.lambda_u = cfg.lambda_u;
        rec.train_loss.lambda_s = cfg.lambda_s;
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        rec.test_accuracy = test.empty() ? 0.0 : evaluate(model, test).accuracy;
        rec.u_penalty = u_penalty_of(model);
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    report.final_u_penalty = u_penalty_of(model);
    return report;
}

EvalResult evaluate(const Model& model, std::span<const LabeledExample> data) {
    const std::size_t K = model.config().num_classes;
    for (const auto& ex : data) check_label(ex, K);
    EvalResult out;
    if (data.empty()) throw DomainError("cannot evaluate on an empty dataset");
    out.predictions = predict(model, data);
    std::size_t correct = 0;
    double ce = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        correct += out.predictions[i].label == data[i].label;
        ce -= std::log(std::max(out.predictions[i].posterior[data[i].label], kProbabilityFloor));
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    out.mean_loss = ce / static_cast<double>(data.size());
    return out;
}

std::string format_epoch_record(const EpochRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "epoch=%zu lr=%g total=%.6f ce=%.6f u=%.6f s=%.6f train_acc=%.4f "
                  "test_acc=%.4f seconds=%.2f",
                  r.epoch, r.lr, r.train_loss.total, r.train_loss.ce, r.train_loss.u_penalty,
                  r.train_loss.smooth, r.train_accuracy, r.test_accuracy, r.seconds);
    return buf;
}

} // namespace blockscramble
