#include "blockscramble/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "blockscramble/keying.hpp"
#include "blockscramble/losses.hpp"
#include "blockscramble/model.hpp"

namespace blockscramble {

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    if (analytic.size() != numeric.size())
        throw DimensionError("relative_error: vectors differ in length");
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    const double scale = std::sqrt(std::max(na, nn));
    if (scale < 1e-14) return std::sqrt(diff);
    return std::sqrt(diff) / scale;
}

namespace {

double signed_away_from_zero(SubkeyStream& s) {
    const double v = 0.1 + 0.9 * s.uniform_real();
    return s.uniform(2) ? v : -v;
}

template <class F>
std::vector<double> central_difference(std::vector<double>& x, double delta, F&& f) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + delta;
        const double up = f();
        x[i] = keep - delta;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * delta);
    }
    return g;
}

void record(GradCheckResult& r, double err) {
    ++r.draws;
    r.worst_error = std::max(r.worst_error, err);
    if (!(err < r.tolerance)) ++r.failures;
}

GradCheckResult check_loss_u(const GradCheckOptions& opt, const Seed256& root) {
    GradCheckResult r{"loss_u", 0, 0, 0.0, opt.loss_tolerance};
    for (std::size_t d = 0; d < opt.draws; ++d) {
        SubkeyStream s = derive(root, "gradcheck/loss_u", d);
        const std::size_t n = 2 + s.uniform(7);
        std::vector<double> u(n * n);
        for (double& v : u) v = signed_away_from_zero(s);
        std::vector<double> analytic(u.size(), 0.0);
        loss_u_gradient(u, n, 1.0, analytic);
        const auto numeric = central_difference(u, opt.delta, [&] { return loss_u(u, n); });
        record(r, relative_error(analytic, numeric));
    }
    return r;
}

GradCheckResult check_loss_s(const GradCheckOptions& opt, const Seed256& root) {
    GradCheckResult r{"loss_s", 0, 0, 0.0, opt.loss_tolerance};
    for (std::size_t d = 0; d < opt.draws; ++d) {
        SubkeyStream s = derive(root, "gradcheck/loss_s", d);
        FeatureMap fm;
        fm.height = 1 + s.uniform(6);
        fm.width = 1 + s.uniform(6);
        fm.channels = 1 + s.uniform(3);
        fm.data.resize(fm.height * fm.width * fm.channels);
        for (double& v : fm.data) v = 2.0 * s.uniform_real() - 1.0;
        std::vector<double> analytic(fm.data.size(), 0.0);
        smoothness_gradient(fm, 1.0, analytic);
        const auto numeric =
            central_difference(fm.data, opt.delta, [&] { return smoothness(fm); });
        record(r, relative_error(analytic, numeric));
    }
    return r;
}

GradCheckResult check_model(const GradCheckOptions& opt, const Seed256& root,
                            std::optional<AdaptMode> mode, const std::string& name) {
    GradCheckResult r{name, 0, 0, 0.0, opt.end_to_end_tolerance};
    ModelConfig cfg;
    cfg.adapt = mode;
    cfg.height = 8;
    cfg.width = 8;
    cfg.block_size = 4;
    cfg.num_classes = 3;
    cfg.conv1_channels = 4;
    cfg.conv2_channels = 4;
    cfg.subnet_init_noise = 0.2;
    const double lambda_u = 0.05, lambda_s = 0.1;

    for (std::size_t d = 0; d < opt.draws; ++d) {
        SubkeyStream s = derive(root, "gradcheck/" + name, d);
        Model model = Model::initialize(cfg, s.next_u64());
        if (model.adapt() && model.adapt()->mode == AdaptMode::ELE)
            for (double& v : model.adapt()->u.entries) v += 0.2 * (2.0 * s.uniform_real() - 1.0);

        std::vector<LabeledExample> data;
        for (int i = 0; i < 2; ++i) {
            Image8 img(cfg.height, cfg.width, 3);
            for (std::size_t y = 0; y < cfg.height; ++y)
                for (std::size_t x = 0; x < cfg.width; ++x)
                    for (std::size_t c = 0; c < 3; ++c)
                        img.at(y, x, c) = static_cast<std::uint8_t>(s.uniform(256));
            data.push_back({std::move(img), s.uniform(cfg.num_classes)});
        }
        const std::vector<const LabeledExample*> batch{&data[0], &data[1]};

        BatchEngine engine(model);
        Model grads = model.zeros_like();
        engine.run(model, batch, lambda_u, lambda_s, &grads);

        std::vector<double> analytic, numeric;
        auto params = model.slots();
        const auto g = grads.slots();
        for (std::size_t t = 0; t < params.size(); ++t) {
            auto values = params[t].values;
            const std::size_t picks = std::min(opt.coords_per_tensor, values.size());
            for (std::size_t k = 0; k < picks; ++k) {
                const std::size_t i = picks == values.size() ? k : s.uniform(values.size());
                // |u| is not differentiable at 0; skip coordinates the stencil would straddle.
                if (params[t].name == "adapt.U" && std::abs(values[i]) < 10.0 * opt.delta) continue;
                const double keep = values[i];
                values[i] = keep + opt.delta;
                const double up = engine.run(model, batch, lambda_u, lambda_s, nullptr).loss.total;
                values[i] = keep - opt.delta;
                const double down = engine.run(model, batch, lambda_u, lambda_s, nullptr).loss.total;
                values[i] = keep;
                analytic.push_back(g[t].values[i]);
                numeric.push_back((up - down) / (2.0 * opt.delta));
            }
        }
        record(r, relative_error(analytic, numeric));
    }
    return r;
}

} // namespace

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options) {
    if (options.draws == 0) throw DomainError("gradcheck needs at least one draw");
    if (!(options.delta > 0.0)) throw DomainError("gradcheck step must be positive");
    const Seed256 root = seed_from_u64(options.seed);
    return {
        check_loss_u(options, root),
        check_loss_s(options, root),
        check_model(options, root, std::nullopt, "end_to_end/no-adapt"),
        check_model(options, root, AdaptMode::LE, "end_to_end/LE"),
        check_model(options, root, AdaptMode::ELE, "end_to_end/ELE"),
    };
}

} // namespace blockscramble
