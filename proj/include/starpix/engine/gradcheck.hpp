#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "starpix/common/rng.hpp"
#include "starpix/engine/graph.hpp"
#include "starpix/engine/nn.hpp"

namespace starpix::engine {

struct GradCheckOptions {
    double step = 1e-4;           // central-difference half-width
    int samples_per_param = 25;   // coordinates probed per parameter
    std::uint64_t seed = 12345;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
};

// Central finite-difference check of reverse-mode gradients. Run it on
// double-instantiated models: the engine's algorithms are shared between the
// float and double instantiations, and 64-bit evaluation separates
// algorithmic error from rounding noise. The relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
//
// loss_fn must rebuild the forward graph on every call and return a scalar.
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

template <typename LossFn>
GradCheckReport gradient_check(LossFn&& loss_fn, const std::vector<Parameter<double>*>& params,
                               GradCheckOptions opt = {}) {
    for (auto* p : params) p->clear_grad();
    Var<double> loss = loss_fn();
    if (!std::isfinite(loss.value().data[0]))
        throw std::runtime_error("gradient_check: non-finite loss");
    backward(loss);

    std::vector<std::vector<double>> analytic(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const TensorT<double>* grad = params[i]->grad();
        analytic[i].assign(params[i]->tensor().numel(), 0.0);
        if (grad != nullptr) {
            for (double g : grad->data)
                if (!std::isfinite(g)) throw std::runtime_error("gradient_check: non-finite gradient");
            analytic[i] = grad->data;
        }
    }

    Rng rng(opt.seed);
    GradCheckReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& values = params[i]->tensor().data;
        const std::size_t count = values.size();
        const std::size_t probes =
            std::min<std::size_t>(count, static_cast<std::size_t>(opt.samples_per_param));
        for (std::size_t s = 0; s < probes; ++s) {
            const std::size_t coord =
                probes == count ? s : static_cast<std::size_t>(rng.bounded(count));
            const double original = values[coord];
            values[coord] = original + opt.step;
            const double plus = loss_fn().value().data[0];
            values[coord] = original - opt.step;
            const double minus = loss_fn().value().data[0];
            values[coord] = original;
            if (!std::isfinite(plus) || !std::isfinite(minus))
                throw std::runtime_error("gradient_check: non-finite perturbed loss");
            const double numeric = (plus - minus) / (2.0 * opt.step);
            const double err = relative_error(analytic[i][coord], numeric);
            report.max_rel_error = std::max(report.max_rel_error, err);
            ++report.coords_checked;
        }
    }
    return report;
}

}  // namespace starpix::engine
