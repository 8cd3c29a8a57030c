#include "starpix/optim/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "starpix/common/log.hpp"
#include "starpix/common/rng.hpp"

namespace starpix::optim {

namespace {

void validate_space(const SearchSpace& space) {
    if (space.dims.empty()) throw std::invalid_argument("hp_search: empty search space");
    for (const auto& dim : space.dims) {
        if (dim.name.empty()) throw std::invalid_argument("hp_search: unnamed dimension");
        if (dim.coarse_exp_lo > dim.coarse_exp_hi)
            throw std::invalid_argument("hp_search: dimension '" + dim.name +
                                        "' has coarse exponent range [" +
                                        std::to_string(dim.coarse_exp_lo) + "," +
                                        std::to_string(dim.coarse_exp_hi) + "]");
    }
}

std::size_t coarse_grid_size(const SearchSpace& space) {
    std::size_t n = 1;
    for (const auto& dim : space.dims)
        n *= static_cast<std::size_t>(dim.coarse_exp_hi - dim.coarse_exp_lo + 1);
    return n;
}

double pow10(int e) { return std::pow(10.0, static_cast<double>(e)); }

}  // namespace

std::vector<Trial> hp_search(const SearchSpace& space, std::size_t budget, const EvalFn& eval_fn,
                             std::uint64_t seed) {
    validate_space(space);
    if (!eval_fn) throw std::invalid_argument("hp_search: missing eval function");
    const std::size_t grid = coarse_grid_size(space);
    if (budget < grid)
        throw std::invalid_argument("hp_search: budget " + std::to_string(budget) +
                                    " below coarse grid size " + std::to_string(grid));

    std::vector<Trial> trials;
    trials.reserve(budget);

    // Phase 1: cartesian product over decades, last dimension fastest.
    std::vector<int> exps;
    for (const auto& dim : space.dims) exps.push_back(dim.coarse_exp_lo);
    for (std::size_t i = 0; i < grid; ++i) {
        Trial t;
        t.index = trials.size();
        t.phase = 1;
        for (std::size_t d = 0; d < space.dims.size(); ++d) t.values.push_back(pow10(exps[d]));
        t.metric = eval_fn(t.values);
        trials.push_back(std::move(t));
        for (std::size_t d = space.dims.size(); d-- > 0;) {
            if (++exps[d] <= space.dims[d].coarse_exp_hi) break;
            exps[d] = space.dims[d].coarse_exp_lo;
        }
    }

    const auto best_coarse =
        std::min_element(trials.begin(), trials.end(),
                         [](const Trial& a, const Trial& b) { return a.metric < b.metric; });

    // Phase 2: random samples in the winner's neighborhood.
    if (budget == grid) {
        log::warn("hp_search: budget covers only the coarse grid; skipping fine phase");
    } else {
        Rng rng(seed);
        for (std::size_t i = grid; i < budget; ++i) {
            Trial t;
            t.index = trials.size();
            t.phase = 2;
            for (std::size_t d = 0; d < space.dims.size(); ++d) {
                const auto& dim = space.dims[d];
                const int k = static_cast<int>(std::lround(std::log10(best_coarse->values[d])));
                const double lo = std::max(pow10(k - 1), pow10(dim.coarse_exp_lo));
                const double hi = std::min(pow10(k + 1), pow10(dim.coarse_exp_hi));
                if (dim.log_scale)
                    t.values.push_back(std::exp(rng.uniform(std::log(lo), std::log(hi))));
                else
                    t.values.push_back(rng.uniform(lo, hi));
            }
            t.metric = eval_fn(t.values);
            trials.push_back(std::move(t));
        }
    }

    std::stable_sort(trials.begin(), trials.end(),
                     [](const Trial& a, const Trial& b) { return a.metric < b.metric; });
    return trials;
}

std::string trials_csv(const SearchSpace& space, const std::vector<Trial>& trials) {
    std::ostringstream out;
    out << "trial,phase";
    for (const auto& dim : space.dims) out << ',' << dim.name;
    out << ",val_metric\n";
    out << std::setprecision(17);
    for (const auto& t : trials) {
        out << t.index << ',' << t.phase;
        for (double v : t.values) out << ',' << v;
        out << ',' << t.metric << '\n';
    }
    return out.str();
}

void write_trials_csv(const std::string& path, const SearchSpace& space,
                      const std::vector<Trial>& trials) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << trials_csv(space, trials);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace starpix::optim
