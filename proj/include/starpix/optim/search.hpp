#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace starpix::optim {

// One tunable hyperparameter. Coarse candidates are the decades
// 10^coarse_exp_lo .. 10^coarse_exp_hi; the fine range is derived from the
// winning decade 10^k as [10^(k-1), 10^(k+1)] clamped to the coarse range.
// log_scale picks log-uniform fine sampling (learning rates) over plain
// uniform (momentum, betas).
struct SearchDimension {
    std::string name;
    int coarse_exp_lo = 0;
    int coarse_exp_hi = 0;
    bool log_scale = true;
};

struct SearchSpace {
    std::vector<SearchDimension> dims;
};

struct Trial {
    std::size_t index = 0;  // evaluation order, 0-based
    int phase = 1;          // 1 = coarse grid, 2 = fine random
    std::vector<double> values;  // aligned with SearchSpace::dims
    double metric = 0.0;
};

using EvalFn = std::function<double(const std::vector<double>&)>;

// Coarse-to-fine search. Phase 1 walks the cartesian decade grid; phase 2
// spends the remaining budget on random samples around the phase-1 winner.
// Returns every trial sorted by metric ascending (ties by trial index).
// Deterministic given seed. Throws if budget < grid size; warns and skips
// phase 2 if budget == grid size.
std::vector<Trial> hp_search(const SearchSpace& space, std::size_t budget, const EvalFn& eval_fn,
                             std::uint64_t seed);

// CSV with header trial,phase,<dim names...>,val_metric.
std::string trials_csv(const SearchSpace& space, const std::vector<Trial>& trials);
void write_trials_csv(const std::string& path, const SearchSpace& space,
                      const std::vector<Trial>& trials);

}  // namespace starpix::optim
