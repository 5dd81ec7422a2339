// Monte-Carlo ensembles of PTW walkers: mean-squared-displacement curves,
// least-squares estimation of the diffusion coefficient, spatial density
// histograms and the L1 distance to the heat kernel of the diffusion limit.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "analytics.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace ptw {

struct EnsembleConfig {
    std::size_t n_traj = 2000;
    double alpha = 1.0;
    double dt = 0.05;
    double t_end = 120.0;
    std::size_t output_stride = 1;
    std::uint64_t master_seed = 0;
    unsigned workers = 0; ///< 0 = hardware concurrency
};

/// Number of steps implied by t_end / dt; throws unless it is a positive integer.
inline std::size_t step_count(const EnsembleConfig &cfg) {
    require_positive_step(cfg.dt);
    if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) throw std::invalid_argument("t_end must be positive");
    const double ratio = cfg.t_end / cfg.dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded))
        throw std::invalid_argument("t_end / dt must be a positive integer");
    return static_cast<std::size_t>(rounded);
}

inline void validate(const EnsembleConfig &cfg) {
    if (cfg.n_traj < 2) throw std::invalid_argument("n_traj must be >= 2");
    if (cfg.output_stride < 1) throw std::invalid_argument("output_stride must be >= 1");
    (void)ScaledParams(cfg.alpha);
    (void)step_count(cfg);
}

namespace detail {

inline unsigned resolve_workers(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Trajectories are grouped into at most kMaxBlocks contiguous blocks. The
/// layout depends on n_traj only, and partials are merged in block order, so
/// the reduction is bitwise independent of the worker count.
inline constexpr std::size_t kMaxBlocks = 32;

struct BlockLayout {
    std::size_t n_blocks;
    std::size_t block_size;

    std::size_t begin(std::size_t b, std::size_t n) const { return std::min(n, b * block_size); }
    std::size_t end(std::size_t b, std::size_t n) const { return std::min(n, (b + 1) * block_size); }
};

inline BlockLayout block_layout(std::size_t n) {
    const std::size_t blocks = std::max<std::size_t>(1, std::min(n, kMaxBlocks));
    const std::size_t size = (n + blocks - 1) / blocks;
    return {(n + size - 1) / size, size};
}

template <typename Partial, typename Make, typename Body, typename Merge>
Partial reduce_trajectories(std::size_t n, unsigned workers, Make make, Body body, Merge merge) {
    const BlockLayout layout = block_layout(n);
    std::vector<Partial> partials;
    partials.reserve(layout.n_blocks);
    for (std::size_t b = 0; b < layout.n_blocks; ++b) partials.push_back(make());

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(layout.n_blocks);
    auto worker = [&] {
        for (std::size_t b = next++; b < layout.n_blocks; b = next++) {
            try {
                for (std::size_t i = layout.begin(b, n); i < layout.end(b, n); ++i) body(partials[b], i);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const unsigned n_workers =
        static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), layout.n_blocks));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);

    Partial total = make();
    for (auto &p : partials) merge(total, p);
    return total;
}

/// Recorded step indices: 0, stride, 2 stride, ... and always the last step.
inline std::vector<std::size_t> recorded_steps(std::size_t n_steps, std::size_t stride) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i <= n_steps; i += stride) idx.push_back(i);
    if (idx.back() != n_steps) idx.push_back(n_steps);
    return idx;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Variance ensemble
// ---------------------------------------------------------------------------

struct VarianceSeries {
    std::vector<double> times;
    std::vector<double> mean_x1;
    std::vector<double> mean_x2;
    std::vector<double> msd;    ///< ensemble average of x1^2 + x2^2
    std::vector<double> std_err; ///< sample std of x1^2 + x2^2 over sqrt(N)
    std::size_t n_traj = 0;

    std::size_t size() const noexcept { return times.size(); }
};

namespace detail {

// Per-time running moments, merged with Chan's pairwise update.
struct MomentAccumulator {
    std::vector<double> sum_x1, sum_x2, mean_r2, m2_r2;
    std::size_t count = 0;

    explicit MomentAccumulator(std::size_t points)
        : sum_x1(points, 0.0), sum_x2(points, 0.0), mean_r2(points, 0.0), m2_r2(points, 0.0) {}

    void merge(const MomentAccumulator &o) {
        if (o.count == 0) return;
        const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
        const double n = na + nb;
        for (std::size_t k = 0; k < mean_r2.size(); ++k) {
            sum_x1[k] += o.sum_x1[k];
            sum_x2[k] += o.sum_x2[k];
            const double delta = o.mean_r2[k] - mean_r2[k];
            mean_r2[k] += delta * nb / n;
            m2_r2[k] += o.m2_r2[k] + delta * delta * na * nb / n;
        }
        count += o.count;
    }
};

} // namespace detail

inline VarianceSeries run_variance_ensemble(const EnsembleConfig &cfg) {
    validate(cfg);
    const ScaledParams params(cfg.alpha);
    const std::size_t n_steps = step_count(cfg);
    const std::vector<std::size_t> steps = detail::recorded_steps(n_steps, cfg.output_stride);
    const std::size_t points = steps.size();

    auto body = [&](detail::MomentAccumulator &acc, std::size_t traj) {
        std::size_t step_index = 0, k = 0;
        const double count = static_cast<double>(++acc.count);
        simulate(params, cfg.dt, n_steps, RngStream(cfg.master_seed, traj), [&](const PtwState &s) {
            if (k < points && steps[k] == step_index) {
                const double r2 = s.x1 * s.x1 + s.x2 * s.x2;
                acc.sum_x1[k] += s.x1;
                acc.sum_x2[k] += s.x2;
                const double delta = r2 - acc.mean_r2[k];
                acc.mean_r2[k] += delta / count;
                acc.m2_r2[k] += delta * (r2 - acc.mean_r2[k]);
                ++k;
            }
            ++step_index;
        });
    };
    const auto total = detail::reduce_trajectories<detail::MomentAccumulator>(
        cfg.n_traj, cfg.workers, [&] { return detail::MomentAccumulator(points); }, body,
        [](detail::MomentAccumulator &into, const detail::MomentAccumulator &from) { into.merge(from); });

    VarianceSeries out;
    out.n_traj = cfg.n_traj;
    const double n = static_cast<double>(cfg.n_traj);
    for (std::size_t k = 0; k < points; ++k) {
        out.times.push_back(static_cast<double>(steps[k]) * cfg.dt);
        out.mean_x1.push_back(total.sum_x1[k] / n);
        out.mean_x2.push_back(total.sum_x2[k] / n);
        out.msd.push_back(total.mean_r2[k]);
        out.std_err.push_back(std::sqrt(total.m2_r2[k] / (n - 1.0)) / std::sqrt(n));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Least-squares estimate of D
// ---------------------------------------------------------------------------

struct FitReport {
    double d_hat = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    double d_theory = 0.0;
    double rel_error = 0.0; ///< |d_hat - d_theory| / d_theory
    std::size_t n_points = 0;
};

/// Ordinary least squares of msd against t on [T/2, T], T the last recorded
/// time. Var ~ 2 D t, so d_hat = slope / 2.
inline FitReport fit_diffusion(const VarianceSeries &series, double d_theory) {
    if (series.size() < 2) throw std::invalid_argument("fit_diffusion: series is empty");
    const double t_end = series.times.back();
    const double t_lo = 0.5 * t_end;
    const double slack = 1e-9 * t_end;

    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < series.size(); ++k)
        if (series.times[k] >= t_lo - slack) pts.emplace_back(series.times[k], series.msd[k]);
    if (pts.size() < 10)
        throw std::invalid_argument("fit_diffusion: need at least 10 points in [T/2, T], have " +
                                    std::to_string(pts.size()));

    double t_mean = 0.0, y_mean = 0.0;
    for (const auto &[t, y] : pts) {
        t_mean += t;
        y_mean += y;
    }
    t_mean /= static_cast<double>(pts.size());
    y_mean /= static_cast<double>(pts.size());
    double stt = 0.0, sty = 0.0;
    for (const auto &[t, y] : pts) {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
    }
    if (!(stt > 0.0)) throw std::invalid_argument("fit_diffusion: fit window has zero time spread");

    FitReport r;
    r.slope = sty / stt;
    r.intercept = y_mean - r.slope * t_mean;
    double ss = 0.0;
    for (const auto &[t, y] : pts) {
        const double e = y - (r.intercept + r.slope * t);
        ss += e * e;
    }
    r.residual_rms = std::sqrt(ss / static_cast<double>(pts.size()));
    r.d_hat = 0.5 * r.slope;
    r.t_lo = pts.front().first;
    r.t_hi = pts.back().first;
    r.d_theory = d_theory;
    r.rel_error = std::abs(r.d_hat - d_theory) / d_theory;
    r.n_points = pts.size();
    return r;
}

// ---------------------------------------------------------------------------
// Density histograms
// ---------------------------------------------------------------------------

/// Square grid [x_min, x_max)^2 with n_bins per axis.
struct GridSpec {
    double x_min = -1.0;
    double x_max = 1.0;
    std::size_t n_bins = 61;

    double bin_width() const noexcept { return (x_max - x_min) / static_cast<double>(n_bins); }
    double center(std::size_t i) const noexcept { return x_min + (static_cast<double>(i) + 0.5) * bin_width(); }

    void validate() const {
        if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
            throw std::invalid_argument("grid: need finite x_min < x_max");
        if (n_bins < 1) throw std::invalid_argument("grid: n_bins must be >= 1");
    }
};

/// [-half_width_sigmas sigma, +...] with sigma = sqrt(D t), the per-axis
/// standard deviation of the limiting heat kernel.
inline GridSpec default_grid(double diffusion, double t, double half_width_sigmas = 6.0, std::size_t n_bins = 61) {
    const double sigma = std::sqrt(diffusion * t);
    return {-half_width_sigmas * sigma, half_width_sigmas * sigma, n_bins};
}

struct DensityHistogram {
    GridSpec grid;
    std::vector<double> mass; ///< fraction of particles, index ix * n_bins + iy
    std::size_t n_outside = 0;
    std::size_t n_total = 0;
    std::vector<std::string> warnings;

    double bin_area() const noexcept { return grid.bin_width() * grid.bin_width(); }
    double mass_at(std::size_t ix, std::size_t iy) const { return mass[ix * grid.n_bins + iy]; }
    double density_at(std::size_t ix, std::size_t iy) const { return mass_at(ix, iy) / bin_area(); }
    double outside_fraction() const noexcept {
        return n_total == 0 ? 0.0 : static_cast<double>(n_outside) / static_cast<double>(n_total);
    }
    /// Sum of bin masses plus the outside fraction; 1 up to rounding.
    double total_mass() const {
        double s = 0.0;
        for (double m : mass) s += m;
        return s + outside_fraction();
    }
};

using Position = std::pair<double, double>;

inline DensityHistogram histogram(const std::vector<Position> &points, const GridSpec &grid) {
    grid.validate();
    if (points.empty()) throw std::invalid_argument("histogram: no points");
    DensityHistogram h;
    h.grid = grid;
    h.n_total = points.size();
    std::vector<std::size_t> counts(grid.n_bins * grid.n_bins, 0);
    const double w = grid.bin_width();
    for (const auto &[x, y] : points) {
        if (!(x >= grid.x_min && x < grid.x_max && y >= grid.x_min && y < grid.x_max)) {
            ++h.n_outside;
            continue;
        }
        const auto ix = std::min(grid.n_bins - 1, static_cast<std::size_t>((x - grid.x_min) / w));
        const auto iy = std::min(grid.n_bins - 1, static_cast<std::size_t>((y - grid.x_min) / w));
        ++counts[ix * grid.n_bins + iy];
    }
    const double n = static_cast<double>(points.size());
    h.mass.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) h.mass[i] = static_cast<double>(counts[i]) / n;
    if (h.outside_fraction() > 0.01) {
        std::ostringstream msg;
        msg << "fraction of particles outside the grid is " << h.outside_fraction() << " (> 1%)";
        h.warnings.push_back(msg.str());
    }
    return h;
}

/// Positions of every trajectory at the requested step indices (ascending).
/// Result is indexed [checkpoint][trajectory].
inline std::vector<std::vector<Position>> positions_at_steps(const ScaledParams &params, double dt,
                                                             const std::vector<std::size_t> &steps,
                                                             std::size_t n_traj, std::uint64_t master_seed,
                                                             unsigned workers, double scale = 1.0) {
    if (steps.empty()) throw std::invalid_argument("positions_at_steps: no checkpoints");
    if (!std::is_sorted(steps.begin(), steps.end()))
        throw std::invalid_argument("positions_at_steps: checkpoints must be ascending");
    std::vector<std::vector<Position>> out(steps.size(), std::vector<Position>(n_traj));
    struct Nothing {};
    auto body = [&](Nothing &, std::size_t traj) {
        std::size_t step_index = 0, k = 0;
        simulate(params, dt, steps.back(), RngStream(master_seed, traj), [&](const PtwState &s) {
            while (k < steps.size() && steps[k] == step_index) out[k++][traj] = {scale * s.x1, scale * s.x2};
            ++step_index;
        });
    };
    detail::reduce_trajectories<Nothing>(n_traj, workers, [] { return Nothing{}; }, body,
                                         [](Nothing &, const Nothing &) {});
    return out;
}

/// Histogram of the final positions of an ensemble.
inline DensityHistogram run_density(const EnsembleConfig &cfg, const GridSpec &grid) {
    validate(cfg);
    grid.validate();
    const auto pos = positions_at_steps(ScaledParams(cfg.alpha), cfg.dt, {step_count(cfg)}, cfg.n_traj,
                                        cfg.master_seed, cfg.workers);
    DensityHistogram h = histogram(pos.front(), grid);
    if (cfg.n_traj < grid.n_bins * grid.n_bins)
        h.warnings.push_back("fewer particles than bins: grid occupancy is statistically meaningless");
    return h;
}

/// Probability mass in the four quadrants (x>0,y>0), (x<0,y>0), (x<0,y<0), (x>0,y<0).
/// A bin straddling an axis is shared in proportion to its area on each side.
inline std::array<double, 4> quadrant_masses(const DensityHistogram &h) {
    const double w = h.grid.bin_width();
    auto positive_share = [&](std::size_t i) {
        const double lo = h.grid.x_min + static_cast<double>(i) * w;
        return std::clamp((lo + w) / w, 0.0, 1.0);
    };
    std::array<double, 4> q{};
    for (std::size_t ix = 0; ix < h.grid.n_bins; ++ix) {
        const double px = positive_share(ix);
        for (std::size_t iy = 0; iy < h.grid.n_bins; ++iy) {
            const double py = positive_share(iy);
            const double m = h.mass_at(ix, iy);
            q[0] += m * px * py;
            q[1] += m * (1 - px) * py;
            q[2] += m * (1 - px) * (1 - py);
            q[3] += m * px * (1 - py);
        }
    }
    return q;
}

/// E|x|^2 from bin centers.
inline double second_moment(const DensityHistogram &h) {
    double m = 0.0;
    for (std::size_t ix = 0; ix < h.grid.n_bins; ++ix)
        for (std::size_t iy = 0; iy < h.grid.n_bins; ++iy) {
            const double x = h.grid.center(ix), y = h.grid.center(iy);
            m += (x * x + y * y) * h.mass_at(ix, iy);
        }
    return m;
}

// ---------------------------------------------------------------------------
// Distance to the diffusion limit
// ---------------------------------------------------------------------------

/// sum_bins |mass/area - K(center)| area, plus the mass that fell outside the
/// grid (where the kernel is taken as negligible).
inline double l1_distance(const DensityHistogram &h, const HeatKernelParams &hk) {
    const double area = h.bin_area();
    double l1 = 0.0;
    for (std::size_t ix = 0; ix < h.grid.n_bins; ++ix)
        for (std::size_t iy = 0; iy < h.grid.n_bins; ++iy) {
            const double k = heat_kernel_density(h.grid.center(ix), h.grid.center(iy), hk);
            l1 += std::abs(h.density_at(ix, iy) - k) * area;
        }
    return l1 + h.outside_fraction();
}

/// L1 distance between two histograms on the same grid, outside mass included.
inline double l1_distance(const DensityHistogram &a, const DensityHistogram &b) {
    if (a.mass.size() != b.mass.size()) throw std::invalid_argument("l1_distance: grids differ");
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.mass.size(); ++i) l1 += std::abs(a.mass[i] - b.mass[i]);
    return l1 + std::abs(a.outside_fraction() - b.outside_fraction());
}

struct L1Config {
    double alpha = 1.0;
    double epsilon = 1.0;
    std::vector<double> t_macro{5.0};
    std::size_t n_traj = 10000;
    double dt = 0.05;
    std::uint64_t master_seed = 0;
    unsigned workers = 0;
    double half_width_sigmas = 6.0; ///< grid half-width, in kernel standard deviations at each t
    std::size_t n_bins = 61;
};

struct L1Series {
    double epsilon = 1.0;
    std::vector<double> times; ///< macroscopic times actually sampled (snapped to the dt grid)
    std::vector<double> l1;
    std::vector<std::string> warnings;
};

inline constexpr double kMinBinsPerSigma = 5.0;

/// Simulates walkers to microscopic time t / eps^2, rescales positions by eps
/// and compares their histogram against the heat kernel with diffusivity D/2.
inline L1Series l1_vs_diffusion_limit(const L1Config &cfg) {
    const ScaledParams params(cfg.alpha);
    require_positive_step(cfg.dt);
    if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in (0, 1]");
    if (cfg.t_macro.empty()) throw std::invalid_argument("no output times");
    if (cfg.n_traj < 2) throw std::invalid_argument("n_traj must be >= 2");
    const double eps2 = cfg.epsilon * cfg.epsilon;
    std::vector<std::size_t> steps;
    for (double t : cfg.t_macro) {
        if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("output times must be > 0");
        steps.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / eps2 / cfg.dt))));
    }
    if (!std::is_sorted(steps.begin(), steps.end())) throw std::invalid_argument("output times must be ascending");

    const double diffusion = diffusion_coefficient(cfg.alpha).value;
    const auto positions = positions_at_steps(params, cfg.dt, steps, cfg.n_traj, cfg.master_seed, cfg.workers,
                                              cfg.epsilon);
    L1Series out;
    out.epsilon = cfg.epsilon;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const double t = static_cast<double>(steps[k]) * cfg.dt * eps2;
        const GridSpec grid = default_grid(diffusion, t, cfg.half_width_sigmas, cfg.n_bins);
        const double bins_per_sigma = std::sqrt(diffusion * t) / grid.bin_width();
        if (bins_per_sigma < kMinBinsPerSigma) {
            std::ostringstream msg;
            msg << "t=" << t << ": only " << bins_per_sigma << " bins per kernel standard deviation";
            out.warnings.push_back(msg.str());
        }
        const DensityHistogram h = histogram(positions[k], grid);
        out.times.push_back(t);
        out.l1.push_back(l1_distance(h, HeatKernelParams{0.5 * diffusion, t}));
    }
    return out;
}

struct KernelSelfTest {
    double l1_vs_kernel = 0.0; ///< histogram of n samples drawn from the kernel vs the kernel
    double noise_floor = 0.0;  ///< half the L1 distance between two disjoint halves of the sample
};

/// Draws n samples from the heat kernel itself and measures its L1 distance to
/// the kernel. The two-sample estimate uses that each half-sample histogram
/// carries twice the per-bin variance of the full one, so the distance between
/// the halves is about twice the full sample's sampling error.
inline KernelSelfTest heat_kernel_self_test(const HeatKernelParams &hk, std::size_t n, const GridSpec &grid,
                                            std::uint64_t master_seed) {
    if (n < 4) throw std::invalid_argument("self test needs at least 4 samples");
    const double sigma = std::sqrt(2.0 * hk.d_scalar * hk.t);
    std::vector<Position> all(n), first, second;
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rng(master_seed, i);
        const auto [z1, z2] = rng.normal_pair();
        all[i] = {sigma * z1, sigma * z2};
        (i % 2 == 0 ? first : second).push_back(all[i]);
    }
    KernelSelfTest r;
    r.l1_vs_kernel = l1_distance(histogram(all, grid), hk);
    r.noise_floor = 0.5 * l1_distance(histogram(first, grid), histogram(second, grid));
    return r;
}

} // namespace ptw
