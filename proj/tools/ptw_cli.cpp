// ptw: command-line front end for the Persistent Turning Walker toolkit.
//
//   ptw dcoef    --alpha 2 [--method closed_form|series|quadrature]
//   ptw simulate --alpha 1 --dt 0.05 --T 120 --out path.csv
//   ptw variance --alpha 0.1 --N 2000 --T 1200 --out variance.csv
//   ptw density  --alpha 2 --N 10000 --T 30 --out density.csv
//   ptw l1       --alpha 1 --epsilons 1,0.5,0.2,0.1 --times 1,2,5 --out l1.csv
//   ptw replay   variance.csv.manifest
//
// Every command accepts --config FILE (key=value lines, flags win) and writes
// FILE.manifest next to each output. PTW_SEED overrides --seed.
// Exit codes: 0 success, 2 usage or invalid parameters, 3 numerical failure.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <ptw/ptw.hpp>

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- shared options

struct ModelOptions {
    std::optional<double> alpha;
    std::optional<double> a, b, c;

    void attach(CLI::App *app) {
        auto *o_alpha = app->add_option("--alpha", alpha, "dimensionless noise strength");
        auto *o_a = app->add_option("--a", a, "relaxation frequency (dimensional input)");
        auto *o_b = app->add_option("--b", b, "curvature noise intensity (dimensional input)");
        auto *o_c = app->add_option("--c", c, "speed (dimensional input)");
        for (auto *o : {o_a, o_b, o_c}) o_alpha->excludes(o);
    }

    /// Resolves alpha; units are present only for dimensional input.
    std::pair<double, std::optional<ptw::UnitFactors>> resolve(double default_alpha) const {
        const bool dimensional = a || b || c;
        if (dimensional) {
            if (!(a && b && c)) throw UsageError("--a, --b and --c must be given together");
            const auto n = ptw::nondimensionalize({*a, *b, *c});
            return {n.scaled.alpha(), n.units};
        }
        return {ptw::ScaledParams(alpha.value_or(default_alpha)).alpha(), std::nullopt};
    }

    void record(ptw::KeyValues &kv, double resolved_alpha) const {
        if (a || b || c) {
            kv.emplace_back("a", num(*a));
            kv.emplace_back("b", num(*b));
            kv.emplace_back("c", num(*c));
        } else {
            kv.emplace_back("alpha", num(resolved_alpha));
        }
    }

    static std::string num(double v) {
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    }
};

std::string num(double v) { return ModelOptions::num(v); }

std::string join(const std::vector<double> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
    return s;
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
    if (const char *env = std::getenv("PTW_SEED"); env && *env) {
        try {
            return std::stoull(env);
        } catch (const std::exception &) {
            throw UsageError(std::string("PTW_SEED is not an unsigned integer: ") + env);
        }
    }
    return flag_seed;
}

std::ofstream open_output(const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

std::string sibling(const std::string &path, const std::string &suffix) {
    const std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_manifest(ptw::RunManifest m, const Stopwatch &clock) {
    m.wall_clock_seconds = clock.seconds();
    for (const auto &output : m.outputs) {
        auto os = open_output(output + ".manifest");
        m.write(os);
    }
}

void print_warnings(const std::vector<std::string> &warnings) {
    for (const auto &w : warnings) std::cerr << "warning: " << w << '\n';
}

void warn_large_step(double dt) {
    if (dt > 0.5) std::cerr << "warning: dt = " << dt << " > 0.5; positions lose accuracy (curvature and heading stay exact)\n";
}

// ---------------------------------------------------------------- commands

struct DcoefCommand {
    ModelOptions model;
    std::string method = "closed_form";
    std::string out;

    void attach(CLI::App *app) {
        model.attach(app);
        app->add_option("--method", method, "closed_form | series | quadrature")
            ->check(CLI::IsMember({"closed_form", "series", "quadrature"}));
        app->add_option("--out", out, "optional single-row CSV");
    }

    void run() {
        Stopwatch clock;
        const auto [alpha, units] = model.resolve(1.0);
        const ptw::DiffusionResult r = ptw::diffusion_coefficient(alpha, ptw::parse_diffusion_method(method));
        std::cout << std::setprecision(6);
        std::cout << "alpha      = " << alpha << '\n';
        std::cout << "D          = " << r.value << '\n';
        std::cout << "D (3 s.f.) = " << std::setprecision(3) << r.value << std::setprecision(6) << '\n';
        std::cout << "D (full)   = " << num(r.value) << '\n';
        std::cout << "method     = " << ptw::to_string(r.method) << '\n';
        std::cout << "est_error  = " << r.est_error << '\n';
        if (units) std::cout << "D in input units (x0^2/t0) = " << units->diffusivity_to_dimensional(r.value) << '\n';
        if (out.empty()) return;
        {
            auto os = open_output(out);
            os << "alpha,d,method,est_error\n" << num(alpha) << ',' << num(r.value) << ',' << ptw::to_string(r.method)
               << ',' << num(r.est_error) << '\n';
        }
        ptw::RunManifest m;
        m.command = "dcoef";
        model.record(m.parameters, alpha);
        m.parameters.emplace_back("method", method);
        m.parameters.emplace_back("out", out);
        m.outputs = {out};
        write_manifest(m, clock);
    }
};

struct SimulateCommand {
    ModelOptions model;
    double dt = 0.05;
    double t_end = 120.0;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    std::string out = "path.csv";

    void attach(CLI::App *app) {
        model.attach(app);
        app->add_option("--dt", dt, "time step")->capture_default_str();
        app->add_option("--T", t_end, "final time")->capture_default_str();
        app->add_option("--seed", seed, "master seed")->capture_default_str();
        app->add_option("--stream", stream, "trajectory index within the seed")->capture_default_str();
        app->add_option("--out", out, "path CSV")->capture_default_str();
    }

    void run() {
        Stopwatch clock;
        const auto [alpha, units] = model.resolve(1.0);
        warn_large_step(dt);
        const std::uint64_t s = effective_seed(seed);
        ptw::EnsembleConfig cfg;
        cfg.dt = dt;
        cfg.t_end = t_end;
        const std::size_t n_steps = ptw::step_count(cfg);
        const auto path = ptw::simulate_path(ptw::ScaledParams(alpha), dt, n_steps, ptw::RngStream(s, stream));
        {
            auto os = open_output(out);
            ptw::write_path_csv(os, path);
        }
        std::cout << std::setprecision(6) << "wrote " << path.size() << " states to " << out << '\n'
                  << "path length / net displacement = " << ptw::tortuosity(path) << '\n';
        ptw::RunManifest m;
        m.command = "simulate";
        model.record(m.parameters, alpha);
        m.parameters.emplace_back("dt", num(dt));
        m.parameters.emplace_back("T", num(t_end));
        m.parameters.emplace_back("seed", std::to_string(s));
        m.parameters.emplace_back("stream", std::to_string(stream));
        m.parameters.emplace_back("out", out);
        m.master_seed = s;
        m.outputs = {out};
        write_manifest(m, clock);
    }
};

struct VarianceCommand {
    ModelOptions model;
    std::size_t n_traj = 2000;
    double dt = 0.05;
    double t_end = 1200.0;
    std::size_t stride = 20;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    std::string out = "variance.csv";

    void attach(CLI::App *app) {
        model.attach(app);
        app->add_option("--N", n_traj, "number of trajectories")->capture_default_str();
        app->add_option("--dt", dt, "time step")->capture_default_str();
        app->add_option("--T", t_end, "final time")->capture_default_str();
        app->add_option("--stride", stride, "steps between recorded points")->capture_default_str();
        app->add_option("--seed", seed, "master seed")->capture_default_str();
        app->add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str();
        app->add_option("--out", out, "variance series CSV; the fit goes to <stem>_fit.csv")->capture_default_str();
    }

    void run() {
        Stopwatch clock;
        const auto [alpha, units] = model.resolve(1.0);
        warn_large_step(dt);
        ptw::EnsembleConfig cfg{n_traj, alpha, dt, t_end, stride, effective_seed(seed), workers};
        const ptw::VarianceSeries series = ptw::run_variance_ensemble(cfg);
        const double d_theory = ptw::diffusion_coefficient(alpha).value;
        const ptw::FitReport fit = ptw::fit_diffusion(series, d_theory);
        const std::string fit_out = sibling(out, "_fit.csv");
        {
            auto os = open_output(out);
            ptw::write_variance_csv(os, series);
            auto fs = open_output(fit_out);
            ptw::write_fit_csv(fs, fit);
        }
        std::cout << std::setprecision(6) << "alpha = " << alpha << ", N = " << n_traj << ", T = " << t_end
                  << ", dt = " << dt << '\n'
                  << "fit window       = [" << fit.t_lo << ", " << fit.t_hi << "] (" << fit.n_points << " points)\n"
                  << "D simulation     = " << fit.d_hat << '\n'
                  << "D theoretical    = " << fit.d_theory << '\n'
                  << "relative error   = " << 100.0 * fit.rel_error << " %\n"
                  << "residual rms     = " << fit.residual_rms << '\n';
        ptw::RunManifest m;
        m.command = "variance";
        model.record(m.parameters, alpha);
        m.parameters.emplace_back("N", std::to_string(n_traj));
        m.parameters.emplace_back("dt", num(dt));
        m.parameters.emplace_back("T", num(t_end));
        m.parameters.emplace_back("stride", std::to_string(stride));
        m.parameters.emplace_back("seed", std::to_string(cfg.master_seed));
        m.parameters.emplace_back("workers", std::to_string(workers));
        m.parameters.emplace_back("out", out);
        m.master_seed = cfg.master_seed;
        m.outputs = {out, fit_out};
        write_manifest(m, clock);
    }
};

struct DensityCommand {
    ModelOptions model;
    std::size_t n_traj = 10000;
    double dt = 0.05;
    double t_end = 30.0;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    std::size_t bins = 61;
    double half_width = 6.0;
    std::optional<double> x_min, x_max;
    std::string out = "density.csv";

    void attach(CLI::App *app) {
        model.attach(app);
        app->add_option("--N", n_traj, "number of trajectories")->capture_default_str();
        app->add_option("--dt", dt, "time step")->capture_default_str();
        app->add_option("--T", t_end, "final time")->capture_default_str();
        app->add_option("--seed", seed, "master seed")->capture_default_str();
        app->add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str();
        app->add_option("--bins", bins, "bins per axis")->capture_default_str();
        auto *hw = app->add_option("--half-width", half_width, "grid half-width in units of sqrt(D T)")
                       ->capture_default_str();
        auto *lo = app->add_option("--x-min", x_min, "explicit grid lower edge");
        auto *hi = app->add_option("--x-max", x_max, "explicit grid upper edge");
        lo->needs(hi);
        hi->needs(lo);
        hw->excludes(lo);
        app->add_option("--out", out, "histogram CSV")->capture_default_str();
    }

    void run() {
        Stopwatch clock;
        const auto [alpha, units] = model.resolve(2.0);
        warn_large_step(dt);
        ptw::EnsembleConfig cfg{n_traj, alpha, dt, t_end, 1, effective_seed(seed), workers};
        const double d = ptw::diffusion_coefficient(alpha).value;
        const ptw::GridSpec grid = x_min ? ptw::GridSpec{*x_min, *x_max, bins}
                                         : ptw::default_grid(d, t_end, half_width, bins);
        const ptw::DensityHistogram h = ptw::run_density(cfg, grid);
        {
            auto os = open_output(out);
            ptw::write_histogram_csv(os, h);
        }
        print_warnings(h.warnings);
        const auto q = ptw::quadrant_masses(h);
        const double se = std::sqrt(0.25 * 0.75 / static_cast<double>(n_traj));
        std::cout << std::setprecision(6) << "grid = [" << grid.x_min << ", " << grid.x_max << ")^2, " << grid.n_bins
                  << " bins per axis\n"
                  << "quadrant masses = " << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3]
                  << " (isotropic: 0.25 +- " << se << ")\n"
                  << "outside fraction = " << h.outside_fraction() << '\n'
                  << "second moment = " << ptw::second_moment(h) << " (exact law " << ptw::variance_law(t_end, alpha)
                  << ")\n";
        ptw::RunManifest m;
        m.command = "density";
        model.record(m.parameters, alpha);
        m.parameters.emplace_back("N", std::to_string(n_traj));
        m.parameters.emplace_back("dt", num(dt));
        m.parameters.emplace_back("T", num(t_end));
        m.parameters.emplace_back("seed", std::to_string(cfg.master_seed));
        m.parameters.emplace_back("workers", std::to_string(workers));
        m.parameters.emplace_back("bins", std::to_string(bins));
        if (x_min) {
            m.parameters.emplace_back("x-min", num(*x_min));
            m.parameters.emplace_back("x-max", num(*x_max));
        } else {
            m.parameters.emplace_back("half-width", num(half_width));
        }
        m.parameters.emplace_back("out", out);
        m.master_seed = cfg.master_seed;
        m.outputs = {out};
        write_manifest(m, clock);
    }
};

struct L1Command {
    ModelOptions model;
    std::vector<double> epsilons{1.0, 0.5, 0.2, 0.1};
    std::vector<double> times{0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
    std::size_t n_traj = 10000;
    double dt = 0.05;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    std::size_t bins = 61;
    double half_width = 6.0;
    bool self_test = false;
    std::string out = "l1.csv";

    void attach(CLI::App *app) {
        model.attach(app);
        app->add_option("--epsilons", epsilons, "scale ratios in (0, 1]")->delimiter(',')->capture_default_str();
        app->add_option("--times", times, "macroscopic output times, ascending")->delimiter(',')->capture_default_str();
        app->add_option("--N", n_traj, "number of trajectories")->capture_default_str();
        app->add_option("--dt", dt, "microscopic time step")->capture_default_str();
        app->add_option("--seed", seed, "master seed")->capture_default_str();
        app->add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str();
        app->add_option("--bins", bins, "bins per axis")->capture_default_str();
        app->add_option("--half-width", half_width, "grid half-width in kernel standard deviations")
            ->capture_default_str();
        app->add_flag("--self-test", self_test, "also histogram samples of the heat kernel itself");
        app->add_option("--out", out, "L1 CSV (t,l1,epsilon)")->capture_default_str();
    }

    void run() {
        Stopwatch clock;
        const auto [alpha, units] = model.resolve(1.0);
        warn_large_step(dt);
        const std::uint64_t s = effective_seed(seed);
        std::vector<std::string> outputs{out};
        {
            auto os = open_output(out);
            ptw::write_l1_header(os);
            for (double eps : epsilons) {
                ptw::L1Config cfg;
                cfg.alpha = alpha;
                cfg.epsilon = eps;
                cfg.t_macro = times;
                cfg.n_traj = n_traj;
                cfg.dt = dt;
                cfg.master_seed = s;
                cfg.workers = workers;
                cfg.half_width_sigmas = half_width;
                cfg.n_bins = bins;
                const ptw::L1Series series = ptw::l1_vs_diffusion_limit(cfg);
                print_warnings(series.warnings);
                ptw::write_l1_rows(os, series);
                std::cout << std::setprecision(6) << "epsilon = " << eps << ':';
                for (std::size_t k = 0; k < series.times.size(); ++k)
                    std::cout << "  t=" << series.times[k] << " L1=" << series.l1[k];
                std::cout << '\n';
            }
        }
        if (self_test) {
            const std::string self_out = sibling(out, "_selftest.csv");
            auto os = open_output(self_out);
            os << "t,l1_kernel_sample,noise_floor\n" << std::setprecision(17);
            const double d = ptw::diffusion_coefficient(alpha).value;
            for (double t : times) {
                const ptw::GridSpec grid = ptw::default_grid(d, t, half_width, bins);
                const auto st = ptw::heat_kernel_self_test({0.5 * d, t}, n_traj, grid, s);
                os << t << ',' << st.l1_vs_kernel << ',' << st.noise_floor << '\n';
                std::cout << std::setprecision(6) << "self-test t=" << t << ": L1(kernel sample) = " << st.l1_vs_kernel
                          << ", two-sample noise floor = " << st.noise_floor << '\n';
            }
            outputs.push_back(self_out);
        }
        ptw::RunManifest m;
        m.command = "l1";
        model.record(m.parameters, alpha);
        m.parameters.emplace_back("epsilons", join(epsilons));
        m.parameters.emplace_back("times", join(times));
        m.parameters.emplace_back("N", std::to_string(n_traj));
        m.parameters.emplace_back("dt", num(dt));
        m.parameters.emplace_back("seed", std::to_string(s));
        m.parameters.emplace_back("workers", std::to_string(workers));
        m.parameters.emplace_back("bins", std::to_string(bins));
        m.parameters.emplace_back("half-width", num(half_width));
        m.parameters.emplace_back("self-test", self_test ? "true" : "false");
        m.parameters.emplace_back("out", out);
        m.master_seed = s;
        m.outputs = outputs;
        write_manifest(m, clock);
    }
};

// ---------------------------------------------------------------- argument assembly

bool has_flag(const std::vector<std::string> &args, const std::string &key) {
    const std::string flag = "--" + key;
    for (const auto &a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

/// Expands "--config FILE" into --key=value arguments for keys not given on
/// the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string file;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            continue;
        }
        std::vector<std::string> extra;
        for (const auto &[k, v] : ptw::read_key_values_file(file)) {
            if (ptw::RunManifest::is_meta_key(k) || has_flag(args, k)) continue;
            extra.push_back("--" + k + "=" + v);
        }
        args.insert(args.end(), extra.begin(), extra.end());
        --i;
    }
    return args;
}

int run(std::vector<std::string> args);

int replay(const std::string &manifest_path, const std::optional<std::string> &out_override) {
    const ptw::RunManifest m = ptw::RunManifest::parse(ptw::read_key_values_file(manifest_path));
    std::vector<std::string> args{m.command};
    for (const auto &[k, v] : m.parameters) {
        if (k == "out" && out_override) continue;
        args.push_back("--" + k + "=" + v);
    }
    if (out_override) args.push_back("--out=" + *out_override);
    return run(args);
}

int run(std::vector<std::string> args) {
    CLI::App app{"Persistent Turning Walker: simulation and diffusion-limit analysis"};
    app.name("ptw");
    app.require_subcommand(1);
    app.set_version_flag("--version", ptw::kToolVersion);

    DcoefCommand dcoef;
    SimulateCommand simulate;
    VarianceCommand variance;
    DensityCommand density;
    L1Command l1;
    std::string manifest;
    std::optional<std::string> replay_out;

    dcoef.attach(app.add_subcommand("dcoef", "diffusion coefficient D(alpha)"));
    simulate.attach(app.add_subcommand("simulate", "one trajectory as CSV"));
    variance.attach(app.add_subcommand("variance", "ensemble mean-squared displacement and fit of D"));
    density.attach(app.add_subcommand("density", "histogram of final positions"));
    l1.attach(app.add_subcommand("l1", "L1 distance to the diffusion limit"));
    auto *rp = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    rp->add_option("manifest", manifest, "manifest file")->required();
    rp->add_option("--out", replay_out, "write to this path instead of the recorded one");

    args = expand_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "usage error: " << e.what() << " (see ptw --help)\n";
        return kExitUsage;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "dcoef") dcoef.run();
    else if (cmd == "simulate") simulate.run();
    else if (cmd == "variance") variance.run();
    else if (cmd == "density") density.run();
    else if (cmd == "l1") l1.run();
    else if (cmd == "replay") return replay(manifest, replay_out);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(std::move(args));
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ptw::NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
