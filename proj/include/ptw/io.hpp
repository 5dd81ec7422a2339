// CSV emission and flat key=value manifests.
#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ios>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ensemble.hpp"
#include "sampler.hpp"

namespace ptw {

inline constexpr const char *kToolVersion = "1.0.0";

namespace detail {

/// Fixes precision to 17 significant digits for the lifetime of the guard.
class FullPrecision {
public:
    explicit FullPrecision(std::ostream &os) : os_(os), flags_(os.flags()), prec_(os.precision()) {
        os_.unsetf(std::ios::floatfield);
        os_ << std::setprecision(17);
    }
    ~FullPrecision() {
        os_.flags(flags_);
        os_.precision(prec_);
    }
    FullPrecision(const FullPrecision &) = delete;
    FullPrecision &operator=(const FullPrecision &) = delete;

private:
    std::ostream &os_;
    std::ios::fmtflags flags_;
    std::streamsize prec_;
};

} // namespace detail

inline void write_path_csv(std::ostream &os, const std::vector<PtwState> &path) {
    detail::FullPrecision guard(os);
    os << "t,x1,x2,theta,kappa\n";
    for (const auto &s : path) os << s.t << ',' << s.x1 << ',' << s.x2 << ',' << s.theta << ',' << s.kappa << '\n';
}

inline void write_variance_csv(std::ostream &os, const VarianceSeries &v) {
    detail::FullPrecision guard(os);
    os << "t,mean_x1,mean_x2,msd,stderr\n";
    for (std::size_t k = 0; k < v.size(); ++k)
        os << v.times[k] << ',' << v.mean_x1[k] << ',' << v.mean_x2[k] << ',' << v.msd[k] << ',' << v.std_err[k]
           << '\n';
}

inline void write_fit_csv(std::ostream &os, const FitReport &r) {
    detail::FullPrecision guard(os);
    os << "d_hat,t_lo,t_hi,residual_rms,d_theory,rel_error,n_points\n";
    os << r.d_hat << ',' << r.t_lo << ',' << r.t_hi << ',' << r.residual_rms << ',' << r.d_theory << ','
       << r.rel_error << ',' << r.n_points << '\n';
}

inline void write_histogram_csv(std::ostream &os, const DensityHistogram &h) {
    detail::FullPrecision guard(os);
    os << "x_center,y_center,density\n";
    for (std::size_t ix = 0; ix < h.grid.n_bins; ++ix)
        for (std::size_t iy = 0; iy < h.grid.n_bins; ++iy)
            os << h.grid.center(ix) << ',' << h.grid.center(iy) << ',' << h.density_at(ix, iy) << '\n';
}

inline void write_l1_header(std::ostream &os) { os << "t,l1,epsilon\n"; }

inline void write_l1_rows(std::ostream &os, const L1Series &s) {
    detail::FullPrecision guard(os);
    for (std::size_t k = 0; k < s.times.size(); ++k) os << s.times[k] << ',' << s.l1[k] << ',' << s.epsilon << '\n';
}

/// Ordered key=value pairs. Blank lines and lines starting with '#' are skipped.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline KeyValues read_key_values(std::istream &is) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
        kv.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return kv;
}

inline KeyValues read_key_values_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_key_values(in);
}

/// Reproducibility record written next to every output.
struct RunManifest {
    std::string command;
    KeyValues parameters; ///< keys are the long flag names of the command
    std::uint64_t master_seed = 0;
    std::string tool_version = kToolVersion;
    double wall_clock_seconds = 0.0;
    std::vector<std::string> outputs;

    static bool is_meta_key(const std::string &k) {
        return k == "command" || k == "master_seed" || k == "tool_version" || k == "wall_clock_seconds" ||
               k == "outputs";
    }

    void write(std::ostream &os) const {
        detail::FullPrecision guard(os);
        os << "command=" << command << '\n';
        for (const auto &[k, v] : parameters) os << k << '=' << v << '\n';
        os << "master_seed=" << master_seed << '\n';
        os << "tool_version=" << tool_version << '\n';
        os << "wall_clock_seconds=" << wall_clock_seconds << '\n';
        os << "outputs=";
        for (std::size_t i = 0; i < outputs.size(); ++i) os << (i ? ";" : "") << outputs[i];
        os << '\n';
    }

    static RunManifest parse(const KeyValues &kv) {
        RunManifest m;
        m.tool_version.clear();
        for (const auto &[k, v] : kv) {
            if (k == "command") m.command = v;
            else if (k == "master_seed") m.master_seed = std::stoull(v);
            else if (k == "tool_version") m.tool_version = v;
            else if (k == "wall_clock_seconds") m.wall_clock_seconds = std::stod(v);
            else if (k == "outputs") {
                std::stringstream ss(v);
                std::string item;
                while (std::getline(ss, item, ';'))
                    if (!item.empty()) m.outputs.push_back(item);
            } else m.parameters.emplace_back(k, v);
        }
        if (m.command.empty()) throw std::invalid_argument("manifest has no command");
        return m;
    }
};

} // namespace ptw
