#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <ptw/io.hpp>

namespace {

std::vector<std::string> lines_of(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

} // namespace

TEST(Csv, PathHeaderAndFullPrecision) {
    ptw::PtwState s{0.1, 1.0 / 3.0, -2.0, 0.5, 0.25, 0.0};
    std::ostringstream os;
    os << std::setprecision(3);
    ptw::write_path_csv(os, {s});
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "t,x1,x2,theta,kappa");
    EXPECT_EQ(lines[1], "0.10000000000000001,0.33333333333333331,-2,0.5,0.25");
    EXPECT_EQ(os.precision(), 3);
}

TEST(Csv, VarianceAndFitHeaders) {
    ptw::VarianceSeries v;
    v.times = {0.0, 1.0};
    v.mean_x1 = {0.0, 0.1};
    v.mean_x2 = {0.0, -0.1};
    v.msd = {0.0, 2.0};
    v.std_err = {0.0, 0.5};
    v.n_traj = 4;
    std::ostringstream os;
    ptw::write_variance_csv(os, v);
    auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "t,mean_x1,mean_x2,msd,stderr");
    EXPECT_EQ(lines[2], "1,0.10000000000000001,-0.10000000000000001,2,0.5");

    ptw::FitReport r;
    r.d_hat = 1.5;
    r.t_lo = 600;
    r.t_hi = 1200;
    r.d_theory = 1.7182818284590451;
    r.rel_error = 0.1;
    r.n_points = 31;
    std::ostringstream fs;
    ptw::write_fit_csv(fs, r);
    lines = lines_of(fs.str());
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "d_hat,t_lo,t_hi,residual_rms,d_theory,rel_error,n_points");
    EXPECT_NE(lines[1].find("1.7182818284590451"), std::string::npos);
}

TEST(Csv, HistogramRowsCoverGrid) {
    const ptw::GridSpec grid{-1.0, 1.0, 4};
    const auto h = ptw::histogram({{0.1, 0.1}, {-0.6, 0.7}}, grid);
    std::ostringstream os;
    ptw::write_histogram_csv(os, h);
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 1u + 16u);
    EXPECT_EQ(lines[0], "x_center,y_center,density");
    EXPECT_EQ(lines[1], "-0.75,-0.75,0");
}

TEST(Csv, L1Rows) {
    ptw::L1Series s;
    s.epsilon = 0.1;
    s.times = {1.0, 5.0};
    s.l1 = {0.2, 0.19};
    std::ostringstream os;
    ptw::write_l1_header(os);
    ptw::write_l1_rows(os, s);
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "t,l1,epsilon");
    EXPECT_EQ(lines[1], "1,0.20000000000000001,0.10000000000000001");
}

TEST(KeyValues, SkipsCommentsAndTrims) {
    std::istringstream in("# comment\n\n  alpha = 0.5 \nT=120\r\nepsilons=1,0.1\n");
    const auto kv = ptw::read_key_values(in);
    ASSERT_EQ(kv.size(), 3u);
    EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"alpha", "0.5"}));
    EXPECT_EQ(kv[1].second, "120");
    EXPECT_EQ(kv[2].second, "1,0.1");
}

TEST(KeyValues, RejectsLineWithoutEquals) {
    std::istringstream in("alpha=1\nnonsense\n");
    EXPECT_THROW(ptw::read_key_values(in), std::invalid_argument);
}

TEST(Manifest, WriteThenParse) {
    ptw::RunManifest m;
    m.command = "variance";
    m.parameters = {{"alpha", "0.10000000000000001"}, {"N", "2000"}, {"out", "v.csv"}};
    m.master_seed = 18446744073709551615ull;
    m.wall_clock_seconds = 1.25;
    m.outputs = {"v.csv", "v_fit.csv"};
    std::stringstream ss;
    m.write(ss);
    const auto back = ptw::RunManifest::parse(ptw::read_key_values(ss));
    EXPECT_EQ(back.command, m.command);
    EXPECT_EQ(back.parameters, m.parameters);
    EXPECT_EQ(back.master_seed, m.master_seed);
    EXPECT_EQ(back.tool_version, ptw::kToolVersion);
    EXPECT_DOUBLE_EQ(back.wall_clock_seconds, 1.25);
    EXPECT_EQ(back.outputs, m.outputs);
}

TEST(Manifest, RequiresCommand) {
    std::istringstream in("alpha=1\n");
    EXPECT_THROW(ptw::RunManifest::parse(ptw::read_key_values(in)), std::invalid_argument);
}

TEST(Property, DoublesSurviveCsvRoundTrip) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> mag(-300.0, 300.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        ptw::PtwState s{};
        s.t = std::abs(unit(gen)) * std::pow(10.0, mag(gen) / 10.0);
        s.x1 = unit(gen) * std::pow(10.0, mag(gen));
        s.x2 = unit(gen);
        s.theta = unit(gen) * 1e6;
        s.kappa = unit(gen) * 1e-300;
        std::ostringstream os;
        ptw::write_path_csv(os, {s});
        const auto row = lines_of(os.str()).at(1);
        std::stringstream ss(row);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
        ASSERT_EQ(v.size(), 5u);
        ASSERT_EQ(v[0], s.t);
        ASSERT_EQ(v[1], s.x1);
        ASSERT_EQ(v[2], s.x2);
        ASSERT_EQ(v[3], s.theta);
        ASSERT_EQ(v[4], s.kappa);
    }
}
