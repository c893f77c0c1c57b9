#include "fixtures.hpp"
#include "oracles.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/grid.hpp"
#include "pdcmodes/pipeline.hpp"
#include "pdcmodes/schmidt.hpp"
#include "pdcmodes/tpa.hpp"

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace pdcmodes;

namespace {

SchmidtDecomposition synthetic(const std::vector<double>& lambdas) {
    const auto grid = polar_grid_with_step(1e-3, 16, 16);
    std::vector<SchmidtMode> modes;
    for (std::size_t p = 0; p < lambdas.size(); ++p) {
        SchmidtMode m;
        m.p = static_cast<int>(p);
        m.lambda = lambdas[p];
        m.profile = Eigen::VectorXcd::Zero(16);
        m.profile(static_cast<Eigen::Index>(p)) = 1.0 / std::sqrt(grid.dtheta);
        modes.push_back(m);
    }
    return SchmidtDecomposition(grid, 0, static_cast<int>(lambdas.size()), modes);
}

double overlap_abs(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, double dtheta) {
    return (a.cwiseAbs().array() * b.cwiseAbs().array()).sum() * dtheta;
}

}  // namespace

TEST(Decompose, SeparableKernelGivesSingleMode) {
    const auto grid = polar_grid_with_step(1e-3, 32, 16);
    Eigen::VectorXd g(32);
    for (Eigen::Index j = 0; j < 32; ++j) g(j) = std::exp(-std::pow((grid.theta[j] - 0.012) / 0.004, 2));
    RadialKernel k;
    k.l = 0;
    k.values = (g * g.transpose()).cast<cplx>();
    const auto dec = decompose(std::vector<RadialKernel>{k}, grid, 3);
    EXPECT_NEAR(dec.lambda(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(dec.lambda(0, 1), 0.0, 1e-12);
    const Eigen::VectorXd want = g / std::sqrt(g.squaredNorm() * grid.dtheta);
    EXPECT_LT((dec.mode(0, 0).profile - want.cast<cplx>()).norm(), 1e-10 * want.norm());
}

TEST(Decompose, RejectsNonFiniteKernel) {
    const auto grid = polar_grid_with_step(1e-3, 16, 16);
    RadialKernel k;
    k.values = Eigen::MatrixXcd::Identity(16, 16);
    k.values(3, 4) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(decompose(std::vector<RadialKernel>{k}, grid, 2), Error);
}

TEST(Decompose, InvariantsAtDefaultConfig) {
    const auto& a = fixtures::fig3_analysis();
    const auto& dec = a.decomposition;
    double sum = 0;
    for (const auto& m : dec.modes()) sum += m.lambda;
    EXPECT_NEAR(sum, 1.0, 1e-6);
    for (int l = -dec.l_max(); l <= dec.l_max(); ++l) {
        EXPECT_NEAR(dec.lambda(l, 0), dec.lambda(-l, 0), 1e-9);
        for (int p = 0; p < dec.p_max(); ++p) {
            if (p > 0) {
                EXPECT_GE(dec.lambda(l, p - 1), dec.lambda(l, p));
            }
            const auto& u = dec.mode(l, p).profile;
            Eigen::Index top = 0;
            u.cwiseAbs().maxCoeff(&top);
            EXPECT_NEAR(u(top).imag(), 0.0, 1e-12);
            EXPECT_GT(u(top).real(), 0.0);
            for (int q = 0; q < dec.p_max(); ++q) {
                const cplx ip = dec.mode(l, q).profile.dot(u) * a.grid.dtheta;
                EXPECT_NEAR(std::abs(ip - (p == q ? 1.0 : 0.0)), 0.0, 1e-6) << l << p << q;
            }
        }
    }
    EXPECT_EQ(dec.mode(3, 0).oam_phase(), cplx(0, -1));
}

TEST(Decompose, LowOrderRingModesShareShape) {
    const auto& a = fixtures::fig3_analysis();
    const auto& dec = a.decomposition;
    for (int l = 1; l <= 3; ++l)
        EXPECT_GT(overlap_abs(dec.mode(0, 0).profile, dec.mode(l, 0).profile, a.grid.dtheta), 0.99)
            << l;
    EXPECT_LT(overlap_abs(dec.mode(0, 0).profile, dec.mode(0, 1).profile, a.grid.dtheta), 0.1);
}

TEST(Decompose, ExpansionReproducesKernel) {
    // F_l = sum_p sigma_p e^{i beta_p} u_p u_p^T. At full rank this is exact;
    // truncated to p_max terms the residual is the optimal (Eckart-Young)
    // error sqrt(sum_{p >= p_max} sigma_p^2) from an independent SVD.
    const auto& a = fixtures::fig3_analysis();
    fixtures::WarningCapture quiet;
    auto kernels = radial_kernels(a.config, a.grid, 2, 0);
    const int n = static_cast<int>(a.grid.n_theta());
    const auto full = decompose(kernels, a.grid, n);
    for (int l = 0; l <= 2; ++l) {
        const auto& f = kernels[l].values;
        const Eigen::VectorXd sv =
            Eigen::BDCSVD<Eigen::MatrixXcd>(f * a.grid.dtheta).singularValues();
        for (int p_max : {8, n}) {
            Eigen::MatrixXcd approx = Eigen::MatrixXcd::Zero(f.rows(), f.cols());
            for (int p = 0; p < p_max; ++p) {
                const auto& m = full.mode(l, p);
                approx += m.singular_value * m.takagi_phase * m.profile * m.profile.transpose();
            }
            const double residual = (approx - f).norm() * a.grid.dtheta;
            const double optimal = std::sqrt(sv.tail(n - p_max).squaredNorm());
            EXPECT_NEAR(residual, optimal, 1e-6 * sv.norm()) << l << " " << p_max;
        }
    }
}

TEST(Decompose, GridConvergenceOfLeadingEigenvalue) {
    const auto coarse = analyze(fixtures::coarse(128));
    const auto& fine = fixtures::fig3_analysis();
    EXPECT_NEAR(coarse.decomposition.lambda(0, 0) / fine.decomposition.lambda(0, 0), 1.0, 0.01);
}

TEST(Redistribute, LowGainLimitRecoversLambda) {
    const auto& a = fixtures::fig3_analysis();
    const auto s = redistribute(a.decomposition, 1e-4);
    for (std::size_t i = 0; i < s.weights.size(); ++i)
        EXPECT_NEAR(s.weights[i], a.decomposition.modes()[i].lambda, 1e-8);
}

TEST(Redistribute, TwoModeOracleSharpens) {
    const auto dec = synthetic({0.7, 0.3});
    const auto s = redistribute(dec, 5.0);
    const auto want = oracle::redistributed({0.7, 0.3}, 5.0);
    EXPECT_NEAR(s.weight(0, 0), want[0], 1e-12);
    EXPECT_NEAR(s.weight(0, 1), want[1], 1e-12);
    EXPECT_GT(s.weight(0, 0), 0.7);
    EXPECT_NEAR(s.G, 5.0 / std::sqrt(0.7), 1e-12);
    EXPECT_NEAR(s.mode_gain(0, 0), 5.0, 1e-12);
}

TEST(Redistribute, HugeGainStaysFinite) {
    const std::vector<double> lambdas{0.4, 0.35, 0.25};
    const auto dec = synthetic(lambdas);
    for (double G0 : {30.0, 200.0, 800.0}) {
        const auto s = redistribute(dec, G0);
        const auto want = oracle::redistributed(lambdas, G0);
        double sum = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_TRUE(std::isfinite(s.weights[i]));
            EXPECT_NEAR(s.weights[i], want[i], 1e-12);
            sum += s.weights[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Redistribute, DefaultConfigMatchesRingPattern) {
    const auto& s = fixtures::fig3_analysis().spectrum;
    const auto pm = s.p_marginal();
    EXPECT_NEAR(pm[0], 0.86, 0.05);
    EXPECT_NEAR(pm[1], 0.09, 0.05);
    EXPECT_LT(pm.back(), 1e-3);
    const auto top = std::max_element(s.weights.begin(), s.weights.end()) - s.weights.begin();
    EXPECT_EQ(static_cast<std::size_t>(top), s.index(0, 0));
    double sum = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-9);
    const auto lm = s.l_marginal();
    for (int l = 1; l <= s.l_max; ++l) EXPECT_NEAR(lm[s.l_max + l], lm[s.l_max - l], 1e-12);
}

TEST(Redistribute, SharpeningIsMonotoneAndKeepsArgmax) {
    const auto& dec = fixtures::fig3_analysis().decomposition;
    double last_k = 1e300, last_koam = 1e300;
    for (double G0 : {0.1, 1.0, 3.0, 5.0, 7.6, 10.0, 14.0}) {
        const auto s = redistribute(dec, G0);
        const auto c = mode_counts(s);
        EXPECT_LE(c.K, last_k * (1 + 1e-12)) << G0;
        EXPECT_LE(c.K_oam, last_koam * (1 + 1e-12)) << G0;
        EXPECT_GE(c.K, c.K_oam);
        EXPECT_GE(c.K_oam, 1.0);
        last_k = c.K;
        last_koam = c.K_oam;
        const auto top = std::max_element(s.weights.begin(), s.weights.end()) - s.weights.begin();
        EXPECT_EQ(static_cast<std::size_t>(top), s.index(0, 0));
    }
}

TEST(Redistribute, RejectsNegativeGain) {
    EXPECT_THROW(redistribute(synthetic({1.0}), -1.0), Error);
}

TEST(ModeCounts, ParticipationNumbers) {
    const std::vector<double> uniform(7, 1.0 / 7);
    EXPECT_NEAR(participation_number(uniform), 7.0, 1e-12);
    const std::vector<double> single{1.0};
    EXPECT_DOUBLE_EQ(participation_number(single), 1.0);

    const auto s = redistribute(synthetic({1.0}), 3.0);
    const auto c = mode_counts(s);
    EXPECT_DOUBLE_EQ(c.K, 1.0);
    EXPECT_DOUBLE_EQ(c.K_oam, 1.0);
}

TEST(ModeCounts, AgreesWithDirectSums) {
    const auto& s = fixtures::fig3_analysis().spectrum;
    double k = 0;
    for (double w : s.weights) k += w * w;
    double koam = 0;
    for (double w : s.l_marginal()) koam += w * w;
    const auto c = mode_counts(s);
    EXPECT_NEAR(c.K, 1 / k, 1e-9);
    EXPECT_NEAR(c.K_oam, 1 / koam, 1e-9);
}

TEST(MeanIntensity, AzimuthallyUniformWithUnitIntegral) {
    const auto& a = fixtures::fig3_analysis();
    const auto m = mean_intensity(a.decomposition, a.spectrum, a.grid);
    double integral = 0;
    for (Eigen::Index j = 0; j < m.field.rows(); ++j) {
        const double ref = m.field(j, 0);
        for (Eigen::Index k = 0; k < m.field.cols(); ++k)
            EXPECT_NEAR(m.field(j, k), ref, 1e-12 * (1 + std::abs(ref)));
        EXPECT_NEAR(m.radial[static_cast<std::size_t>(j)], ref, 1e-12 * (1 + std::abs(ref)));
        integral += m.field.row(j).sum() * a.grid.area_weight(static_cast<std::size_t>(j));
    }
    EXPECT_NEAR(integral, 1.0, 1e-9);
    // Direct evaluation of sum Lambda |u|^2 / theta at a few nodes.
    for (std::size_t j : {10u, 60u, 120u}) {
        double direct = 0;
        for (const auto& mode : a.decomposition.modes())
            direct += a.spectrum.weight(mode.l, mode.p) *
                      std::norm(mode.profile(static_cast<Eigen::Index>(j))) / a.grid.theta[j];
        EXPECT_NEAR(m.radial[j] / m.radial[60], direct / [&] {
            double d = 0;
            for (const auto& mode : a.decomposition.modes())
                d += a.spectrum.weight(mode.l, mode.p) * std::norm(mode.profile(60)) / a.grid.theta[60];
            return d;
        }(), 1e-9);
    }
}

TEST(MeanIntensity, DarkCentreAtPiDistance) {
    auto c = fixtures::fig3();
    c.gap_distance = c.pi_distance;
    c.pump_power = 0;
    const auto a = analyze(c);
    const auto m = mean_intensity(a.decomposition, a.spectrum, a.grid);
    const double peak = *std::max_element(m.radial.begin(), m.radial.end());
    EXPECT_LT(m.radial.front(), 1e-3 * peak);
}

TEST(MeanIntensity, FewerRingsAtHigherGain) {
    const auto& a = fixtures::fig3_analysis();
    auto rings = [&](double G0) {
        const auto s = redistribute(a.decomposition, G0);
        return count_rings(mean_intensity(a.decomposition, s, a.grid).radial);
    };
    EXPECT_GT(rings(2.0), rings(10.0));
}
