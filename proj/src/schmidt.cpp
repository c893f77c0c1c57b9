#include "pdcmodes/schmidt.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace pdcmodes {

cplx SchmidtMode::oam_phase() const {
    constexpr cplx powers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return powers[((l % 4) + 4) % 4];
}

SchmidtDecomposition::SchmidtDecomposition(PolarGrid grid, int l_max, int p_max,
                                           std::vector<SchmidtMode> modes)
    : grid_(std::move(grid)), l_max_(l_max), p_max_(p_max), modes_(std::move(modes)) {
    if (modes_.size() != static_cast<std::size_t>((2 * l_max_ + 1) * p_max_))
        throw Error("SchmidtDecomposition: mode count does not match l_max, p_max");
}

std::size_t SchmidtDecomposition::index(int l, int p) const {
    if (std::abs(l) > l_max_ || p < 0 || p >= p_max_)
        throw Error("Schmidt mode index out of range");
    return static_cast<std::size_t>((l + l_max_) * p_max_ + p);
}

double SchmidtDecomposition::lambda_max() const {
    double best = 0;
    for (const auto& m : modes_) best = std::max(best, m.lambda);
    return best;
}

double SchmidtDecomposition::schmidt_number() const {
    std::vector<double> w(modes_.size());
    std::transform(modes_.begin(), modes_.end(), w.begin(), [](const auto& m) { return m.lambda; });
    return participation_number(w);
}

namespace {

struct PerL {
    Eigen::VectorXd singular;
    Eigen::MatrixXcd vectors;
    std::vector<cplx> phases;
};

PerL svd_of(const RadialKernel& kernel, const PolarGrid& grid, int p_max) {
    if (!kernel.values.allFinite()) throw Error("decompose: non-finite kernel entries");
    const Eigen::MatrixXcd scaled = kernel.values * grid.dtheta;
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    PerL out;
    out.singular = svd.singularValues().head(p_max);
    out.vectors = svd.matrixU().leftCols(p_max);
    out.phases.resize(p_max);
    for (int p = 0; p < p_max; ++p) {
        auto u = out.vectors.col(p);
        Eigen::Index at = 0;
        u.cwiseAbs().maxCoeff(&at);
        const cplx rot = std::polar(1.0, -std::arg(u(at)));
        u *= rot;
        // For a complex-symmetric kernel, u^H F conj(u) = sigma * e^{i beta}.
        const cplx z = u.dot(scaled * u.conjugate());
        out.phases[p] = std::abs(z) > 0 ? z / std::abs(z) : cplx(1.0, 0.0);
    }
    return out;
}

}  // namespace

SchmidtDecomposition decompose(std::span<const RadialKernel> kernels, const PolarGrid& grid,
                               int p_max, int threads) {
    if (p_max < 1) throw Error("decompose: p_max must be >= 1");
    if (kernels.empty()) throw Error("decompose: no kernels");
    int l_max = 0;
    for (const auto& k : kernels) l_max = std::max(l_max, std::abs(k.l));
    std::vector<const RadialKernel*> by_l(l_max + 1, nullptr);
    for (const auto& k : kernels)
        if (!by_l[std::abs(k.l)]) by_l[std::abs(k.l)] = &k;
    for (int l = 0; l <= l_max; ++l)
        if (!by_l[l]) throw Error("decompose: missing kernel for |l| = " + std::to_string(l));
    const auto n = static_cast<int>(grid.n_theta());
    if (p_max > n) throw Error("decompose: p_max exceeds number of theta nodes");
    for (const auto* k : by_l)
        if (k->values.rows() != n || k->values.cols() != n)
            throw Error("decompose: kernel shape does not match grid");

    std::vector<PerL> per_l(l_max + 1);
    parallel_for(static_cast<std::size_t>(l_max + 1), threads,
                 [&](std::size_t l) { per_l[l] = svd_of(*by_l[l], grid, p_max); });

    double total = 0;
    for (int l = -l_max; l <= l_max; ++l) total += per_l[std::abs(l)].singular.squaredNorm();
    if (!(total > 0)) throw Error("decompose: kernel has zero norm");

    std::vector<SchmidtMode> modes;
    modes.reserve((2 * l_max + 1) * p_max);
    const double profile_scale = 1.0 / std::sqrt(grid.dtheta);
    for (int l = -l_max; l <= l_max; ++l) {
        const auto& s = per_l[std::abs(l)];
        for (int p = 0; p < p_max; ++p) {
            SchmidtMode m;
            m.l = l;
            m.p = p;
            m.singular_value = s.singular(p);
            m.lambda = s.singular(p) * s.singular(p) / total;
            m.profile = s.vectors.col(p) * profile_scale;
            m.takagi_phase = s.phases[p];
            modes.push_back(std::move(m));
        }
    }
    return SchmidtDecomposition(grid, l_max, p_max, std::move(modes));
}

std::vector<double> GainedSpectrum::l_marginal() const {
    std::vector<double> out(2 * l_max + 1, 0.0);
    for (int l = -l_max; l <= l_max; ++l)
        for (int p = 0; p < p_max; ++p) out[l + l_max] += weight(l, p);
    return out;
}

std::vector<double> GainedSpectrum::p_marginal() const {
    std::vector<double> out(p_max, 0.0);
    for (int l = -l_max; l <= l_max; ++l)
        for (int p = 0; p < p_max; ++p) out[p] += weight(l, p);
    return out;
}

namespace {

// log(sinh^2 x) for x > 0, stable for large x.
double log_sinh_sq(double x) {
    if (x > 20.0) return 2.0 * x + 2.0 * std::log1p(-std::exp(-2.0 * x)) - std::log(4.0);
    return 2.0 * std::log(std::sinh(x));
}

}  // namespace

GainedSpectrum redistribute(const SchmidtDecomposition& dec, double G0) {
    if (!(G0 >= 0)) throw Error("redistribute: G0 must be >= 0");
    GainedSpectrum out;
    out.l_max = dec.l_max();
    out.p_max = dec.p_max();
    out.G0 = G0;
    const double lambda_max = dec.lambda_max();
    out.G = G0 / std::sqrt(lambda_max);
    const auto n = dec.size();
    out.weights.assign(n, 0.0);
    out.mode_gains.assign(n, 0.0);
    const auto& modes = dec.modes();
    for (std::size_t i = 0; i < n; ++i) out.mode_gains[i] = out.G * std::sqrt(modes[i].lambda);

    if (G0 == 0) {
        for (std::size_t i = 0; i < n; ++i) out.weights[i] = modes[i].lambda;
        return out;
    }
    std::vector<double> logs(n, -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (out.mode_gains[i] > 0) logs[i] = log_sinh_sq(out.mode_gains[i]);
        top = std::max(top, logs[i]);
    }
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.weights[i] = std::exp(logs[i] - top);
        sum += out.weights[i];
    }
    for (auto& w : out.weights) w /= sum;
    return out;
}

double participation_number(std::span<const double> weights) {
    double sq = 0;
    for (double w : weights) sq += w * w;
    return sq > 0 ? 1.0 / sq : 0.0;
}

ModeCounts mode_counts(const GainedSpectrum& spectrum) {
    const auto marginal = spectrum.l_marginal();
    return {participation_number(spectrum.weights), participation_number(marginal)};
}

MeanIntensity mean_intensity(const SchmidtDecomposition& dec, const GainedSpectrum& spectrum,
                             const PolarGrid& grid) {
    const auto n = grid.n_theta();
    if (dec.grid().n_theta() != n || spectrum.weights.size() != dec.size())
        throw Error("mean_intensity: inconsistent grids");
    MeanIntensity out;
    out.radial.assign(n, 0.0);
    for (std::size_t i = 0; i < dec.size(); ++i) {
        const auto& m = dec.modes()[i];
        const double w = spectrum.weights[i];
        if (w == 0) continue;
        for (std::size_t j = 0; j < n; ++j)
            out.radial[j] += w * std::norm(m.profile(static_cast<Eigen::Index>(j)));
    }
    double integral = 0;
    for (std::size_t j = 0; j < n; ++j) {
        out.radial[j] /= grid.theta[j];
        integral += out.radial[j] * grid.theta[j] * grid.dtheta;
    }
    integral *= 2.0 * std::numbers::pi;
    if (integral > 0)
        for (auto& v : out.radial) v /= integral;
    out.field.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.n_phi()));
    for (std::size_t j = 0; j < n; ++j) out.field.row(static_cast<Eigen::Index>(j)).setConstant(out.radial[j]);
    return out;
}

int count_rings(std::span<const double> radial, double fraction) {
    if (radial.size() < 3) return 0;
    const double peak = *std::max_element(radial.begin(), radial.end());
    int rings = 0;
    for (std::size_t j = 0; j < radial.size(); ++j) {
        const double left = j == 0 ? -1.0 : radial[j - 1];
        const double right = j + 1 == radial.size() ? -1.0 : radial[j + 1];
        if (radial[j] > left && radial[j] >= right && radial[j] > fraction * peak) ++rings;
    }
    return rings;
}

}  // namespace pdcmodes
