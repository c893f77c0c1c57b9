#include "pdcmodes/reconstruct.hpp"

#include "pdcmodes/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pdcmodes {

std::vector<double> signed_theta(const PolarGrid& grid) {
    const auto n = grid.n_theta();
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out[n - 1 - i] = -grid.theta[i];
        out[n + i] = grid.theta[i];
    }
    return out;
}

namespace {

void check_frame(const Frame& frame, const PolarGrid& grid) {
    if (frame.pixels.size() != grid.n_theta() * grid.n_phi())
        throw Error("frame does not match grid");
}

std::vector<std::size_t> sector_nodes(const PolarGrid& grid, double center, double half_angle) {
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k < grid.n_phi(); ++k) {
        double d = std::fmod(std::abs(grid.phi[k] - center), two_pi);
        d = std::min(d, two_pi - d);
        if (d <= half_angle + 1e-12) nodes.push_back(k);
    }
    return nodes;
}

}  // namespace

Eigen::VectorXd radial_sector_reduce(const Frame& frame, const PolarGrid& grid,
                                     double half_angle) {
    check_frame(frame, grid);
    if (!(2.0 * half_angle >= grid.dphi))
        throw Error("radial sector is narrower than one azimuthal node");
    const auto forward = sector_nodes(grid, 0.0, half_angle);
    const auto backward = sector_nodes(grid, std::numbers::pi, half_angle);
    const auto n = grid.n_theta();
    const auto n_phi = grid.n_phi();
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * n));
    for (std::size_t j = 0; j < n; ++j) {
        const float* row = &frame.pixels[j * n_phi];
        double pos = 0, neg = 0;
        for (auto k : forward) pos += row[k];
        for (auto k : backward) neg += row[k];
        const double w = grid.theta[j] * grid.dphi;
        out(static_cast<Eigen::Index>(n + j)) = pos * w;
        out(static_cast<Eigen::Index>(n - 1 - j)) = neg * w;
    }
    return out;
}

Eigen::VectorXd azimuth_annulus_reduce(const Frame& frame, const PolarGrid& grid,
                                       double theta_center, double half_width) {
    check_frame(frame, grid);
    if (!(half_width > 0)) throw Error("annulus half width must be positive");
    if (theta_center - half_width > grid.theta_max() || theta_center + half_width < 0)
        throw Error("annulus lies outside the grid");
    const auto n_phi = grid.n_phi();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_phi));
    int rows = 0;
    for (std::size_t j = 0; j < grid.n_theta(); ++j) {
        if (std::abs(grid.theta[j] - theta_center) > half_width) continue;
        ++rows;
        const double w = grid.theta[j] * grid.dtheta;
        const float* row = &frame.pixels[j * n_phi];
        for (std::size_t k = 0; k < n_phi; ++k) out(static_cast<Eigen::Index>(k)) += row[k] * w;
    }
    if (rows == 0) throw Error("annulus contains no theta node");
    return out;
}

Eigen::VectorXd radial_profile(const Frame& frame, const PolarGrid& grid) {
    check_frame(frame, grid);
    const auto n_phi = grid.n_phi();
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.n_theta()));
    for (std::size_t j = 0; j < grid.n_theta(); ++j) {
        double s = 0;
        for (std::size_t k = 0; k < n_phi; ++k) s += frame.pixels[j * n_phi + k];
        out(static_cast<Eigen::Index>(j)) = s / static_cast<double>(n_phi);
    }
    return out;
}

CovarianceAccumulator::CovarianceAccumulator(Eigen::Index dim)
    : mean_(Eigen::VectorXd::Zero(dim)), comoment_(Eigen::MatrixXd::Zero(dim, dim)) {}

void CovarianceAccumulator::add(const Eigen::VectorXd& sample) {
    if (count_ == 0 && mean_.size() == 0) {
        mean_ = Eigen::VectorXd::Zero(sample.size());
        comoment_ = Eigen::MatrixXd::Zero(sample.size(), sample.size());
    }
    if (sample.size() != mean_.size()) throw Error("covariance: sample length changed");
    ++count_;
    const Eigen::VectorXd delta = sample - mean_;
    mean_ += delta / static_cast<double>(count_);
    const double f = static_cast<double>(count_ - 1) / static_cast<double>(count_);
    comoment_.selfadjointView<Eigen::Lower>().rankUpdate(delta, f);
}

void CovarianceAccumulator::merge(const CovarianceAccumulator& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    if (other.mean_.size() != mean_.size()) throw Error("covariance: merging different lengths");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const Eigen::VectorXd delta = other.mean_ - mean_;
    comoment_ += other.comoment_;
    comoment_.selfadjointView<Eigen::Lower>().rankUpdate(delta, na * nb / (na + nb));
    mean_ += delta * (nb / (na + nb));
    count_ += other.count_;
}

Eigen::MatrixXd CovarianceAccumulator::covariance() const {
    if (count_ < 2) throw Error("covariance needs at least two frames");
    Eigen::MatrixXd out = comoment_.selfadjointView<Eigen::Lower>();
    return out / static_cast<double>(count_ - 1);
}

CovarianceMatrix to_covariance_matrix(const CovarianceAccumulator& acc, std::string coordinate,
                                      std::vector<double> coords) {
    CovarianceMatrix out;
    out.values = acc.covariance();
    out.mean = acc.mean();
    out.count = acc.count();
    out.coordinate = std::move(coordinate);
    out.coords = std::move(coords);
    if (out.coords.empty()) {
        out.coords.resize(static_cast<std::size_t>(out.values.rows()));
        std::iota(out.coords.begin(), out.coords.end(), 0.0);
    }
    if (out.coords.size() != static_cast<std::size_t>(out.values.rows()))
        throw Error("covariance: coordinate count does not match sample length");
    return out;
}

CovarianceMatrix covariance(std::span<const Eigen::VectorXd> samples, std::string coordinate,
                            std::vector<double> coords) {
    if (samples.size() < 2) throw Error("covariance needs at least two frames");
    CovarianceAccumulator acc(samples.front().size());
    for (const auto& s : samples) acc.add(s);
    return to_covariance_matrix(acc, std::move(coordinate), std::move(coords));
}

QuadrantMass quadrant_mass(const CovarianceMatrix& cov) {
    const auto size = cov.values.rows();
    if (size % 2 != 0) throw Error("quadrant_mass: expects a signed-theta covariance");
    const auto n = size / 2;
    QuadrantMass out;
    out.auto_mass = cov.values.topLeftCorner(n, n).cwiseAbs().sum() +
                    cov.values.bottomRightCorner(n, n).cwiseAbs().sum();
    out.cross_mass = cov.values.topRightCorner(n, n).cwiseAbs().sum() +
                     cov.values.bottomLeftCorner(n, n).cwiseAbs().sum();
    return out;
}

RadialModes radial_modes_from_cov(const CovarianceMatrix& cov, double dtheta,
                                  const RadialModeOptions& options) {
    const auto size = cov.values.rows();
    if (size % 2 != 0 || size < 2) throw Error("radial_modes_from_cov: expects a signed-theta covariance");
    if (!(dtheta > 0)) throw Error("radial_modes_from_cov: dtheta must be positive");
    const auto n = size / 2;

    // Fold the negative-theta half onto the positive nodes: signed index
    // n - 1 - i is -theta_i.
    Eigen::MatrixXd block(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (options.use_cross) {
                block(i, j) = 0.5 * (cov.values(n + i, n - 1 - j) + cov.values(n + j, n - 1 - i));
            } else {
                block(i, j) = 0.5 * (cov.values(n + i, n + j) + cov.values(n - 1 - i, n - 1 - j));
            }
        }
    }

    std::vector<int> support;
    if (cov.mean.size() == size) {
        Eigen::VectorXd mean(n);
        for (Eigen::Index i = 0; i < n; ++i) mean(i) = 0.5 * (cov.mean(n + i) + cov.mean(n - 1 - i));
        const double top = mean.maxCoeff();
        for (Eigen::Index i = 0; i < n; ++i)
            if (mean(i) >= options.support_fraction * top) support.push_back(static_cast<int>(i));
    } else {
        support.resize(static_cast<std::size_t>(n));
        std::iota(support.begin(), support.end(), 0);
    }
    const auto m = static_cast<Eigen::Index>(support.size());
    if (options.p_rec < 1 || options.p_rec > m)
        throw Error("radial_modes_from_cov: p_rec must be between 1 and the support size");

    Eigen::MatrixXd root(m, m);
    double negative = 0, total = 0;
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            const double v = block(support[a], support[b]);
            total += std::abs(v);
            if (v < 0) negative -= v;
            root(a, b) = std::sqrt(std::max(v, 0.0));
        }
    }
    RadialModes out;
    out.clipped_fraction = total > 0 ? negative / total : 0.0;
    if (out.clipped_fraction > 0.05) {
        std::ostringstream msg;
        msg << "radial covariance: clipped negative mass is " << 100.0 * out.clipped_fraction
            << "% of the block";
        warn(msg.str());
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(root, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    const double lead = s.head(options.p_rec).sum();
    if (!(lead > 0)) throw Error("radial_modes_from_cov: covariance block is zero");
    out.support = support;
    out.theta.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.theta[i] = cov.coords.empty() ? 0.0 : cov.coords[n + i];
    out.profiles = Eigen::MatrixXd::Zero(n, options.p_rec);
    for (int p = 0; p < options.p_rec; ++p) {
        out.weights.push_back(s(p) / lead);
        out.singular_values.push_back(s(p));
        Eigen::VectorXd u = svd.matrixU().col(p);
        Eigen::Index at = 0;
        u.cwiseAbs().maxCoeff(&at);
        if (u(at) < 0) u = -u;
        for (Eigen::Index a = 0; a < m; ++a) out.profiles(support[a], p) = u(a) / std::sqrt(dtheta);
    }
    return out;
}

AzimuthProfile dphi_average(const CovarianceMatrix& cov) {
    const auto n = cov.values.rows();
    if (n < 1 || cov.values.cols() != n) throw Error("dphi_average: covariance must be square");
    AzimuthProfile out;
    out.dphi.resize(static_cast<std::size_t>(n));
    out.values.assign(static_cast<std::size_t>(n), 0.0);
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        double sum = 0;
        for (Eigen::Index k = 0; k < n; ++k) sum += cov.values(k, (k - m + n) % n);
        out.dphi[m] = m * step;
        out.values[m] = sum / static_cast<double>(n);
    }
    return out;
}

double OAMSpectrum::weight(int l) const {
    const auto a = static_cast<std::size_t>(std::abs(l));
    return a < weights.size() ? weights[a] : 0.0;
}

std::vector<double> oam_model(std::span<const double> raw_weights, double background,
                              std::span<const double> dphi) {
    std::vector<double> out(dphi.size());
    for (std::size_t m = 0; m < dphi.size(); ++m) {
        double s = raw_weights.empty() ? 0.0 : raw_weights[0];
        for (std::size_t l = 1; l < raw_weights.size(); ++l)
            s += 2.0 * raw_weights[l] * std::cos(static_cast<double>(l) * dphi[m]);
        out[m] = s * s + background;
    }
    return out;
}

namespace {

struct FitResult {
    Eigen::VectorXd w;  ///< raw weights 0..l_fit
    double background = 0;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// The background enters linearly, so for given weights its optimum is
// min(0, mean(data - s^2)); the search runs over the weights only.
class OamObjective {
public:
    OamObjective(const Eigen::MatrixXd& basis, const Eigen::VectorXd& data)
        : basis_(basis), data_(data) {}

    double evaluate(const Eigen::VectorXd& w, Eigen::VectorXd& r, double& b,
                    Eigen::MatrixXd* jac) const {
        const Eigen::VectorXd s = basis_ * w;
        const Eigen::VectorXd sq = s.cwiseAbs2();
        b = std::min(0.0, (data_ - sq).mean());
        r = sq.array() + b - data_.array();
        if (jac) {
            jac->resize(data_.size(), w.size());
            for (Eigen::Index l = 0; l < w.size(); ++l) {
                jac->col(l) = 2.0 * s.cwiseProduct(basis_.col(l));
                if (b < 0) jac->col(l).array() -= jac->col(l).mean();
            }
        }
        return 0.5 * r.squaredNorm();
    }

private:
    const Eigen::MatrixXd& basis_;
    const Eigen::VectorXd& data_;
};

FitResult levenberg_marquardt(const OamObjective& objective, Eigen::VectorXd w,
                              int max_iterations) {
    const auto n = w.size();
    w = w.cwiseMax(0.0);
    FitResult out;
    Eigen::VectorXd r, r_new;
    Eigen::MatrixXd J;
    double b = 0, b_new = 0;
    double cost = objective.evaluate(w, r, b, &J);
    double mu = 1e-3;
    for (int it = 1; it <= max_iterations; ++it) {
        out.iterations = it;
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        // Stationary for the bound-constrained problem: no free direction
        // with a descent component.
        double stationarity = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (w(i) > 0 || g(i) < 0) stationarity = std::max(stationarity, std::abs(g(i)));
        if (stationarity <= 1e-14 * (1.0 + cost)) {
            out.converged = true;
            break;
        }
        Eigen::MatrixXd damped = A;
        for (Eigen::Index i = 0; i < n; ++i) damped(i, i) += mu * (A(i, i) + 1e-12);
        const Eigen::VectorXd w_new = (w - damped.ldlt().solve(g)).cwiseMax(0.0);
        const double cost_new = objective.evaluate(w_new, r_new, b_new, nullptr);
        if (std::isfinite(cost_new) && cost_new < cost) {
            const double gain = cost - cost_new;
            const double move = (w_new - w).norm();
            w = w_new;
            cost = objective.evaluate(w, r, b, &J);
            mu = std::max(mu / 3.0, 1e-12);
            if (gain <= 1e-12 * cost || move <= 1e-10 * w.norm()) {
                out.converged = true;
                break;
            }
        } else {
            mu *= 4.0;
            if (mu > 1e12) {
                out.converged = true;
                break;
            }
        }
    }
    out.w = w;
    out.background = b;
    out.cost = cost;
    return out;
}

Eigen::VectorXd cosine_start(const std::vector<double>& g, const std::vector<double>& dphi,
                             int l_fit) {
    Eigen::VectorXd w(l_fit + 1);
    const double n = static_cast<double>(g.size());
    for (int l = 0; l <= l_fit; ++l) {
        double sum = 0;
        for (std::size_t m = 0; m < g.size(); ++m) sum += g[m] * std::cos(l * dphi[m]);
        w(l) = sum / n;
    }
    return w;
}

}  // namespace

OAMSpectrum fit_oam_weights(const AzimuthProfile& profile, int l_fit, int max_iterations) {
    const auto n = profile.values.size();
    if (l_fit < 0) throw Error("fit_oam_weights: l_fit must be >= 0");
    if (n != profile.dphi.size() || n < static_cast<std::size_t>(2 * l_fit + 3))
        throw Error("fit_oam_weights: l_fit exceeds the resolvable azimuthal bandwidth");

    double scale = 0;
    for (double v : profile.values) scale = std::max(scale, std::abs(v));
    if (!(scale > 0) || !std::isfinite(scale)) throw Error("fit_oam_weights: profile is zero or not finite");
    Eigen::VectorXd data(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m) data(m) = profile.values[m] / scale;

    Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), l_fit + 1);
    for (std::size_t m = 0; m < n; ++m)
        for (int l = 0; l <= l_fit; ++l)
            basis(m, l) = l == 0 ? 1.0 : 2.0 * std::cos(l * profile.dphi[m]);

    OAMSpectrum out;
    out.l_fit = l_fit;
    if (l_fit == 0) {
        // A constant profile: the weight is trivially 1 and b only matters
        // when the mean is negative.
        const double mean = data.mean();
        out.weights = {1.0};
        out.amplitude = std::max(mean, 0.0) * scale;
        out.background = std::min(mean, 0.0) * scale;
        out.residual = std::sqrt((data.array() - mean).square().mean()) * scale;
        return out;
    }

    const double lowest = data.minCoeff();
    std::vector<double> g(n);
    for (std::size_t m = 0; m < n; ++m) g[m] = std::sqrt(std::max(data(m) - lowest, 0.0));

    // The profile only fixes |s|; alternative starts flip the sign of s past
    // each near-zero local minimum of |s|.
    std::vector<double> flipped = g;
    const double g_top = *std::max_element(g.begin(), g.end());
    double sign = 1.0;
    for (std::size_t m = 0; m < n; ++m) {
        const bool minimum = m > 0 && m + 1 < n && g[m] <= g[m - 1] && g[m] <= g[m + 1];
        flipped[m] = sign * g[m];
        if (minimum && g[m] < 0.1 * g_top) sign = -sign;
    }

    std::vector<Eigen::VectorXd> starts;
    for (const auto* source : {&g, &flipped}) starts.push_back(cosine_start(*source, profile.dphi, l_fit));
    // Geometric spectra w_l ~ r^|l| scaled to the peak of the profile.
    const double level = std::sqrt(std::max(data.maxCoeff() - std::min(0.0, lowest), 1e-12));
    for (double ratio : {1.0, 0.8, 0.6, 0.4, 0.2}) {
        Eigen::VectorXd x(l_fit + 1);
        double norm = 0;
        for (int l = 0; l <= l_fit; ++l) {
            x(l) = std::pow(ratio, l);
            norm += (l == 0 ? 1.0 : 2.0) * x(l);
        }
        starts.push_back(x * (level / norm));
    }

    const OamObjective objective(basis, data);
    FitResult best;
    bool any = false;
    for (auto& x : starts) {
        x = x.cwiseMax(0.0);
        if (x.sum() <= 0) x(0) = std::sqrt(std::max(data.mean(), 1e-12));
        const auto fit = levenberg_marquardt(objective, x, max_iterations);
        any = any || fit.converged;
        if (fit.converged && fit.cost < best.cost) best = fit;
    }
    if (!any) throw Error("fit_oam_weights: no convergence within the iteration limit");

    out.iterations = best.iterations;
    const auto& w = best.w;
    const double total = w(0) + 2.0 * w.tail(l_fit).sum();
    if (!(total > 0)) throw Error("fit_oam_weights: fitted weights vanish");
    out.weights.resize(static_cast<std::size_t>(l_fit + 1));
    double sq = 0;
    for (int l = 0; l <= l_fit; ++l) {
        out.weights[l] = w(l) / total;
        sq += (l == 0 ? 1.0 : 2.0) * out.weights[l] * out.weights[l];
    }
    out.K_oam = 1.0 / sq;
    out.amplitude = total * total * scale;
    out.background = best.background * scale;
    out.residual = std::sqrt(2.0 * best.cost / static_cast<double>(n)) * scale;
    return out;
}

G2Estimate g2_and_K(std::span<const double> intensities) {
    const auto n = intensities.size();
    if (n < 2) throw Error("g2 needs at least two samples");
    if (n < 100) warn("g2 estimated from fewer than 100 samples");
    auto ratio = [](std::span<const double> xs) {
        double m1 = 0, m2 = 0;
        for (double x : xs) {
            m1 += x;
            m2 += x * x;
        }
        m1 /= static_cast<double>(xs.size());
        m2 /= static_cast<double>(xs.size());
        return m1 != 0 ? m2 / (m1 * m1) : std::numeric_limits<double>::quiet_NaN();
    };
    G2Estimate out;
    out.samples = n;
    out.g2 = ratio(intensities);
    if (!std::isfinite(out.g2)) throw Error("g2: mean intensity is zero");

    // Spread between ten contiguous blocks estimates the statistical error.
    const std::size_t blocks = std::min<std::size_t>(10, n / 2);
    std::vector<double> per_block;
    for (std::size_t b = 0; b < blocks; ++b) {
        const auto lo = b * n / blocks;
        const auto hi = (b + 1) * n / blocks;
        per_block.push_back(ratio(intensities.subspan(lo, hi - lo)));
    }
    const double mean = std::accumulate(per_block.begin(), per_block.end(), 0.0) / blocks;
    double var = 0;
    for (double v : per_block) var += (v - mean) * (v - mean);
    out.standard_error = blocks > 1 ? std::sqrt(var / (blocks - 1) / blocks) : 0.0;
    if (out.g2 - 1.0 > 2.0 * out.standard_error && out.g2 > 1.0) out.K = 1.0 / (out.g2 - 1.0);
    return out;
}

StackAnalysis analyze_stack(const FrameSource& source, const PolarGrid& grid,
                            const StackAnalysisOptions& options) {
    const auto n_theta = static_cast<Eigen::Index>(grid.n_theta());
    StackAnalysis out;
    out.mean_radial = Eigen::VectorXd::Zero(n_theta);
    CovarianceAccumulator sector(2 * n_theta);
    CovarianceAccumulator annulus(static_cast<Eigen::Index>(grid.n_phi()));
    const bool one_pass = options.theta_center.has_value();
    if (one_pass) out.oam.theta_center = *options.theta_center;

    source([&](const Frame& f) {
        out.mean_radial += radial_profile(f, grid);
        out.totals.push_back(frame_integral(f, grid));
        sector.add(radial_sector_reduce(f, grid, options.sector_half_angle));
        if (one_pass)
            annulus.add(azimuth_annulus_reduce(f, grid, out.oam.theta_center,
                                               options.annulus_half_width));
    });
    if (out.totals.size() < 2) throw Error("stack analysis needs at least two frames");
    out.mean_radial /= static_cast<double>(out.totals.size());

    if (!one_pass) {
        Eigen::Index peak = 0;
        out.mean_radial.maxCoeff(&peak);
        out.oam.theta_center = grid.theta[static_cast<std::size_t>(peak)];
        source([&](const Frame& f) {
            annulus.add(azimuth_annulus_reduce(f, grid, out.oam.theta_center,
                                               options.annulus_half_width));
        });
    }

    out.radial.cov = to_covariance_matrix(sector, "theta", signed_theta(grid));
    out.radial.modes = radial_modes_from_cov(out.radial.cov, grid.dtheta, options.radial);
    out.oam.cov = to_covariance_matrix(annulus, "phi", grid.phi);
    out.oam.profile = dphi_average(out.oam.cov);
    out.oam.spectrum = fit_oam_weights(out.oam.profile, options.l_fit);
    out.g2 = g2_and_K(out.totals);
    return out;
}

FrameSource frames_of(const FrameStack& stack) {
    return [&stack](const FrameVisitor& visit) {
        for (const auto& f : stack.frames) visit(f);
    };
}

}  // namespace pdcmodes
