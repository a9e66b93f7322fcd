// SPDX-License-Identifier: Apache-2.0
//
// risopt - joint transmit power, blocklength and RIS phase allocation
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "risopt/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "risopt/rng.hpp"

namespace risopt {

namespace {

using cdouble = std::complex<double>;

int isqrt_exact(int n, const char* what)
{
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (n < 1 || r * r != n)
        throw std::invalid_argument(std::string(what) + ": element count must be a perfect square");
    return r;
}

// LoS mixing weight sqrt(zeta / (zeta + 1)) and NLoS weight sqrt(beta / (zeta + 1)).
struct RicianWeights {
    double los;
    double nlos;
};

RicianWeights rician_weights(double zeta, double beta)
{
    return {std::sqrt(zeta / (zeta + 1.0)), std::sqrt(beta / (zeta + 1.0))};
}

Eigen::MatrixXcd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = rng.next_cgaussian(1.0);
    return m;
}

Eigen::VectorXcd gaussian_vector(Rng& rng, Eigen::Index n)
{
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = rng.next_cgaussian(1.0);
    return v;
}

template <typename Derived>
void add_estimation_error(Eigen::MatrixBase<Derived>& entries, double beta, double rho, Rng& rng)
{
    // h = h_est + e with E|e|^2 = rho/(1-rho) per unit of small-scale power,
    // so that E|h - h_est|^2 / E|h_est|^2 = rho.
    const double error_var = beta * rho / (1.0 - rho);
    for (Eigen::Index i = 0; i < entries.rows(); ++i)
        for (Eigen::Index j = 0; j < entries.cols(); ++j)
            entries(i, j) -= rng.next_cgaussian(error_var);
}

} // namespace

void ArrayGeometry::validate() const
{
    isqrt_exact(element_count, "ArrayGeometry");
    if (!(spacing_over_wavelength > 0.0))
        throw std::invalid_argument("ArrayGeometry: spacing_over_wavelength must be positive");
}

void ChannelSet::validate(const SystemConfig& config) const
{
    const auto users = static_cast<std::size_t>(config.users);
    if (bs_ris.rows() != config.ris_elements || bs_ris.cols() != config.bs_antennas)
        throw std::invalid_argument("ChannelSet: bs_ris dimension mismatch");
    if (ris_user.size() != users || direct.size() != users)
        throw std::invalid_argument("ChannelSet: per-user vector count mismatch");
    for (std::size_t k = 0; k < users; ++k) {
        if (ris_user[k].size() != config.ris_elements)
            throw std::invalid_argument("ChannelSet: ris_user dimension mismatch");
        if (direct[k].size() != config.bs_antennas)
            throw std::invalid_argument("ChannelSet: direct dimension mismatch");
    }
    if (!bs_ris.allFinite())
        throw std::invalid_argument("ChannelSet: bs_ris has non-finite entries");
    for (std::size_t k = 0; k < users; ++k)
        if (!ris_user[k].allFinite() || !direct[k].allFinite())
            throw std::invalid_argument("ChannelSet: per-user channel has non-finite entries");
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double azimuth_rad,
                                 double elevation_rad)
{
    geometry.validate();
    const int q = geometry.element_count;
    const int side = isqrt_exact(q, "steering_vector");
    const double horizontal = std::sin(elevation_rad) * std::sin(azimuth_rad);
    const double vertical = std::cos(elevation_rad);
    const double scale = 2.0 * M_PI * geometry.spacing_over_wavelength;

    Eigen::VectorXcd a(q);
    for (int n = 0; n < q; ++n) {
        const double phase = scale * ((n / side) * horizontal + (n % side) * vertical);
        a(n) = cdouble(std::cos(phase), std::sin(phase));
    }
    return a;
}

double path_loss_linear(PathLossModel model, double distance_m)
{
    if (!(distance_m > 0.0))
        throw std::domain_error("path_loss_linear: distance must be positive");
    const double db = model == PathLossModel::Reflected
                          ? -30.0 - 22.0 * std::log10(distance_m)
                          : -33.0 - 38.0 * std::log10(distance_m);
    return std::pow(10.0, db / 10.0);
}

ScenarioDraw draw_scenario(const SystemConfig& config, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, 0xA11CEull));
    const int users = config.users;
    const double ris_x = config.bs_ris_distance_m;
    const double radius = config.user_ris_radius_m;

    ScenarioDraw draw;
    draw.user_circle_angle_rad.resize(users);
    draw.bs_user_distance_m.resize(users);
    draw.bs_user_azimuth_rad.resize(users);
    draw.ris_user_azimuth_rad.resize(users);
    draw.ris_user_elevation_rad.resize(users);
    draw.bs_user_elevation_rad.resize(users);

    for (int k = 0; k < users; ++k) {
        const double psi = rng.uniform(0.0, 2.0 * M_PI);
        const double ux = ris_x + radius * std::cos(psi);
        const double uy = radius * std::sin(psi);
        draw.user_circle_angle_rad[k] = psi;
        draw.bs_user_distance_m[k] = std::hypot(ux, uy);
        draw.bs_user_azimuth_rad[k] = std::atan2(uy, ux);
        draw.ris_user_azimuth_rad[k] = psi;
    }
    draw.bs_ris_aoa_elevation_rad = rng.uniform(config.elevation_min_rad, config.elevation_max_rad);
    draw.bs_ris_aod_elevation_rad = rng.uniform(config.elevation_min_rad, config.elevation_max_rad);
    for (int k = 0; k < users; ++k)
        draw.ris_user_elevation_rad[k] = rng.uniform(config.elevation_min_rad, config.elevation_max_rad);
    for (int k = 0; k < users; ++k)
        draw.bs_user_elevation_rad[k] = rng.uniform(config.elevation_min_rad, config.elevation_max_rad);
    return draw;
}

ChannelSet sample_channels(const SystemConfig& config, std::uint64_t seed)
{
    config.validate();
    const int users = config.users;
    const int n_ris = config.ris_elements;
    const int n_bs = config.bs_antennas;
    const ArrayGeometry ris_array{n_ris, config.spacing_over_wavelength};
    const ArrayGeometry bs_array{n_bs, config.spacing_over_wavelength};

    ChannelSet set;
    set.geometry = draw_scenario(config, seed);
    Rng rng(derive_seed(seed, 0xC4A71ull));

    // BS-RIS link: Hbar = sqrt(beta) * a_N a_B^H, mixed with iid CN(0,1).
    {
        const double beta = path_loss_linear(PathLossModel::Reflected, config.bs_ris_distance_m);
        const auto w = rician_weights(config.rician_bs, beta);
        const Eigen::VectorXcd a_ris =
            steering_vector(ris_array, M_PI, set.geometry.bs_ris_aoa_elevation_rad);
        const Eigen::VectorXcd a_bs =
            steering_vector(bs_array, 0.0, set.geometry.bs_ris_aod_elevation_rad);
        const Eigen::MatrixXcd los = std::sqrt(beta) * (a_ris * a_bs.adjoint());
        set.bs_ris = w.los * los + w.nlos * gaussian_matrix(rng, n_ris, n_bs);
        set.bs_ris_beta = beta;
    }

    set.ris_user.resize(users);
    set.direct.resize(users);
    set.ris_user_beta.resize(users);
    set.direct_beta.resize(users);
    for (int k = 0; k < users; ++k) {
        const double beta_ris =
            path_loss_linear(PathLossModel::Reflected, config.user_ris_radius_m);
        const auto w_ris = rician_weights(config.rician_ris, beta_ris);
        const Eigen::VectorXcd a_ris = steering_vector(
            ris_array, set.geometry.ris_user_azimuth_rad[k], set.geometry.ris_user_elevation_rad[k]);
        set.ris_user[k] =
            w_ris.los * (std::sqrt(beta_ris) * a_ris) + w_ris.nlos * gaussian_vector(rng, n_ris);
        set.ris_user_beta[k] = beta_ris;

        const double beta_dir =
            path_loss_linear(PathLossModel::Direct, set.geometry.bs_user_distance_m[k]);
        const auto w_dir = rician_weights(config.rician_dir, beta_dir);
        const Eigen::VectorXcd a_bs = steering_vector(
            bs_array, set.geometry.bs_user_azimuth_rad[k], set.geometry.bs_user_elevation_rad[k]);
        set.direct[k] =
            w_dir.los * (std::sqrt(beta_dir) * a_bs) + w_dir.nlos * gaussian_vector(rng, n_bs);
        set.direct_beta[k] = beta_dir;
    }
    return set;
}

ChannelSet corrupt_csi(const ChannelSet& channels, double rho, std::uint64_t seed)
{
    if (!(rho >= 0.0) || !(rho < 1.0))
        throw std::domain_error("corrupt_csi: rho must be in [0, 1)");
    ChannelSet est = channels;
    if (rho == 0.0)
        return est;

    Rng rng(derive_seed(seed, 0xC51Full));
    add_estimation_error(est.bs_ris, channels.bs_ris_beta, rho, rng);
    for (std::size_t k = 0; k < est.ris_user.size(); ++k)
        add_estimation_error(est.ris_user[k], channels.ris_user_beta[k], rho, rng);
    for (std::size_t k = 0; k < est.direct.size(); ++k)
        add_estimation_error(est.direct[k], channels.direct_beta[k], rho, rng);
    return est;
}

} // namespace risopt
