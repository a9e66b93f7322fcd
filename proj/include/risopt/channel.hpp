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

#ifndef RISOPT_CHANNEL_HPP
#define RISOPT_CHANNEL_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "risopt/config.hpp"

namespace risopt {

/// Uniform square planar array: element_count must be a perfect square.
struct ArrayGeometry {
    int element_count = 1;
    double spacing_over_wavelength = 0.5;

    void validate() const;
};

enum class PathLossModel { Reflected, Direct };

/// Large-scale link description used when assembling one Rician channel.
struct LinkParams {
    double rician_factor = 1.0; // zeta >= 0
    double distance_m = 1.0;
    double azimuth_rad = 0.0;
    double elevation_rad = 0.0;
    PathLossModel path_loss_model = PathLossModel::Reflected;
};

/// Per-realization geometry draw, kept alongside the channel matrices so a
/// realization can be reproduced or inspected.
struct ScenarioDraw {
    std::vector<double> user_circle_angle_rad; // position of user k around the RIS
    std::vector<double> bs_user_distance_m;
    std::vector<double> bs_user_azimuth_rad;
    std::vector<double> ris_user_azimuth_rad;
    double bs_ris_aoa_elevation_rad = 0.0; // at the RIS
    double bs_ris_aod_elevation_rad = 0.0; // at the BS
    std::vector<double> ris_user_elevation_rad;
    std::vector<double> bs_user_elevation_rad;
};

/// One realization of every channel in the network. `bs_ris` is N x B,
/// `ris_user[k]` has length N and `direct[k]` length B (stored as columns;
/// receivers apply the conjugate transpose). The beta fields record the
/// linear path-loss gains the small-scale coefficients were scaled with.
struct ChannelSet {
    Eigen::MatrixXcd bs_ris;
    std::vector<Eigen::VectorXcd> ris_user;
    std::vector<Eigen::VectorXcd> direct;

    double bs_ris_beta = 0.0;
    std::vector<double> ris_user_beta;
    std::vector<double> direct_beta;

    ScenarioDraw geometry;

    void validate(const SystemConfig& config) const;
};

/// Steering vector of a uniform square planar array, length Q, unit-modulus
/// entries. Element n pairs index floor(n / sqrt(Q)) with
/// sin(elevation)*sin(azimuth) and index n mod sqrt(Q) with cos(elevation).
Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double azimuth_rad,
                                 double elevation_rad);

/// Linear power gain of the distance-dependent path loss.
///   Reflected: -30 - 22*log10(d) dB.  Direct: -33 - 38*log10(d) dB.
double path_loss_linear(PathLossModel model, double distance_m);

/// Draw the scenario geometry for one realization (user positions on the
/// circle around the RIS plus the per-link elevation angles).
ScenarioDraw draw_scenario(const SystemConfig& config, std::uint64_t seed);

/// Sample all channels for one realization. Deterministic in (config, seed).
ChannelSet sample_channels(const SystemConfig& config, std::uint64_t seed);

/// Produce the estimated channel set for a true realization under a
/// normalized MSE of `rho`: each small-scale coefficient h is split as
/// h = h_est + e with E|e|^2 / E|h_est|^2 = rho. Deterministic in inputs.
ChannelSet corrupt_csi(const ChannelSet& channels, double rho, std::uint64_t seed);

} // namespace risopt

#endif // RISOPT_CHANNEL_HPP
