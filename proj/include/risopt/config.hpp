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

#ifndef RISOPT_CONFIG_HPP
#define RISOPT_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace risopt {

/// Solver tolerances and iteration caps. All stopping rules are relative
/// objective changes unless noted.
struct SolverParams {
    double ao_tol = 1e-6;     // outer alternating loop, change in mu
    int ao_max_iter = 30;     // outer iterations
    double sca_tol = 1e-6;    // power / blocklength SCA rounds
    int sca_max_rounds = 50;  //
    double fp_tol = 1e-6;     // fractional-programming rounds in the phase solver
    int fp_max_rounds = 100;  //
    double pg_tol = 1e-8;     // inner projected-gradient solves
    int pg_max_iter = 500;    //
};

/// Full scenario description. Defaults reproduce the reference network:
/// a 4-antenna base station 20 m from a 25-element reflecting surface,
/// four users on a 10 m circle around the surface, 10 mW power budget,
/// 1e-6 target error probability and a 200 channel-use budget.
struct SystemConfig {
    int users = 4;         // K
    int bs_antennas = 4;   // B, perfect square (planar array)
    int ris_elements = 25; // N, perfect square (planar array)

    double noise_density_dbm_hz = -174.0;
    double bandwidth_hz = 2e6;
    double p_total_w = 0.01; // 10 mW

    std::vector<double> target_errors = {1e-6, 1e-6, 1e-6, 1e-6}; // per user
    double alpha = 0.8;                                           // objective weight
    int max_cbl = 200;                                            // M
    std::vector<int> min_cbl = {10, 10, 10, 10};                  // per user

    double rician_bs = 1.0;  // BS-RIS link
    double rician_ris = 1.0; // RIS-user links
    double rician_dir = 1.0; // direct links

    double bs_ris_distance_m = 20.0;
    double user_ris_radius_m = 10.0;
    double spacing_over_wavelength = 0.5;
    double elevation_min_rad = 0.5235987755982988; // pi/6
    double elevation_max_rad = 1.5707963267948966; // pi/2

    double csi_rho = 0.0;          // normalized channel-estimate MSE, [0, 1)
    bool random_phase_init = false; // random unit-modulus theta^0 instead of all-ones
    bool precode_on_estimate = true; // precoders from estimated channels under CSI error

    SolverParams solver;

    /// sigma^2 = N0 * W in watts.
    double noise_power_w() const;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    /// Broadcast scalar per-user fields to length `users`.
    void normalize_per_user_fields();

    double min_cbl_total() const;
};

/// Parse a JSON config file; keys not listed in the schema are rejected.
/// A missing path is an error; fields absent from the file keep defaults.
SystemConfig load_config(const std::string& path);

/// Parse from a JSON string (same rules as load_config).
SystemConfig parse_config(const std::string& json_text);

/// Serialize with the same flat key set accepted by load_config.
std::string config_to_json(const SystemConfig& config);

void save_config(const SystemConfig& config, const std::string& path);

} // namespace risopt

#endif // RISOPT_CONFIG_HPP
