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

#ifndef RISOPT_BEAMFORM_HPP
#define RISOPT_BEAMFORM_HPP

#include <vector>

#include <Eigen/Dense>

#include "risopt/channel.hpp"
#include "risopt/config.hpp"
#include "risopt/fbl.hpp"

namespace risopt {

/// Decision variables of the joint allocation problem.
struct Allocation {
    Eigen::VectorXd power;       // watts, length K
    Eigen::VectorXd blocklength; // channel uses, length K (continuous)
    Eigen::VectorXcd phase;      // RIS coefficients, length N

    /// Feasibility: sum(p) <= p_total, m within bounds, |theta_n| <= 1.
    /// With require_unit_modulus the phase must sit on the unit circle
    /// to within 1e-9, as required of any reported allocation.
    void validate(const SystemConfig& config, bool require_unit_modulus = true) const;
};

/// Precoder-dependent scalars d(k',k) = h_dir_k^H w_k' and vectors
/// r(k',k) = diag(h_ris_k^H) H w_k'. For user k the N x K matrix r_for_user[k]
/// holds r(k',k) in column k'. Immutable once built.
struct CouplingSet {
    Eigen::MatrixXcd d;                        // K x K, row k' = transmit index
    std::vector<Eigen::MatrixXcd> r_for_user;  // K entries, each N x K

    int users() const { return static_cast<int>(d.rows()); }

    std::complex<double> d_of(int tx, int user) const { return d(tx, user); }
    Eigen::VectorXcd r_of(int tx, int user) const { return r_for_user[user].col(tx); }

    /// Effective gain d(tx,user) + theta^H r(tx,user).
    std::complex<double> gain(int tx, int user, const Eigen::VectorXcd& phase) const
    {
        return d(tx, user) + phase.dot(r_for_user[user].col(tx));
    }

    /// K x K matrix of |gain|^2 for a fixed phase; row = transmit index.
    Eigen::MatrixXd gain_squared(const Eigen::VectorXcd& phase) const;
};

/// Row vector h_k = h_dir_k^H + theta^H diag(h_ris_k^H) H, length B.
Eigen::RowVectorXcd effective_channel(const ChannelSet& channels, const Eigen::VectorXcd& phase,
                                      int user);

/// Maximal ratio transmission: w_k = h_k^H / ||h_k||, unit norm each.
std::vector<Eigen::VectorXcd> mrt_precoders(const ChannelSet& channels,
                                            const Eigen::VectorXcd& phase);

CouplingSet coupling_set(const ChannelSet& channels,
                         const std::vector<Eigen::VectorXcd>& precoders);

/// Per-user SINR under the given powers and phase.
Eigen::VectorXd sinr_all(const CouplingSet& couplings, const Eigen::VectorXd& power,
                         const Eigen::VectorXcd& phase, double noise_power);

/// Finite-blocklength bits for every user plus the clamped total. Negative
/// per-user values indicate an infeasible (sinr, m, eps) triple and are
/// reported as zero; `per_user_raw` keeps the unclamped values.
struct RateBreakdown {
    double total = 0.0;              // sum of clamped per-user bits
    Eigen::VectorXd per_user;        // clamped at zero
    Eigen::VectorXd per_user_raw;    // may be negative
    Eigen::VectorXd sinr;
};

RateBreakdown total_fbl_rate(const Allocation& allocation, const CouplingSet& couplings,
                             const SystemConfig& config,
                             DispersionMode mode = DispersionMode::Exact);

} // namespace risopt

#endif // RISOPT_BEAMFORM_HPP
