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

#ifndef RISOPT_SOLVER_HPP
#define RISOPT_SOLVER_HPP

#include <vector>

#include <Eigen/Dense>

#include "risopt/beamform.hpp"
#include "risopt/channel.hpp"
#include "risopt/config.hpp"

namespace risopt {

/// Frozen inputs shared by the three sub-problem solvers. Couplings are
/// computed once per outer iteration; the solvers treat them as constants.
struct SubproblemContext {
    CouplingSet couplings;
    SystemConfig config;
    double utopia_rate = 1.0; // L*, best attainable total rate, > 0
    double utopia_cbl = 1.0;  // m*, equals sum of per-user minimum blocklengths
    double alpha = 0.8;       // objective weight

    SubproblemContext(CouplingSet couplings_, SystemConfig config_, double utopia_rate_,
                      double utopia_cbl_, double alpha_);

    int users() const { return couplings.users(); }
    double noise_power() const { return noise_power_; }
    const Eigen::VectorXd& min_cbl() const { return min_cbl_; }
    const Eigen::VectorXd& q_inv_eps() const { return q_inv_eps_; }

  private:
    double noise_power_ = 0.0;
    Eigen::VectorXd min_cbl_;
    Eigen::VectorXd q_inv_eps_;
};

/// Auxiliary state of the fractional-programming phase solver.
struct PhaseAux {
    Eigen::VectorXd kappa;        // K, nonnegative
    Eigen::VectorXcd xi;          // K
    Eigen::MatrixXcd quad_matrix; // N x N Hermitian PSD
    Eigen::VectorXcd quad_vector; // N
};

/// Best attainable value of each objective on its own.
struct UtopiaPoints {
    double rate_bits = 0.0; // L*
    double cbl = 0.0;       // m* = sum of min_cbl
};

/// Gradient of the concave interference part of the rate objective with
/// respect to the power vector: component j is
/// sum_{k != j} m_k |gain(j,k)|^2 / (I_k ln 2).
Eigen::VectorXd grad_L_minus_power(const Eigen::VectorXd& power, const SubproblemContext& context,
                                   const Eigen::VectorXd& blocklength,
                                   const Eigen::VectorXcd& phase);

/// Power allocation sub-problem: maximize the total rate at fixed
/// blocklengths and phase via successive convex approximation. The returned
/// vector is feasible (nonnegative, sum <= p_total) and the internal
/// objective is nondecreasing across rounds.
Eigen::VectorXd solve_power(const SubproblemContext& context, const Eigen::VectorXd& blocklength,
                            const Eigen::VectorXcd& phase, const Eigen::VectorXd& init_power);

/// Blocklength sub-problem: minimize the scalarized objective mu at fixed
/// power and phase, with the concave sqrt(m) penalty replaced by its
/// first-order upper bound around the current iterate.
Eigen::VectorXd solve_cbl(const SubproblemContext& context, const Eigen::VectorXd& power,
                          const Eigen::VectorXcd& phase, const Eigen::VectorXd& init_cbl);

/// Optimal auxiliary weights of the Lagrangian-dual rate transform; equal to
/// the current per-user SINRs.
Eigen::VectorXd update_kappa(const SubproblemContext& context, const Eigen::VectorXd& power,
                             const Eigen::VectorXcd& phase);

/// Closed-form optimum of the quadratic-transform auxiliaries.
Eigen::VectorXcd update_xi(const SubproblemContext& context, const Eigen::VectorXd& power,
                           const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase,
                           const Eigen::VectorXd& kappa);

/// Assemble the Hermitian PSD quadratic form (Q, q) whose objective
/// -theta^H Q theta + 2 Re(theta^H q) matches the quadratic-transform
/// objective up to phase-independent constants.
PhaseAux build_quadratic(const SubproblemContext& context, const Eigen::VectorXd& power,
                         const Eigen::VectorXd& blocklength, const Eigen::VectorXd& kappa,
                         const Eigen::VectorXcd& xi);

/// Phase sub-problem: alternate the kappa/xi updates with a projected
/// gradient solve of the disc-constrained QCQP, then project the result to
/// unit modulus. The returned phase never has a lower weighted rate
/// sum m_k log2(1+gamma_k) than the incoming one.
Eigen::VectorXcd solve_phase(const SubproblemContext& context, const Eigen::VectorXd& power,
                             const Eigen::VectorXd& blocklength,
                             const Eigen::VectorXcd& init_phase);

/// Utopia points: m* is the sum of minimum blocklengths; L* comes from the
/// rate-only alternating loop (full budget, no blocklength objective).
UtopiaPoints utopia_points(const SystemConfig& config, const ChannelSet& channels);

/// Euclidean projection onto { p >= 0, sum(p) <= budget }.
Eigen::VectorXd project_to_power_budget(const Eigen::VectorXd& p, double budget);

/// Raw (unclamped) total finite-blocklength bits at frozen couplings.
double fbl_total_raw(const SubproblemContext& context, const Eigen::VectorXd& power,
                     const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase,
                     DispersionMode mode);

/// sum_k m_k log2(1 + gamma_k) at frozen couplings.
double weighted_rate_log2(const SubproblemContext& context, const Eigen::VectorXd& power,
                          const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase);

} // namespace risopt

#endif // RISOPT_SOLVER_HPP
