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

#ifndef RISOPT_AO_HPP
#define RISOPT_AO_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "risopt/beamform.hpp"
#include "risopt/channel.hpp"
#include "risopt/config.hpp"
#include "risopt/solver.hpp"

namespace risopt {

/// One row of the outer-loop convergence trace.
struct IterationRecord {
    int iteration = 0;
    double mu = 0.0;
    double rate_total = 0.0;    // clamped total bits, exact dispersion
    double cbl_total = 0.0;     //
    double power_objective = 0.0; // internal rate surrogate after the power step
    double cbl_objective = 0.0;   // scalarized objective after the blocklength step
    double phase_objective = 0.0; // weighted rate after the phase step
};

/// Result of one alternating-optimization run.
struct SolveReport {
    Allocation final_allocation;
    Eigen::VectorXi rounded_cbl;    // integer blocklengths, largest-remainder
    double rate_total = 0.0;        // at the continuous allocation
    double rate_total_rounded = 0.0; // re-evaluated at the integer blocklengths
    double cbl_total = 0.0;
    double mu_final = 0.0;
    UtopiaPoints utopia;
    std::vector<IterationRecord> trace;
    bool converged = false;
    int iterations = 0;
    double wall_time_ms = 0.0;
};

/// Scalarized objective: max of the weighted normalized gaps to the two
/// utopia points.
double tchebyshev_mu(double rate_total, double cbl_total, const SubproblemContext& context);

/// Largest-remainder rounding of a continuous blocklength vector to integers
/// that keep the per-user minima and the total budget.
Eigen::VectorXi round_blocklengths(const Eigen::VectorXd& cbl, const SystemConfig& config);

/// Full alternating loop: power, blocklength and phase sub-solves with a
/// precoder refresh per outer iteration. Deterministic in all arguments.
/// `cached_utopia` skips the utopia computation when the caller already has
/// it for these channels.
SolveReport run_alternating(const SystemConfig& config, const ChannelSet& channels, double alpha,
                            std::uint64_t seed, const UtopiaPoints* cached_utopia = nullptr);

/// Same loop with the phase fixed to a uniformly random unit-modulus draw;
/// power and blocklengths are still optimized.
SolveReport baseline_random_phase(const SystemConfig& config, const ChannelSet& channels,
                                  double alpha, std::uint64_t seed,
                                  const UtopiaPoints* cached_utopia = nullptr);

/// Alternating loop with an externally pinned phase vector (|theta_n| <= 1).
SolveReport run_fixed_phase(const SystemConfig& config, const ChannelSet& channels, double alpha,
                            const Eigen::VectorXcd& fixed_phase,
                            const UtopiaPoints* cached_utopia = nullptr);

/// Infinite-blocklength bits over the same channel uses:
/// sum_k m_k log2(1 + gamma_k) with MRT precoders recomputed from the
/// allocation's phase.
double baseline_shannon(const SystemConfig& config, const ChannelSet& channels,
                        const Allocation& allocation);

} // namespace risopt

#endif // RISOPT_AO_HPP
