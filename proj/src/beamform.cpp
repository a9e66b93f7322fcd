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

#include "risopt/beamform.hpp"

#include <cmath>
#include <stdexcept>

namespace risopt {

namespace {
constexpr double kFeasibilitySlack = 1e-9;
constexpr double kUnitModulusTol = 1e-9;
} // namespace

void Allocation::validate(const SystemConfig& config, bool require_unit_modulus) const
{
    if (power.size() != config.users || blocklength.size() != config.users)
        throw std::invalid_argument("Allocation: per-user vector length mismatch");
    if (phase.size() != config.ris_elements)
        throw std::invalid_argument("Allocation: phase length mismatch");
    if (power.minCoeff() < -kFeasibilitySlack)
        throw std::invalid_argument("Allocation: negative transmit power");
    if (power.sum() > config.p_total_w + kFeasibilitySlack)
        throw std::invalid_argument("Allocation: power budget exceeded");
    for (int k = 0; k < config.users; ++k)
        if (blocklength(k) < static_cast<double>(config.min_cbl[static_cast<std::size_t>(k)]) -
                                 kFeasibilitySlack)
            throw std::invalid_argument("Allocation: blocklength below per-user minimum");
    if (blocklength.sum() > static_cast<double>(config.max_cbl) + kFeasibilitySlack)
        throw std::invalid_argument("Allocation: blocklength budget exceeded");
    for (Eigen::Index n = 0; n < phase.size(); ++n) {
        const double mag = std::abs(phase(n));
        if (mag > 1.0 + kUnitModulusTol)
            throw std::invalid_argument("Allocation: phase coefficient outside unit disc");
        if (require_unit_modulus && std::abs(mag - 1.0) > kUnitModulusTol)
            throw std::invalid_argument("Allocation: phase coefficient not unit modulus");
    }
}

Eigen::MatrixXd CouplingSet::gain_squared(const Eigen::VectorXcd& phase) const
{
    const int k_count = users();
    Eigen::MatrixXd g(k_count, k_count);
    for (int user = 0; user < k_count; ++user) {
        // theta^H R gives the phase-combined row for all transmit indices.
        const Eigen::RowVectorXcd combined = phase.adjoint() * r_for_user[user];
        for (int tx = 0; tx < k_count; ++tx)
            g(tx, user) = std::norm(d(tx, user) + combined(tx));
    }
    return g;
}

Eigen::RowVectorXcd effective_channel(const ChannelSet& channels, const Eigen::VectorXcd& phase,
                                      int user)
{
    if (user < 0 || static_cast<std::size_t>(user) >= channels.direct.size())
        throw std::invalid_argument("effective_channel: user index out of range");
    if (phase.size() != channels.bs_ris.rows())
        throw std::invalid_argument("effective_channel: phase length mismatch");
    const Eigen::MatrixXcd cascade =
        channels.ris_user[static_cast<std::size_t>(user)].conjugate().asDiagonal() *
        channels.bs_ris;
    return channels.direct[static_cast<std::size_t>(user)].adjoint() + phase.adjoint() * cascade;
}

std::vector<Eigen::VectorXcd> mrt_precoders(const ChannelSet& channels,
                                            const Eigen::VectorXcd& phase)
{
    std::vector<Eigen::VectorXcd> precoders(channels.direct.size());
    for (std::size_t k = 0; k < channels.direct.size(); ++k) {
        const Eigen::RowVectorXcd h = effective_channel(channels, phase, static_cast<int>(k));
        const double norm = h.norm();
        if (!(norm > 0.0))
            throw std::runtime_error("mrt_precoders: degenerate (zero) effective channel");
        precoders[k] = h.adjoint() / norm;
    }
    return precoders;
}

CouplingSet coupling_set(const ChannelSet& channels,
                         const std::vector<Eigen::VectorXcd>& precoders)
{
    const auto k_count = static_cast<int>(channels.direct.size());
    if (static_cast<int>(precoders.size()) != k_count)
        throw std::invalid_argument("coupling_set: precoder count mismatch");

    CouplingSet set;
    set.d.resize(k_count, k_count);
    set.r_for_user.resize(static_cast<std::size_t>(k_count));
    for (int user = 0; user < k_count; ++user) {
        const Eigen::MatrixXcd cascade =
            channels.ris_user[static_cast<std::size_t>(user)].conjugate().asDiagonal() *
            channels.bs_ris;
        Eigen::MatrixXcd r(channels.bs_ris.rows(), k_count);
        for (int tx = 0; tx < k_count; ++tx) {
            const auto& w = precoders[static_cast<std::size_t>(tx)];
            if (w.size() != channels.bs_ris.cols())
                throw std::invalid_argument("coupling_set: precoder length mismatch");
            set.d(tx, user) = channels.direct[static_cast<std::size_t>(user)].dot(w);
            r.col(tx) = cascade * w;
        }
        set.r_for_user[static_cast<std::size_t>(user)] = std::move(r);
    }
    return set;
}

Eigen::VectorXd sinr_all(const CouplingSet& couplings, const Eigen::VectorXd& power,
                         const Eigen::VectorXcd& phase, double noise_power)
{
    if (!(noise_power > 0.0))
        throw std::invalid_argument("sinr_all: noise power must be positive");
    const int k_count = couplings.users();
    if (power.size() != k_count)
        throw std::invalid_argument("sinr_all: power length mismatch");
    if (power.minCoeff() < 0.0)
        throw std::invalid_argument("sinr_all: negative power");

    const Eigen::MatrixXd g = couplings.gain_squared(phase);
    Eigen::VectorXd sinr(k_count);
    for (int user = 0; user < k_count; ++user) {
        double interference = noise_power;
        for (int tx = 0; tx < k_count; ++tx)
            if (tx != user)
                interference += power(tx) * g(tx, user);
        sinr(user) = power(user) * g(user, user) / interference;
    }
    return sinr;
}

RateBreakdown total_fbl_rate(const Allocation& allocation, const CouplingSet& couplings,
                             const SystemConfig& config, DispersionMode mode)
{
    RateBreakdown out;
    out.sinr = sinr_all(couplings, allocation.power, allocation.phase, config.noise_power_w());
    const int k_count = couplings.users();
    out.per_user.resize(k_count);
    out.per_user_raw.resize(k_count);
    for (int k = 0; k < k_count; ++k) {
        const FblPoint point{out.sinr(k), allocation.blocklength(k),
                             config.target_errors[static_cast<std::size_t>(k)]};
        out.per_user_raw(k) = fbl_bits(point, mode);
        out.per_user(k) = std::max(0.0, out.per_user_raw(k));
    }
    out.total = out.per_user.sum();
    return out;
}

} // namespace risopt
