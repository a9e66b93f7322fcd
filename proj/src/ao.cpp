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

#include "risopt/ao.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "risopt/rng.hpp"

namespace risopt {

namespace {

SubproblemContext make_context(const SystemConfig& config, const ChannelSet& channels,
                               const Eigen::VectorXcd& theta, const UtopiaPoints& utopia,
                               double alpha)
{
    const auto precoders = mrt_precoders(channels, theta);
    return SubproblemContext(coupling_set(channels, precoders), config, utopia.rate_bits,
                             utopia.cbl, alpha);
}

// Clamped total bits with exact dispersion, the quantity mu is tracked on.
double reported_rate(const SubproblemContext& context, const Eigen::VectorXd& power,
                     const Eigen::VectorXd& cbl, const Eigen::VectorXcd& theta)
{
    const Eigen::VectorXd sinr =
        sinr_all(context.couplings, power, theta, context.noise_power());
    double total = 0.0;
    for (Eigen::Index k = 0; k < sinr.size(); ++k) {
        const FblPoint point{sinr(k), cbl(k),
                             context.config.target_errors[static_cast<std::size_t>(k)]};
        total += std::max(0.0, fbl_bits(point, DispersionMode::Exact));
    }
    return total;
}

enum class PhaseMode { Optimize, Fixed };

SolveReport alternating_loop(const SystemConfig& config, const ChannelSet& channels, double alpha,
                             PhaseMode phase_mode, Eigen::VectorXcd theta,
                             const UtopiaPoints* cached_utopia)
{
    const auto t_start = std::chrono::steady_clock::now();
    config.validate();
    channels.validate(config);
    if (!(alpha >= 0.0) || !(alpha <= 1.0))
        throw std::invalid_argument("run_alternating: alpha must be in [0, 1]");

    const UtopiaPoints utopia =
        cached_utopia != nullptr ? *cached_utopia : utopia_points(config, channels);

    const int users = config.users;
    Eigen::VectorXd power =
        Eigen::VectorXd::Constant(users, config.p_total_w / static_cast<double>(users));
    Eigen::VectorXd cbl(users);
    for (int k = 0; k < users; ++k)
        cbl(k) = std::max(static_cast<double>(config.min_cbl[static_cast<std::size_t>(k)]),
                          static_cast<double>(config.max_cbl) / users);

    SolveReport report;
    report.utopia = utopia;

    SubproblemContext context = make_context(config, channels, theta, utopia, alpha);
    double rate = reported_rate(context, power, cbl, theta);
    double mu = tchebyshev_mu(rate, cbl.sum(), context);
    report.trace.push_back({0, mu, rate, cbl.sum(), 0.0, 0.0, 0.0});

    for (int iter = 1; iter <= config.solver.ao_max_iter; ++iter) {
        const Eigen::VectorXd power_new = solve_power(context, cbl, theta, power);
        const double power_objective =
            fbl_total_raw(context, power_new, cbl, theta, DispersionMode::Approximate);

        const Eigen::VectorXd cbl_new = solve_cbl(context, power_new, theta, cbl);
        const double cbl_objective = tchebyshev_mu(
            fbl_total_raw(context, power_new, cbl_new, theta, DispersionMode::Exact),
            cbl_new.sum(), context);

        Eigen::VectorXcd theta_new = theta;
        if (phase_mode == PhaseMode::Optimize)
            theta_new = solve_phase(context, power_new, cbl_new, theta);
        const double phase_objective =
            weighted_rate_log2(context, power_new, cbl_new, theta_new);

        // Refresh MRT precoders for the new phase and evaluate the outer
        // objective on the refreshed couplings.
        SubproblemContext context_new = make_context(config, channels, theta_new, utopia, alpha);
        const double rate_new = reported_rate(context_new, power_new, cbl_new, theta_new);
        const double mu_new = tchebyshev_mu(rate_new, cbl_new.sum(), context_new);

        if (mu_new > mu) {
            // The refresh-based evaluation stopped improving; the previous
            // iterate is the converged point.
            report.converged = true;
            break;
        }

        power = power_new;
        cbl = cbl_new;
        theta = std::move(theta_new);
        context = std::move(context_new);
        const double improvement = mu - mu_new;
        rate = rate_new;
        mu = mu_new;
        report.trace.push_back(
            {iter, mu, rate, cbl.sum(), power_objective, cbl_objective, phase_objective});
        if (improvement < config.solver.ao_tol) {
            report.converged = true;
            break;
        }
    }

    report.final_allocation = Allocation{power, cbl, theta};
    report.final_allocation.validate(config, phase_mode == PhaseMode::Optimize);
    report.rate_total = rate;
    report.cbl_total = cbl.sum();
    report.mu_final = mu;
    report.iterations = static_cast<int>(report.trace.size()) - 1;

    report.rounded_cbl = round_blocklengths(cbl, config);
    const Eigen::VectorXd cbl_int = report.rounded_cbl.cast<double>();
    report.rate_total_rounded = reported_rate(context, power, cbl_int, theta);

    const auto t_end = std::chrono::steady_clock::now();
    report.wall_time_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
    return report;
}

} // namespace

double tchebyshev_mu(double rate_total, double cbl_total, const SubproblemContext& context)
{
    const double rate_term =
        context.alpha * (context.utopia_rate - rate_total) / context.utopia_rate;
    const double cbl_term =
        (1.0 - context.alpha) * (cbl_total - context.utopia_cbl) / context.utopia_cbl;
    return std::max(rate_term, cbl_term);
}

Eigen::VectorXi round_blocklengths(const Eigen::VectorXd& cbl, const SystemConfig& config)
{
    const Eigen::Index k_count = cbl.size();
    Eigen::VectorXi rounded(k_count);
    Eigen::VectorXd remainder(k_count);
    long total = 0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const int floor_k = std::max(config.min_cbl[static_cast<std::size_t>(k)],
                                     static_cast<int>(std::floor(cbl(k) + 1e-9)));
        rounded(k) = floor_k;
        remainder(k) = cbl(k) - static_cast<double>(floor_k);
        total += floor_k;
    }
    long budget_left = std::min<long>(static_cast<long>(config.max_cbl),
                                      static_cast<long>(std::floor(cbl.sum() + 1e-9))) -
                       total;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k_count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return remainder(a) > remainder(b);
    });
    for (Eigen::Index idx : order) {
        if (budget_left <= 0)
            break;
        rounded(idx) += 1;
        --budget_left;
    }
    return rounded;
}

SolveReport run_alternating(const SystemConfig& config, const ChannelSet& channels, double alpha,
                            std::uint64_t seed, const UtopiaPoints* cached_utopia)
{
    Eigen::VectorXcd theta0 = Eigen::VectorXcd::Ones(config.ris_elements);
    if (config.random_phase_init) {
        Rng rng(derive_seed(seed, 0x1417ull));
        for (Eigen::Index n = 0; n < theta0.size(); ++n) {
            const double phi = rng.uniform(-M_PI, M_PI);
            theta0(n) = std::complex<double>(std::cos(phi), std::sin(phi));
        }
    }
    return alternating_loop(config, channels, alpha, PhaseMode::Optimize, std::move(theta0),
                            cached_utopia);
}

SolveReport baseline_random_phase(const SystemConfig& config, const ChannelSet& channels,
                                  double alpha, std::uint64_t seed,
                                  const UtopiaPoints* cached_utopia)
{
    Rng rng(derive_seed(seed, 0xBA5Eull));
    Eigen::VectorXcd theta(config.ris_elements);
    for (Eigen::Index n = 0; n < theta.size(); ++n) {
        const double phi = rng.uniform(-M_PI, M_PI);
        theta(n) = std::complex<double>(std::cos(phi), std::sin(phi));
    }
    return alternating_loop(config, channels, alpha, PhaseMode::Fixed, std::move(theta),
                            cached_utopia);
}

SolveReport run_fixed_phase(const SystemConfig& config, const ChannelSet& channels, double alpha,
                            const Eigen::VectorXcd& fixed_phase,
                            const UtopiaPoints* cached_utopia)
{
    return alternating_loop(config, channels, alpha, PhaseMode::Fixed, fixed_phase,
                            cached_utopia);
}

double baseline_shannon(const SystemConfig& config, const ChannelSet& channels,
                        const Allocation& allocation)
{
    const auto precoders = mrt_precoders(channels, allocation.phase);
    const CouplingSet couplings = coupling_set(channels, precoders);
    const Eigen::VectorXd sinr =
        sinr_all(couplings, allocation.power, allocation.phase, config.noise_power_w());
    double total = 0.0;
    for (Eigen::Index k = 0; k < sinr.size(); ++k)
        total += allocation.blocklength(k) * shannon_capacity(sinr(k));
    return total;
}

} // namespace risopt
