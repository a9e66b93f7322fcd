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

#include "risopt/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <type_traits>

#include "risopt/fbl.hpp"

namespace risopt {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kArmijoC1 = 1e-4;
constexpr double kArmijoShrink = 0.5;
constexpr double kSlack = 1e-9;

using cdouble = std::complex<double>;

// T_k = sum_tx p_tx |gain(tx,k)|^2 + sigma^2 (signal of interest included).
Eigen::VectorXd total_received(const Eigen::MatrixXd& gains, const Eigen::VectorXd& power,
                               double noise)
{
    return (gains.transpose() * power).array() + noise;
}

Eigen::VectorXd sinr_from_gains(const Eigen::MatrixXd& gains, const Eigen::VectorXd& power,
                                double noise)
{
    const Eigen::VectorXd t = total_received(gains, power, noise);
    Eigen::VectorXd sinr(power.size());
    for (Eigen::Index k = 0; k < power.size(); ++k) {
        const double own = power(k) * gains(k, k);
        sinr(k) = own / (t(k) - own);
    }
    return sinr;
}

// Concave water-filling step of the blocklength solvers: maximize
// sum_k rho_k x_k + log2(x_k) over x >= floor, sum(x) <= budget.
Eigen::VectorXd waterfill_cbl(const Eigen::VectorXd& rho, const Eigen::VectorXd& floor_cbl,
                              double budget)
{
    const Eigen::Index k_count = rho.size();
    const double floor_total = floor_cbl.sum();
    Eigen::VectorXd caps(k_count);
    for (Eigen::Index k = 0; k < k_count; ++k)
        caps(k) = budget - (floor_total - floor_cbl(k));

    auto point_for = [&](double lambda) {
        Eigen::VectorXd x(k_count);
        for (Eigen::Index k = 0; k < k_count; ++k) {
            double ideal;
            if (lambda > rho(k))
                ideal = 1.0 / ((lambda - rho(k)) * kLn2);
            else
                ideal = caps(k); // marginal value stays above lambda for every x
            x(k) = std::min(caps(k), std::max(floor_cbl(k), ideal));
        }
        return x;
    };

    Eigen::VectorXd x = point_for(0.0);
    if (x.sum() <= budget + kSlack)
        return x;

    double lo = 0.0;
    double hi = rho.maxCoeff() + 1.0 / (floor_cbl.minCoeff() * kLn2) + 1.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (point_for(mid).sum() > budget)
            lo = mid;
        else
            hi = mid;
    }
    x = point_for(hi);
    // Remove the residual bisection overshoot while keeping the floors.
    const double excess = x.sum() - floor_total;
    if (x.sum() > budget && excess > 0.0) {
        const double scale = (budget - floor_total) / excess;
        x = floor_cbl + scale * (x - floor_cbl);
    }
    return x;
}

struct CblModel {
    Eigen::VectorXd capacity;  // a_k = log2(1 + gamma_k)
    Eigen::VectorXd penalty;   // c_k = Qinv(eps_k) sqrt(V(gamma_k))

    double rate_of(const Eigen::VectorXd& m) const
    {
        double total = 0.0;
        for (Eigen::Index k = 0; k < m.size(); ++k)
            total += capacity(k) * m(k) + std::log2(m(k)) - penalty(k) * std::sqrt(m(k));
        return total;
    }
};

CblModel make_cbl_model(const SubproblemContext& context, const Eigen::VectorXd& power,
                        const Eigen::VectorXcd& phase)
{
    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    const Eigen::VectorXd sinr = sinr_from_gains(gains, power, context.noise_power());
    CblModel model;
    model.capacity.resize(sinr.size());
    model.penalty.resize(sinr.size());
    for (Eigen::Index k = 0; k < sinr.size(); ++k) {
        model.capacity(k) = shannon_capacity(sinr(k));
        model.penalty(k) =
            context.q_inv_eps()(k) * std::sqrt(dispersion(sinr(k), DispersionMode::Exact));
    }
    return model;
}

// Slopes of the linearized per-user objective around the expansion point:
// rho_k = a_k - c_k / (2 sqrt(m_k)).
Eigen::VectorXd linearized_slopes(const CblModel& model, const Eigen::VectorXd& expansion)
{
    Eigen::VectorXd rho(expansion.size());
    for (Eigen::Index k = 0; k < expansion.size(); ++k)
        rho(k) = model.capacity(k) - model.penalty(k) / (2.0 * std::sqrt(expansion(k)));
    return rho;
}

// Projected gradient ascent for a smooth concave objective over a convex
// set with cheap projection. Objective and gradient are callables; the
// projection maps any point back into the feasible set. Convergence is
// measured against the accumulated improvement rather than the absolute
// objective, which may carry a large argument-independent offset.
template <typename Vec, typename ObjFn, typename GradFn, typename ProjFn>
Vec projected_gradient_ascent(Vec x, const ObjFn& objective, const GradFn& gradient,
                              const ProjFn& project, double step0, double tol, int max_iter)
{
    double f = objective(x);
    const double f_start = f;
    double step = step0;
    for (int it = 0; it < max_iter; ++it) {
        const Vec g = gradient(x);
        bool accepted = false;
        Vec candidate = x;
        double f_candidate = f;
        for (int bt = 0; bt < 80; ++bt) {
            candidate = project(x + step * g);
            const Vec delta = candidate - x;
            double dir;
            if constexpr (std::is_same_v<typename Vec::Scalar, double>)
                dir = g.dot(delta);
            else
                dir = 2.0 * g.dot(delta).real();
            f_candidate = objective(candidate);
            if (f_candidate >= f + kArmijoC1 * dir) {
                accepted = true;
                break;
            }
            step *= kArmijoShrink;
        }
        if (!accepted)
            break;
        const double change = std::abs(f_candidate - f);
        x = candidate;
        f = f_candidate;
        step *= 2.0;
        const double scale = std::abs(f - f_start) + 1e-14 * (std::abs(f) + 1.0);
        if (change <= tol * scale)
            break;
    }
    return x;
}

Eigen::VectorXcd project_to_disc(Eigen::VectorXcd theta)
{
    for (Eigen::Index n = 0; n < theta.size(); ++n) {
        const double mag = std::abs(theta(n));
        if (mag > 1.0)
            theta(n) /= mag;
    }
    return theta;
}

Eigen::VectorXcd unit_modulus(Eigen::VectorXcd theta)
{
    for (Eigen::Index n = 0; n < theta.size(); ++n) {
        const double mag = std::abs(theta(n));
        theta(n) = mag < 1e-12 ? cdouble(1.0, 0.0) : theta(n) / mag;
    }
    return theta;
}

double weighted_rate_ln(const SubproblemContext& context, const Eigen::VectorXd& power,
                        const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase)
{
    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    const Eigen::VectorXd sinr = sinr_from_gains(gains, power, context.noise_power());
    double total = 0.0;
    for (Eigen::Index k = 0; k < sinr.size(); ++k)
        total += blocklength(k) * std::log1p(sinr(k));
    return total;
}

// Wirtinger gradient (w.r.t. conj(theta)) of sum_k m_k ln(1 + gamma_k).
Eigen::VectorXcd weighted_rate_ln_gradient(const SubproblemContext& context,
                                           const Eigen::VectorXd& power,
                                           const Eigen::VectorXd& blocklength,
                                           const Eigen::VectorXcd& phase)
{
    const int k_count = context.users();
    const Eigen::Index n = phase.size();
    Eigen::VectorXcd grad = Eigen::VectorXcd::Zero(n);
    for (int user = 0; user < k_count; ++user) {
        const Eigen::MatrixXcd& r = context.couplings.r_for_user[static_cast<std::size_t>(user)];
        const Eigen::RowVectorXcd combined = phase.adjoint() * r;
        Eigen::VectorXcd total_term = Eigen::VectorXcd::Zero(n);
        Eigen::VectorXcd interference_term = Eigen::VectorXcd::Zero(n);
        double total = context.noise_power();
        double interference = context.noise_power();
        for (int tx = 0; tx < k_count; ++tx) {
            const cdouble c = context.couplings.d(tx, user) + combined(tx);
            const Eigen::VectorXcd weighted = power(tx) * std::conj(c) * r.col(tx);
            total += power(tx) * std::norm(c);
            total_term += weighted;
            if (tx != user) {
                interference += power(tx) * std::norm(c);
                interference_term += weighted;
            }
        }
        grad += blocklength(user) * (total_term / total - interference_term / interference);
    }
    return grad;
}

// Rate-maximizing blocklength allocation (no scalarization): water-fill the
// full budget on the linearized objective, relinearize until converged.
// Used by the rate-only utopia loop.
Eigen::VectorXd maximize_cbl_rate(const SubproblemContext& context, const Eigen::VectorXd& power,
                                  const Eigen::VectorXcd& phase, const Eigen::VectorXd& init_cbl)
{
    const CblModel model = make_cbl_model(context, power, phase);
    const double budget = static_cast<double>(context.config.max_cbl);
    Eigen::VectorXd m = init_cbl;
    double rate_prev = model.rate_of(m);
    for (int round = 0; round < context.config.solver.sca_max_rounds; ++round) {
        const Eigen::VectorXd m_new =
            waterfill_cbl(linearized_slopes(model, m), context.min_cbl(), budget);
        const double rate_new = model.rate_of(m_new);
        if (rate_new < rate_prev - kSlack)
            break;
        m = m_new;
        if (std::abs(rate_new - rate_prev) <=
            context.config.solver.sca_tol * (std::abs(rate_new) + 1.0))
            break;
        rate_prev = rate_new;
    }
    return m;
}

} // namespace

SubproblemContext::SubproblemContext(CouplingSet couplings_, SystemConfig config_,
                                     double utopia_rate_, double utopia_cbl_, double alpha_)
    : couplings(std::move(couplings_)), config(std::move(config_)), utopia_rate(utopia_rate_),
      utopia_cbl(utopia_cbl_), alpha(alpha_)
{
    // Only the solver-facing fields are checked here; the array-model
    // constraints (perfect-square element counts) belong to the channel
    // sampling path, and synthetic couplings of any dimension are legal.
    if (config.users < 1 || couplings.users() != config.users)
        throw std::invalid_argument("SubproblemContext: user count mismatch");
    if (!(config.p_total_w > 0.0) || !(config.bandwidth_hz > 0.0))
        throw std::invalid_argument("SubproblemContext: invalid power or bandwidth");
    if (config.target_errors.size() != static_cast<std::size_t>(config.users) ||
        config.min_cbl.size() != static_cast<std::size_t>(config.users))
        throw std::invalid_argument("SubproblemContext: per-user field length mismatch");
    for (double eps : config.target_errors)
        if (!(eps > 0.0) || !(eps <= 0.5))
            throw std::invalid_argument("SubproblemContext: target error outside (0, 0.5]");
    if (static_cast<double>(config.max_cbl) < config.min_cbl_total())
        throw std::invalid_argument("SubproblemContext: blocklength budget below the minima");
    if (!(utopia_rate > 0.0))
        throw std::invalid_argument("SubproblemContext: utopia rate must be positive");
    if (std::abs(utopia_cbl - config.min_cbl_total()) > kSlack)
        throw std::invalid_argument(
            "SubproblemContext: utopia blocklength must equal the sum of per-user minima");
    if (!(alpha >= 0.0) || !(alpha <= 1.0))
        throw std::invalid_argument("SubproblemContext: alpha must be in [0, 1]");
    noise_power_ = config.noise_power_w();
    min_cbl_.resize(config.users);
    q_inv_eps_.resize(config.users);
    for (int k = 0; k < config.users; ++k) {
        min_cbl_(k) = static_cast<double>(config.min_cbl[static_cast<std::size_t>(k)]);
        q_inv_eps_(k) = q_inverse(config.target_errors[static_cast<std::size_t>(k)]);
    }
}

Eigen::VectorXd project_to_power_budget(const Eigen::VectorXd& p, double budget)
{
    Eigen::VectorXd clipped = p.cwiseMax(0.0);
    if (clipped.sum() <= budget)
        return clipped;
    // Solve sum_j max(p_j - tau, 0) = budget by bisection on tau.
    double lo = 0.0;
    double hi = p.maxCoeff();
    for (int it = 0; it < 100; ++it) {
        const double tau = 0.5 * (lo + hi);
        if ((p.array() - tau).max(0.0).sum() > budget)
            lo = tau;
        else
            hi = tau;
    }
    return (p.array() - hi).max(0.0);
}

Eigen::VectorXd grad_L_minus_power(const Eigen::VectorXd& power, const SubproblemContext& context,
                                   const Eigen::VectorXd& blocklength,
                                   const Eigen::VectorXcd& phase)
{
    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    const Eigen::VectorXd t = total_received(gains, power, context.noise_power());
    const Eigen::Index k_count = power.size();
    Eigen::VectorXd weight(k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const double interference = t(k) - power(k) * gains(k, k);
        weight(k) = blocklength(k) / (interference * kLn2);
    }
    Eigen::VectorXd grad = gains * weight;
    for (Eigen::Index j = 0; j < k_count; ++j)
        grad(j) -= gains(j, j) * weight(j); // own-signal term is not interference
    return grad;
}

Eigen::VectorXd solve_power(const SubproblemContext& context, const Eigen::VectorXd& blocklength,
                            const Eigen::VectorXcd& phase, const Eigen::VectorXd& init_power)
{
    const double budget = context.config.p_total_w;
    if (init_power.minCoeff() < -kSlack || init_power.sum() > budget + kSlack)
        throw std::invalid_argument("solve_power: infeasible initial power");

    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    const double noise = context.noise_power();
    const Eigen::Index k_count = init_power.size();

    // Internal objective: total bits with the high-SNR dispersion constant,
    // whose interference part is linearized each round.
    auto internal_total = [&](const Eigen::VectorXd& p) {
        const Eigen::VectorXd t = total_received(gains, p, noise);
        double total = 0.0;
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const double interference = t(k) - p(k) * gains(k, k);
            total += blocklength(k) * (std::log2(t(k)) - std::log2(interference)) +
                     std::log2(blocklength(k)) -
                     std::sqrt(blocklength(k)) * context.q_inv_eps()(k) / kLn2;
        }
        return total;
    };

    auto sca_from = [&](Eigen::VectorXd p) {
        double objective_prev = internal_total(p);
        for (int round = 0; round < context.config.solver.sca_max_rounds; ++round) {
            const Eigen::VectorXd lin_grad = grad_L_minus_power(p, context, blocklength, phase);

            auto surrogate = [&](const Eigen::VectorXd& x) {
                const Eigen::VectorXd t = total_received(gains, x, noise);
                double total = -lin_grad.dot(x);
                for (Eigen::Index k = 0; k < k_count; ++k)
                    total += blocklength(k) * std::log2(t(k));
                return total;
            };
            auto surrogate_grad = [&](const Eigen::VectorXd& x) {
                const Eigen::VectorXd t = total_received(gains, x, noise);
                Eigen::VectorXd weight(k_count);
                for (Eigen::Index k = 0; k < k_count; ++k)
                    weight(k) = blocklength(k) / (t(k) * kLn2);
                return Eigen::VectorXd(gains * weight - lin_grad);
            };
            auto projection = [&](const Eigen::VectorXd& x) {
                return project_to_power_budget(x, budget);
            };

            const double grad_scale = surrogate_grad(p).norm();
            const double step0 = grad_scale > 0.0 ? budget / grad_scale : 1.0;
            p = projected_gradient_ascent(p, surrogate, surrogate_grad, projection, step0,
                                          context.config.solver.pg_tol,
                                          context.config.solver.pg_max_iter);

            const double objective = internal_total(p);
            const double change = std::abs(objective - objective_prev);
            objective_prev = objective;
            if (change <= context.config.solver.sca_tol * (std::abs(objective) + 1e-30))
                break;
        }
        return std::pair<Eigen::VectorXd, double>(p, objective_prev);
    };

    // The rate objective is a difference of concave functions, so a single
    // SCA path can settle in a poor basin; seed it from the caller's point,
    // the uniform split and every single-user vertex, and keep the best.
    auto best = sca_from(project_to_power_budget(init_power, budget));
    auto consider = [&](const Eigen::VectorXd& start) {
        const auto candidate = sca_from(start);
        if (candidate.second > best.second)
            best = candidate;
    };
    consider(Eigen::VectorXd::Constant(k_count, budget / static_cast<double>(k_count)));
    for (Eigen::Index k = 0; k < k_count; ++k) {
        Eigen::VectorXd vertex = Eigen::VectorXd::Zero(k_count);
        vertex(k) = budget;
        consider(vertex);
    }
    return best.first;
}

Eigen::VectorXd solve_cbl(const SubproblemContext& context, const Eigen::VectorXd& power,
                          const Eigen::VectorXcd& phase, const Eigen::VectorXd& init_cbl)
{
    const double budget = static_cast<double>(context.config.max_cbl);
    for (Eigen::Index k = 0; k < init_cbl.size(); ++k)
        if (init_cbl(k) < context.min_cbl()(k) - kSlack)
            throw std::invalid_argument("solve_cbl: initial blocklength below minimum");
    if (init_cbl.sum() > budget + kSlack)
        throw std::invalid_argument("solve_cbl: initial blocklength exceeds budget");

    const CblModel model = make_cbl_model(context, power, phase);
    const double cbl_star = context.utopia_cbl;
    const double rate_star = context.utopia_rate;
    const double alpha = context.alpha;

    auto mu_of = [&](const Eigen::VectorXd& m) {
        const double cbl_term = (1.0 - alpha) * (m.sum() - cbl_star) / cbl_star;
        const double rate_term = alpha * (1.0 - model.rate_of(m) / rate_star);
        return std::max(cbl_term, rate_term);
    };

    Eigen::VectorXd m = init_cbl;
    double mu_prev = mu_of(m);
    for (int round = 0; round < context.config.solver.sca_max_rounds; ++round) {
        const Eigen::VectorXd rho = linearized_slopes(model, m);
        const Eigen::VectorXd offset =
            model.penalty.array() * m.array().sqrt() / 2.0; // b_k of the linearization

        // Surrogate rate under the first-order sqrt bound; concave in m.
        auto surrogate_rate = [&](const Eigen::VectorXd& x) {
            double total = 0.0;
            for (Eigen::Index k = 0; k < x.size(); ++k)
                total += rho(k) * x(k) + std::log2(x(k)) - offset(k);
            return total;
        };

        // The scalarized objective is the max of a term increasing in the
        // budget and one nonincreasing in it, so the minimizer sits at their
        // crossing (or at an endpoint); locate it by bisection on the budget.
        auto eval_budget = [&](double s) {
            const Eigen::VectorXd x = waterfill_cbl(rho, context.min_cbl(), s);
            const double cbl_term = (1.0 - alpha) * (x.sum() - cbl_star) / cbl_star;
            const double rate_term = alpha * (1.0 - surrogate_rate(x) / rate_star);
            return std::pair<double, Eigen::VectorXd>(cbl_term - rate_term, x);
        };

        Eigen::VectorXd m_new;
        if (eval_budget(cbl_star).first >= 0.0) {
            m_new = waterfill_cbl(rho, context.min_cbl(), cbl_star);
        } else if (eval_budget(budget).first <= 0.0) {
            m_new = waterfill_cbl(rho, context.min_cbl(), budget);
        } else {
            double lo = cbl_star;
            double hi = budget;
            for (int it = 0; it < 90; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (eval_budget(mid).first < 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            m_new = eval_budget(0.5 * (lo + hi)).second;
        }

        const double mu_new = mu_of(m_new);
        if (mu_new > mu_prev + kSlack)
            break; // numerical stall; keep the previous feasible iterate
        m = m_new;
        if (std::abs(mu_new - mu_prev) < context.config.solver.sca_tol)
            break;
        mu_prev = mu_new;
    }
    return m;
}

Eigen::VectorXd update_kappa(const SubproblemContext& context, const Eigen::VectorXd& power,
                             const Eigen::VectorXcd& phase)
{
    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    return sinr_from_gains(gains, power, context.noise_power());
}

Eigen::VectorXcd update_xi(const SubproblemContext& context, const Eigen::VectorXd& power,
                           const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase,
                           const Eigen::VectorXd& kappa)
{
    const int k_count = context.users();
    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    const Eigen::VectorXd t = total_received(gains, power, context.noise_power());
    Eigen::VectorXcd xi(k_count);
    for (int k = 0; k < k_count; ++k) {
        const cdouble own_gain = context.couplings.gain(k, k, phase);
        xi(k) = std::sqrt(power(k) * blocklength(k) * (1.0 + kappa(k))) * own_gain / t(k);
    }
    return xi;
}

PhaseAux build_quadratic(const SubproblemContext& context, const Eigen::VectorXd& power,
                         const Eigen::VectorXd& blocklength, const Eigen::VectorXd& kappa,
                         const Eigen::VectorXcd& xi)
{
    const int k_count = context.users();
    const Eigen::Index n = context.couplings.r_for_user.front().rows();

    PhaseAux aux;
    aux.kappa = kappa;
    aux.xi = xi;
    aux.quad_matrix = Eigen::MatrixXcd::Zero(n, n);
    aux.quad_vector = Eigen::VectorXcd::Zero(n);

    for (int k = 0; k < k_count; ++k) {
        const Eigen::MatrixXcd& r = context.couplings.r_for_user[static_cast<std::size_t>(k)];
        const double xi_sq = std::norm(xi(k));
        aux.quad_matrix.noalias() += xi_sq * (r * power.asDiagonal() * r.adjoint());

        const Eigen::VectorXcd weighted_d =
            power.array() * context.couplings.d.col(k).conjugate().array();
        aux.quad_vector += std::sqrt(power(k) * blocklength(k) * (1.0 + kappa(k))) *
                               std::conj(xi(k)) * r.col(k) -
                           xi_sq * (r * weighted_d);
    }
    aux.quad_matrix = 0.5 * (aux.quad_matrix + aux.quad_matrix.adjoint()).eval();
    return aux;
}

Eigen::VectorXcd solve_phase(const SubproblemContext& context, const Eigen::VectorXd& power,
                             const Eigen::VectorXd& blocklength,
                             const Eigen::VectorXcd& init_phase)
{
    for (Eigen::Index i = 0; i < init_phase.size(); ++i)
        if (std::abs(init_phase(i)) > 1.0 + kSlack)
            throw std::invalid_argument("solve_phase: initial phase outside unit disc");

    const Eigen::VectorXcd incoming = init_phase;
    const double rate_incoming = weighted_rate_ln(context, power, blocklength, incoming);

    Eigen::VectorXcd theta = project_to_disc(init_phase);
    double rate_current = weighted_rate_ln(context, power, blocklength, theta);

    for (int round = 0; round < context.config.solver.fp_max_rounds; ++round) {
        const Eigen::VectorXd kappa = update_kappa(context, power, theta);
        const Eigen::VectorXcd xi = update_xi(context, power, blocklength, theta, kappa);
        const PhaseAux aux = build_quadratic(context, power, blocklength, kappa, xi);

        auto objective = [&](const Eigen::VectorXcd& x) {
            const cdouble quad = x.dot(aux.quad_matrix * x);
            const cdouble lin = x.dot(aux.quad_vector);
            return -quad.real() + 2.0 * lin.real();
        };
        auto gradient = [&](const Eigen::VectorXcd& x) {
            return Eigen::VectorXcd(aux.quad_vector - aux.quad_matrix * x);
        };

        const double trace = aux.quad_matrix.trace().real();
        const double grad_scale = gradient(theta).norm();
        const double step0 =
            trace > 0.0 ? 1.0 / trace : (grad_scale > 0.0 ? 1.0 / grad_scale : 1.0);
        const Eigen::VectorXcd theta_new = projected_gradient_ascent(
            theta, objective, gradient, project_to_disc, step0, context.config.solver.pg_tol,
            context.config.solver.pg_max_iter);

        const double rate_new = weighted_rate_ln(context, power, blocklength, theta_new);
        if (rate_new < rate_current - kSlack * (std::abs(rate_current) + 1.0))
            break; // transform updates stalled numerically; keep current phase
        theta = theta_new;
        const double change = std::abs(rate_new - rate_current);
        rate_current = rate_new;
        if (change <= context.config.solver.fp_tol * (std::abs(rate_new) + 1e-30))
            break;
    }

    // The transform updates contract toward the optimum by only O(1/gamma)
    // per round when noise is weak, so polish the result by ascending the
    // true weighted rate directly; this never decreases the objective.
    {
        auto objective = [&](const Eigen::VectorXcd& x) {
            return weighted_rate_ln(context, power, blocklength, x);
        };
        auto gradient = [&](const Eigen::VectorXcd& x) {
            return weighted_rate_ln_gradient(context, power, blocklength, x);
        };
        const double grad_scale = gradient(theta).norm();
        const double step0 = grad_scale > 0.0 ? 1.0 / grad_scale : 1.0;
        theta = projected_gradient_ascent(theta, objective, gradient, project_to_disc, step0,
                                          context.config.solver.pg_tol,
                                          context.config.solver.pg_max_iter);
    }

    const Eigen::VectorXcd theta_unit = unit_modulus(theta);
    const double rate_unit = weighted_rate_ln(context, power, blocklength, theta_unit);
    if (rate_unit >= rate_incoming - kSlack * (std::abs(rate_incoming) + 1.0))
        return theta_unit;
    return incoming;
}

UtopiaPoints utopia_points(const SystemConfig& config, const ChannelSet& channels)
{
    config.validate();
    channels.validate(config);

    UtopiaPoints utopia;
    utopia.cbl = config.min_cbl_total();

    const int users = config.users;
    Eigen::VectorXd power =
        Eigen::VectorXd::Constant(users, config.p_total_w / static_cast<double>(users));
    Eigen::VectorXd cbl(users);
    for (int k = 0; k < users; ++k)
        cbl(k) = std::max(static_cast<double>(config.min_cbl[static_cast<std::size_t>(k)]),
                          static_cast<double>(config.max_cbl) / users);
    Eigen::VectorXcd theta = Eigen::VectorXcd::Ones(config.ris_elements);

    auto clamped_rate = [&](const SubproblemContext& ctx, const Eigen::VectorXd& p,
                            const Eigen::VectorXd& m, const Eigen::VectorXcd& th) {
        const Eigen::MatrixXd gains = ctx.couplings.gain_squared(th);
        const Eigen::VectorXd sinr = sinr_from_gains(gains, p, ctx.noise_power());
        double total = 0.0;
        for (int k = 0; k < users; ++k) {
            const FblPoint point{sinr(k), m(k), config.target_errors[static_cast<std::size_t>(k)]};
            total += std::max(0.0, fbl_bits(point, DispersionMode::Exact));
        }
        return total;
    };

    double rate_prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.solver.ao_max_iter; ++iter) {
        const auto precoders = mrt_precoders(channels, theta);
        const SubproblemContext ctx(coupling_set(channels, precoders), config, 1.0, utopia.cbl,
                                    1.0);
        if (iter == 0)
            rate_prev = clamped_rate(ctx, power, cbl, theta);

        const Eigen::VectorXd power_new = solve_power(ctx, cbl, theta, power);
        const Eigen::VectorXd cbl_new = maximize_cbl_rate(ctx, power_new, theta, cbl);
        const Eigen::VectorXcd theta_new = solve_phase(ctx, power_new, cbl_new, theta);

        const auto precoders_new = mrt_precoders(channels, theta_new);
        const SubproblemContext ctx_new(coupling_set(channels, precoders_new), config, 1.0,
                                        utopia.cbl, 1.0);
        const double rate_new = clamped_rate(ctx_new, power_new, cbl_new, theta_new);
        if (rate_new < rate_prev)
            break; // precoder refresh did not pay off; keep the previous point
        power = power_new;
        cbl = cbl_new;
        theta = theta_new;
        if (std::abs(rate_new - rate_prev) <= config.solver.ao_tol * (std::abs(rate_new) + 1.0)) {
            rate_prev = rate_new;
            break;
        }
        rate_prev = rate_new;
    }

    if (!(rate_prev > 0.0))
        throw std::runtime_error("utopia_points: rate objective is not positive; "
                                 "the scenario cannot support the rate utopia");
    utopia.rate_bits = rate_prev;
    return utopia;
}

double fbl_total_raw(const SubproblemContext& context, const Eigen::VectorXd& power,
                     const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase,
                     DispersionMode mode)
{
    const Eigen::MatrixXd gains = context.couplings.gain_squared(phase);
    const Eigen::VectorXd sinr = sinr_from_gains(gains, power, context.noise_power());
    double total = 0.0;
    for (Eigen::Index k = 0; k < sinr.size(); ++k) {
        const double v = dispersion(sinr(k), mode);
        total += blocklength(k) * shannon_capacity(sinr(k)) -
                 context.q_inv_eps()(k) * std::sqrt(blocklength(k) * v) +
                 std::log2(blocklength(k));
    }
    return total;
}

double weighted_rate_log2(const SubproblemContext& context, const Eigen::VectorXd& power,
                          const Eigen::VectorXd& blocklength, const Eigen::VectorXcd& phase)
{
    return weighted_rate_ln(context, power, blocklength, phase) / kLn2;
}

} // namespace risopt
