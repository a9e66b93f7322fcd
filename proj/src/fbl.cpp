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

#include "risopt/fbl.hpp"

#include <cmath>
#include <stdexcept>

namespace risopt {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kInvLn2Sq = 2.0813689810056077; // 1 / ln(2)^2

double gaussian_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

// Acklam's rational approximation of the standard normal quantile,
// relative error below 1.2e-9 over (0, 1).
double inv_norm_cdf_seed(double p)
{
    static const double a1 = -39.69683028665376, a2 = 220.9460984245205, a3 = -275.9285104469687,
                        a4 = 138.3577518672690, a5 = -30.66479806614716, a6 = 2.506628277459239;
    static const double b1 = -54.47609879822406, b2 = 161.5858368580409, b3 = -155.6989798598866,
                        b4 = 66.80131188771972, b5 = -13.28068155288572;
    static const double c1 = -7.784894002430293e-03, c2 = -3.223964580411365e-01,
                        c3 = -2.400758277161838, c4 = -2.549732539343734, c5 = 4.374664141464968,
                        c6 = 2.938163982698783;
    static const double d1 = 7.784695709041462e-03, d2 = 3.224671290700398e-01,
                        d3 = 2.445134137142996, d4 = 3.754408661907416;
    const double plow = 0.02425;
    const double phigh = 1.0 - plow;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               ((((d1 * q + d2) * q + d3) * q + d4) * q + 1.0);
    }
    if (p > phigh) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               ((((d1 * q + d2) * q + d3) * q + d4) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a1 * r + a2) * r + a3) * r + a4) * r + a5) * r + a6) * q /
           (((((b1 * r + b2) * r + b3) * r + b4) * r + b5) * r + 1.0);
}

} // namespace

void FblPoint::validate() const
{
    if (!(sinr >= 0.0))
        throw std::invalid_argument("FblPoint: sinr must be nonnegative");
    if (!(blocklength >= 1.0))
        throw std::invalid_argument("FblPoint: blocklength must be >= 1");
    if (!(target_error > 0.0) || !(target_error <= 0.5))
        throw std::invalid_argument("FblPoint: target_error must be in (0, 0.5]");
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double q_inverse(double p)
{
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("q_inverse: argument must be in (0, 1)");
    // Q^{-1}(p) = -Phi^{-1}(p); refine with Newton steps on Q itself.
    double x = -inv_norm_cdf_seed(p);
    for (int i = 0; i < 3; ++i) {
        const double pdf = gaussian_pdf(x);
        if (pdf <= 0.0)
            break; // far tail; the seed is already at full double accuracy there
        x += (q_function(x) - p) / pdf;
    }
    return x;
}

double dispersion(double sinr, DispersionMode mode)
{
    if (!(sinr >= 0.0))
        throw std::domain_error("dispersion: sinr must be nonnegative");
    if (mode == DispersionMode::Approximate)
        return kInvLn2Sq;
    const double g = 1.0 + sinr;
    return kInvLn2Sq * (1.0 - 1.0 / (g * g));
}

double fbl_bits(const FblPoint& point, DispersionMode mode)
{
    point.validate();
    const double v = dispersion(point.sinr, mode);
    const double penalty = q_inverse(point.target_error) * std::sqrt(point.blocklength * v);
    return point.blocklength * shannon_capacity(point.sinr) - penalty +
           std::log2(point.blocklength);
}

double error_probability(double sinr, double blocklength, double bits, DispersionMode mode,
                         LogTermConvention convention)
{
    if (!(sinr >= 0.0))
        throw std::domain_error("error_probability: sinr must be nonnegative");
    if (!(blocklength >= 1.0))
        throw std::domain_error("error_probability: blocklength must be >= 1");
    const double v = dispersion(sinr, mode);
    if (v <= 0.0)
        return bits <= std::log2(blocklength) ? 0.0 : 1.0; // zero-rate channel
    const double effective_bits =
        convention == LogTermConvention::ShiftedBits ? bits - std::log2(blocklength) : bits;
    const double f = std::sqrt(blocklength / v) *
                     (shannon_capacity(sinr) - effective_bits / blocklength);
    return q_function(f);
}

double shannon_capacity(double sinr) { return std::log2(1.0 + sinr); }

} // namespace risopt
