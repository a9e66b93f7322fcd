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

#ifndef RISOPT_FBL_HPP
#define RISOPT_FBL_HPP

namespace risopt {

/// Channel dispersion handling. Exact evaluates V(gamma); Approximate uses
/// the high-SNR constant 1/ln(2)^2 that the convex solvers are derived with.
enum class DispersionMode { Exact, Approximate };

/// Convention for the log2(m) bonus term when solving the rate expression
/// for the decoding error probability. ShiftedBits subtracts log2(m) from L
/// before inverting, which makes fbl_bits and error_probability exact
/// inverses of each other; RawBits inverts the literal expression without
/// the shift.
enum class LogTermConvention { ShiftedBits, RawBits };

/// One operating point of the finite-blocklength rate model.
struct FblPoint {
    double sinr = 0.0;         // gamma >= 0
    double blocklength = 1.0;  // m >= 1, continuous relaxation
    double target_error = 0.5; // epsilon in (0, 0.5]

    void validate() const;
};

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
double q_function(double x);

/// Inverse of q_function on (0, 1). Rational seed plus Newton refinement;
/// absolute error below 1e-10 over the useful range.
double q_inverse(double p);

/// Channel dispersion V(gamma) in bits^2 per channel use.
double dispersion(double sinr, DispersionMode mode = DispersionMode::Exact);

/// Achievable information bits over a finite blocklength:
///   L = m*log2(1+gamma) - Qinv(eps)*sqrt(m*V(gamma)) + log2(m).
/// May be negative for small m or sinr; callers decide how to clamp.
double fbl_bits(const FblPoint& point, DispersionMode mode = DispersionMode::Exact);

/// Decoding error probability for transmitting `bits` information bits over
/// `blocklength` channel uses at the given SINR.
double error_probability(double sinr, double blocklength, double bits,
                         DispersionMode mode = DispersionMode::Exact,
                         LogTermConvention convention = LogTermConvention::ShiftedBits);

/// log2(1 + gamma), bits per channel use.
double shannon_capacity(double sinr);

} // namespace risopt

#endif // RISOPT_FBL_HPP
