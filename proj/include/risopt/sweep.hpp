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

#ifndef RISOPT_SWEEP_HPP
#define RISOPT_SWEEP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "risopt/ao.hpp"
#include "risopt/config.hpp"

namespace risopt {

enum class SweepKind { Alpha, RisElements, Power, CsiRho };

SweepKind sweep_kind_from_string(const std::string& name);
std::string to_string(SweepKind kind);

enum class Variant { Optimized, RandomPhase };

std::string to_string(Variant variant);

/// One Monte Carlo trial outcome. Rates are evaluated on the true channels
/// with the precoders the optimizer would deploy (built from the estimated
/// channels when csi_rho > 0).
struct TrialRecord {
    double sweep_value = 0.0;
    int realization = 0;
    std::uint64_t seed = 0;
    Variant variant = Variant::Optimized;
    double rate_fbl = 0.0;
    double rate_shannon = 0.0;
    double cbl_total = 0.0;
    long cbl_rounded = 0;
    double mu_final = 0.0;
    int iterations = 0;
    double runtime_ms = 0.0;
};

struct SweepOptions {
    int realizations = 1;
    std::uint64_t base_seed = 0;
    int jobs = 1;              // trial-level parallelism
    bool with_baseline = true; // also run the random-phase variant
    DispersionMode eval_dispersion = DispersionMode::Exact; // for reported rates
};

struct SweepResult {
    std::vector<TrialRecord> records;
    int failed_trials = 0;
    std::vector<std::string> failures; // one message per failed trial
};

/// Apply one sweep value to a copy of the base configuration.
SystemConfig apply_sweep_value(const SystemConfig& base, SweepKind kind, double value);

/// Run every (value, realization) trial. Results are sorted by
/// (sweep value, realization, variant) and independent of the job count.
SweepResult run_sweep(const SystemConfig& config, SweepKind kind,
                      const std::vector<double>& values, const SweepOptions& options);

/// Serialize trial records. `deterministic_runtime` writes 0 in the
/// runtime_ms column so identical invocations produce identical bytes.
std::string records_to_csv(std::vector<TrialRecord> records, bool deterministic_runtime = true);

void write_csv(const std::vector<TrialRecord>& records, const std::string& path,
               bool deterministic_runtime = true);

/// Mean and standard error of each numeric column per (sweep value, variant).
struct AggregateRow {
    double sweep_value = 0.0;
    Variant variant = Variant::Optimized;
    int count = 0;
    double rate_fbl_mean = 0.0, rate_fbl_se = 0.0;
    double rate_shannon_mean = 0.0, rate_shannon_se = 0.0;
    double cbl_total_mean = 0.0, cbl_total_se = 0.0;
    double cbl_rounded_mean = 0.0, cbl_rounded_se = 0.0;
    double mu_mean = 0.0, mu_se = 0.0;
    double iterations_mean = 0.0, iterations_se = 0.0;
    double runtime_ms_mean = 0.0, runtime_ms_se = 0.0;
};

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records);

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows,
                             bool deterministic_runtime = true);

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path,
                         bool deterministic_runtime = true);

} // namespace risopt

#endif // RISOPT_SWEEP_HPP
