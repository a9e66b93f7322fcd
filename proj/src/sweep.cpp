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

#include "risopt/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "risopt/rng.hpp"

namespace risopt {

namespace {

std::string fmt_real(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

/// Evaluate a finished allocation on the true channels, deploying the
/// precoders the base station would actually use.
struct Evaluation {
    double rate_fbl = 0.0;
    double rate_shannon = 0.0;
};

Evaluation evaluate_on_true_channels(const SystemConfig& config, const ChannelSet& true_channels,
                                     const ChannelSet& precoding_channels,
                                     const Allocation& allocation, DispersionMode mode)
{
    const auto precoders = mrt_precoders(precoding_channels, allocation.phase);
    const CouplingSet couplings = coupling_set(true_channels, precoders);
    const Eigen::VectorXd sinr =
        sinr_all(couplings, allocation.power, allocation.phase, config.noise_power_w());
    Evaluation eval;
    for (Eigen::Index k = 0; k < sinr.size(); ++k) {
        const FblPoint point{sinr(k), allocation.blocklength(k),
                             config.target_errors[static_cast<std::size_t>(k)]};
        eval.rate_fbl += std::max(0.0, fbl_bits(point, mode));
        eval.rate_shannon += allocation.blocklength(k) * shannon_capacity(sinr(k));
    }
    return eval;
}

struct TrialTask {
    std::size_t value_index = 0;
    int realization = 0;
};

} // namespace

SweepKind sweep_kind_from_string(const std::string& name)
{
    if (name == "alpha")
        return SweepKind::Alpha;
    if (name == "n")
        return SweepKind::RisElements;
    if (name == "power")
        return SweepKind::Power;
    if (name == "rho")
        return SweepKind::CsiRho;
    throw std::invalid_argument("unknown sweep kind '" + name + "'");
}

std::string to_string(SweepKind kind)
{
    switch (kind) {
    case SweepKind::Alpha: return "alpha";
    case SweepKind::RisElements: return "n";
    case SweepKind::Power: return "power";
    case SweepKind::CsiRho: return "rho";
    }
    return "?";
}

std::string to_string(Variant variant)
{
    return variant == Variant::Optimized ? "optimized" : "random_phase";
}

SystemConfig apply_sweep_value(const SystemConfig& base, SweepKind kind, double value)
{
    SystemConfig config = base;
    switch (kind) {
    case SweepKind::Alpha:
        config.alpha = value;
        break;
    case SweepKind::RisElements:
        config.ris_elements = static_cast<int>(std::lround(value));
        if (std::abs(value - std::lround(value)) > 1e-9)
            throw std::invalid_argument("sweep: RIS element count must be an integer");
        break;
    case SweepKind::Power:
        config.p_total_w = value; // watts
        break;
    case SweepKind::CsiRho:
        config.csi_rho = value;
        break;
    }
    config.validate();
    return config;
}

SweepResult run_sweep(const SystemConfig& base_config, SweepKind kind,
                      const std::vector<double>& values, const SweepOptions& options)
{
    if (values.empty())
        throw std::invalid_argument("run_sweep: value list must not be empty");
    if (options.realizations < 1)
        throw std::invalid_argument("run_sweep: realizations must be >= 1");
    base_config.validate();
    for (double v : values)
        apply_sweep_value(base_config, kind, v); // fail fast on bad values

    std::vector<TrialTask> tasks;
    tasks.reserve(values.size() * static_cast<std::size_t>(options.realizations));
    for (std::size_t vi = 0; vi < values.size(); ++vi)
        for (int r = 0; r < options.realizations; ++r)
            tasks.push_back({vi, r});

    // Sweeps over a physical resource (transmit power, RIS size) keep one
    // scalarization yardstick per realization, computed at the base
    // configuration, so the objective weights mean the same thing at every
    // sweep value. Weight and CSI sweeps use each trial's own utopia.
    const bool fixed_yardstick = kind == SweepKind::Power || kind == SweepKind::RisElements;
    std::vector<UtopiaPoints> yardsticks;
    if (fixed_yardstick) {
        yardsticks.resize(static_cast<std::size_t>(options.realizations));
        for (int r = 0; r < options.realizations; ++r) {
            const std::uint64_t yard_seed =
                derive_seed(options.base_seed, 0x9A7Dull, static_cast<std::uint64_t>(r));
            const ChannelSet yard_channels = sample_channels(base_config, yard_seed);
            const ChannelSet yard_est =
                base_config.csi_rho > 0.0
                    ? corrupt_csi(yard_channels, base_config.csi_rho,
                                  derive_seed(yard_seed, 0xE57ull))
                    : yard_channels;
            yardsticks[static_cast<std::size_t>(r)] = utopia_points(base_config, yard_est);
        }
    }

    const int variants = options.with_baseline ? 2 : 1;
    std::vector<std::optional<TrialRecord>> slots(tasks.size() * static_cast<std::size_t>(variants));
    std::mutex failure_mutex;
    std::vector<std::string> failures;

    auto run_task = [&](std::size_t task_index) {
        const TrialTask& task = tasks[task_index];
        const double value = values[task.value_index];
        try {
            const SystemConfig config = apply_sweep_value(base_config, kind, value);
            const std::uint64_t seed =
                derive_seed(options.base_seed, task.value_index,
                            static_cast<std::uint64_t>(task.realization));
            const ChannelSet true_channels = sample_channels(config, seed);
            const ChannelSet est_channels =
                config.csi_rho > 0.0
                    ? corrupt_csi(true_channels, config.csi_rho, derive_seed(seed, 0xE57ull))
                    : true_channels;
            const ChannelSet& opt_channels =
                config.precode_on_estimate ? est_channels : true_channels;

            const UtopiaPoints utopia =
                fixed_yardstick ? yardsticks[static_cast<std::size_t>(task.realization)]
                                : utopia_points(config, opt_channels);

            auto to_record = [&](const SolveReport& report, Variant variant) {
                const Evaluation eval =
                    evaluate_on_true_channels(config, true_channels, opt_channels,
                                              report.final_allocation, options.eval_dispersion);
                TrialRecord rec;
                rec.sweep_value = value;
                rec.realization = task.realization;
                rec.seed = seed;
                rec.variant = variant;
                rec.rate_fbl = eval.rate_fbl;
                rec.rate_shannon = eval.rate_shannon;
                rec.cbl_total = report.cbl_total;
                rec.cbl_rounded = report.rounded_cbl.cast<long>().sum();
                rec.mu_final = report.mu_final;
                rec.iterations = report.iterations;
                rec.runtime_ms = report.wall_time_ms;
                return rec;
            };

            const SolveReport optimized =
                run_alternating(config, opt_channels, config.alpha, seed, &utopia);
            slots[task_index * variants + 0] = to_record(optimized, Variant::Optimized);
            if (options.with_baseline) {
                const SolveReport random_phase =
                    baseline_random_phase(config, opt_channels, config.alpha, seed, &utopia);
                slots[task_index * variants + 1] =
                    to_record(random_phase, Variant::RandomPhase);
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            failures.push_back("trial value=" + fmt_real(value) + " realization=" +
                               std::to_string(task.realization) + ": " + e.what());
        }
    };

    const int jobs = std::max(1, options.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            run_task(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t)
            workers.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size())
                        return;
                    run_task(i);
                }
            });
        for (auto& w : workers)
            w.join();
    }

    SweepResult result;
    result.failures = std::move(failures);
    result.failed_trials = static_cast<int>(result.failures.size());
    result.records.reserve(slots.size());
    for (const auto& slot : slots)
        if (slot.has_value())
            result.records.push_back(*slot);

    std::sort(result.records.begin(), result.records.end(),
              [](const TrialRecord& a, const TrialRecord& b) {
                  if (a.sweep_value != b.sweep_value)
                      return a.sweep_value < b.sweep_value;
                  if (a.realization != b.realization)
                      return a.realization < b.realization;
                  return static_cast<int>(a.variant) < static_cast<int>(b.variant);
              });
    return result;
}

std::string records_to_csv(std::vector<TrialRecord> records, bool deterministic_runtime)
{
    std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
        if (a.sweep_value != b.sweep_value)
            return a.sweep_value < b.sweep_value;
        if (a.realization != b.realization)
            return a.realization < b.realization;
        return static_cast<int>(a.variant) < static_cast<int>(b.variant);
    });

    std::string out = "sweep,realization,seed,variant,L_fbl,L_shannon,m_total,m_rounded,mu,"
                      "iters,runtime_ms\n";
    for (const TrialRecord& r : records) {
        out += fmt_real(r.sweep_value);
        out += ',' + std::to_string(r.realization);
        out += ',' + std::to_string(r.seed);
        out += ',' + to_string(r.variant);
        out += ',' + fmt_real(r.rate_fbl);
        out += ',' + fmt_real(r.rate_shannon);
        out += ',' + fmt_real(r.cbl_total);
        out += ',' + std::to_string(r.cbl_rounded);
        out += ',' + fmt_real(r.mu_final);
        out += ',' + std::to_string(r.iterations);
        out += ',' + fmt_real(deterministic_runtime ? 0.0 : r.runtime_ms);
        out += '\n';
    }
    return out;
}

void write_csv(const std::vector<TrialRecord>& records, const std::string& path,
               bool deterministic_runtime)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("write_csv: cannot write '" + path + "'");
    out << records_to_csv(records, deterministic_runtime);
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs)
{
    MeanSe out;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty())
        return out;
    for (double x : xs)
        out.mean += x;
    out.mean /= n;
    if (xs.size() < 2)
        return out;
    double ss = 0.0;
    for (double x : xs)
        ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

} // namespace

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records)
{
    // Group by (sweep value, variant), preserving numeric order.
    std::vector<std::pair<double, Variant>> keys;
    for (const TrialRecord& r : records) {
        const std::pair<double, Variant> key{r.sweep_value, r.variant};
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first < b.first;
        return static_cast<int>(a.second) < static_cast<int>(b.second);
    });

    std::vector<AggregateRow> rows;
    rows.reserve(keys.size());
    for (const auto& key : keys) {
        std::vector<double> fbl, shannon, cbl, cbl_round, mu, iters, runtime;
        for (const TrialRecord& r : records) {
            if (r.sweep_value != key.first || r.variant != key.second)
                continue;
            fbl.push_back(r.rate_fbl);
            shannon.push_back(r.rate_shannon);
            cbl.push_back(r.cbl_total);
            cbl_round.push_back(static_cast<double>(r.cbl_rounded));
            mu.push_back(r.mu_final);
            iters.push_back(static_cast<double>(r.iterations));
            runtime.push_back(r.runtime_ms);
        }
        AggregateRow row;
        row.sweep_value = key.first;
        row.variant = key.second;
        row.count = static_cast<int>(fbl.size());
        const MeanSe a = mean_se(fbl);
        row.rate_fbl_mean = a.mean;
        row.rate_fbl_se = a.se;
        const MeanSe b = mean_se(shannon);
        row.rate_shannon_mean = b.mean;
        row.rate_shannon_se = b.se;
        const MeanSe c = mean_se(cbl);
        row.cbl_total_mean = c.mean;
        row.cbl_total_se = c.se;
        const MeanSe d = mean_se(cbl_round);
        row.cbl_rounded_mean = d.mean;
        row.cbl_rounded_se = d.se;
        const MeanSe e = mean_se(mu);
        row.mu_mean = e.mean;
        row.mu_se = e.se;
        const MeanSe f = mean_se(iters);
        row.iterations_mean = f.mean;
        row.iterations_se = f.se;
        const MeanSe g = mean_se(runtime);
        row.runtime_ms_mean = g.mean;
        row.runtime_ms_se = g.se;
        rows.push_back(row);
    }
    return rows;
}

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows, bool deterministic_runtime)
{
    std::string out =
        "sweep,variant,n,L_fbl_mean,L_fbl_se,L_shannon_mean,L_shannon_se,m_total_mean,"
        "m_total_se,m_rounded_mean,m_rounded_se,mu_mean,mu_se,iters_mean,iters_se,"
        "runtime_ms_mean,runtime_ms_se\n";
    for (const AggregateRow& r : rows) {
        out += fmt_real(r.sweep_value);
        out += ',' + to_string(r.variant);
        out += ',' + std::to_string(r.count);
        out += ',' + fmt_real(r.rate_fbl_mean);
        out += ',' + fmt_real(r.rate_fbl_se);
        out += ',' + fmt_real(r.rate_shannon_mean);
        out += ',' + fmt_real(r.rate_shannon_se);
        out += ',' + fmt_real(r.cbl_total_mean);
        out += ',' + fmt_real(r.cbl_total_se);
        out += ',' + fmt_real(r.cbl_rounded_mean);
        out += ',' + fmt_real(r.cbl_rounded_se);
        out += ',' + fmt_real(r.mu_mean);
        out += ',' + fmt_real(r.mu_se);
        out += ',' + fmt_real(r.iterations_mean);
        out += ',' + fmt_real(r.iterations_se);
        out += ',' + fmt_real(deterministic_runtime ? 0.0 : r.runtime_ms_mean);
        out += ',' + fmt_real(deterministic_runtime ? 0.0 : r.runtime_ms_se);
        out += '\n';
    }
    return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path,
                         bool deterministic_runtime)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("write_aggregate_csv: cannot write '" + path + "'");
    out << aggregate_to_csv(rows, deterministic_runtime);
}

} // namespace risopt
