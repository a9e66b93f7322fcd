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

#include "risopt/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace risopt {

namespace {

using nlohmann::json;

bool is_perfect_square(int n)
{
    if (n < 1)
        return false;
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    return r * r == n;
}

std::vector<double> read_per_user_double(const json& v, const char* key)
{
    if (v.is_number())
        return {v.get<double>()};
    if (v.is_array())
        return v.get<std::vector<double>>();
    throw std::invalid_argument(std::string("config: ") + key + " must be a number or array");
}

std::vector<int> read_per_user_int(const json& v, const char* key)
{
    if (v.is_number_integer())
        return {v.get<int>()};
    if (v.is_array())
        return v.get<std::vector<int>>();
    throw std::invalid_argument(std::string("config: ") + key + " must be an integer or array");
}

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys = {
        "users", "bs_antennas", "ris_elements", "noise_density_dbm_hz", "bandwidth_hz",
        "p_total_w", "target_error", "alpha", "max_cbl", "min_cbl", "rician_bs", "rician_ris",
        "rician_dir", "bs_ris_distance_m", "user_ris_radius_m", "spacing_over_wavelength",
        "elevation_min_rad", "elevation_max_rad", "csi_rho", "random_phase_init",
        "precode_on_estimate", "ao_tol", "ao_max_iter", "sca_tol", "sca_max_rounds", "fp_tol",
        "fp_max_rounds", "pg_tol", "pg_max_iter"};
    return keys;
}

} // namespace

double SystemConfig::noise_power_w() const
{
    return std::pow(10.0, (noise_density_dbm_hz - 30.0) / 10.0) * bandwidth_hz;
}

double SystemConfig::min_cbl_total() const
{
    return static_cast<double>(std::accumulate(min_cbl.begin(), min_cbl.end(), 0));
}

void SystemConfig::normalize_per_user_fields()
{
    if (target_errors.size() == 1)
        target_errors.assign(static_cast<std::size_t>(users), target_errors[0]);
    if (min_cbl.size() == 1)
        min_cbl.assign(static_cast<std::size_t>(users), min_cbl[0]);
}

void SystemConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };

    if (users < 1)
        fail("users must be >= 1");
    if (!is_perfect_square(bs_antennas))
        fail("bs_antennas must be a positive perfect square");
    if (!is_perfect_square(ris_elements))
        fail("ris_elements must be a positive perfect square");
    if (!(bandwidth_hz > 0.0))
        fail("bandwidth_hz must be positive");
    if (!(p_total_w > 0.0))
        fail("p_total_w must be positive");
    if (target_errors.size() != static_cast<std::size_t>(users))
        fail("target_error must have one entry per user");
    for (double eps : target_errors)
        if (!(eps > 0.0) || !(eps <= 0.5))
            fail("target_error entries must be in (0, 0.5]");
    if (!(alpha >= 0.0) || !(alpha <= 1.0))
        fail("alpha must be in [0, 1]");
    if (min_cbl.size() != static_cast<std::size_t>(users))
        fail("min_cbl must have one entry per user");
    for (int m : min_cbl)
        if (m < 1)
            fail("min_cbl entries must be >= 1");
    if (static_cast<double>(max_cbl) < min_cbl_total())
        fail("max_cbl must be at least the sum of min_cbl");
    if (rician_bs < 0.0 || rician_ris < 0.0 || rician_dir < 0.0)
        fail("rician factors must be nonnegative");
    if (!(bs_ris_distance_m > 0.0))
        fail("bs_ris_distance_m must be positive");
    if (!(user_ris_radius_m > 0.0))
        fail("user_ris_radius_m must be positive");
    if (!(spacing_over_wavelength > 0.0))
        fail("spacing_over_wavelength must be positive");
    if (!(elevation_min_rad <= elevation_max_rad))
        fail("elevation_min_rad must not exceed elevation_max_rad");
    if (!(csi_rho >= 0.0) || !(csi_rho < 1.0))
        fail("csi_rho must be in [0, 1)");
    if (!(solver.ao_tol > 0.0) || !(solver.sca_tol > 0.0) || !(solver.fp_tol > 0.0) ||
        !(solver.pg_tol > 0.0))
        fail("solver tolerances must be positive");
    if (solver.ao_max_iter < 1 || solver.sca_max_rounds < 1 || solver.fp_max_rounds < 1 ||
        solver.pg_max_iter < 1)
        fail("solver iteration caps must be >= 1");
}

SystemConfig parse_config(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    if (!j.is_object())
        throw std::invalid_argument("config: top-level JSON value must be an object");

    for (const auto& item : j.items())
        if (known_keys().count(item.key()) == 0)
            throw std::invalid_argument("config: unknown key '" + item.key() + "'");

    SystemConfig c;
    auto get = [&j](const char* key) -> const json* {
        auto it = j.find(key);
        return it == j.end() ? nullptr : &*it;
    };

    if (auto* v = get("users")) c.users = v->get<int>();
    if (auto* v = get("bs_antennas")) c.bs_antennas = v->get<int>();
    if (auto* v = get("ris_elements")) c.ris_elements = v->get<int>();
    if (auto* v = get("noise_density_dbm_hz")) c.noise_density_dbm_hz = v->get<double>();
    if (auto* v = get("bandwidth_hz")) c.bandwidth_hz = v->get<double>();
    if (auto* v = get("p_total_w")) c.p_total_w = v->get<double>();
    if (auto* v = get("target_error")) c.target_errors = read_per_user_double(*v, "target_error");
    if (auto* v = get("alpha")) c.alpha = v->get<double>();
    if (auto* v = get("max_cbl")) c.max_cbl = v->get<int>();
    if (auto* v = get("min_cbl")) c.min_cbl = read_per_user_int(*v, "min_cbl");
    if (auto* v = get("rician_bs")) c.rician_bs = v->get<double>();
    if (auto* v = get("rician_ris")) c.rician_ris = v->get<double>();
    if (auto* v = get("rician_dir")) c.rician_dir = v->get<double>();
    if (auto* v = get("bs_ris_distance_m")) c.bs_ris_distance_m = v->get<double>();
    if (auto* v = get("user_ris_radius_m")) c.user_ris_radius_m = v->get<double>();
    if (auto* v = get("spacing_over_wavelength")) c.spacing_over_wavelength = v->get<double>();
    if (auto* v = get("elevation_min_rad")) c.elevation_min_rad = v->get<double>();
    if (auto* v = get("elevation_max_rad")) c.elevation_max_rad = v->get<double>();
    if (auto* v = get("csi_rho")) c.csi_rho = v->get<double>();
    if (auto* v = get("random_phase_init")) c.random_phase_init = v->get<bool>();
    if (auto* v = get("precode_on_estimate")) c.precode_on_estimate = v->get<bool>();
    if (auto* v = get("ao_tol")) c.solver.ao_tol = v->get<double>();
    if (auto* v = get("ao_max_iter")) c.solver.ao_max_iter = v->get<int>();
    if (auto* v = get("sca_tol")) c.solver.sca_tol = v->get<double>();
    if (auto* v = get("sca_max_rounds")) c.solver.sca_max_rounds = v->get<int>();
    if (auto* v = get("fp_tol")) c.solver.fp_tol = v->get<double>();
    if (auto* v = get("fp_max_rounds")) c.solver.fp_max_rounds = v->get<int>();
    if (auto* v = get("pg_tol")) c.solver.pg_tol = v->get<double>();
    if (auto* v = get("pg_max_iter")) c.solver.pg_max_iter = v->get<int>();

    c.normalize_per_user_fields();
    c.validate();
    return c;
}

SystemConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_json(const SystemConfig& config)
{
    json j;
    j["users"] = config.users;
    j["bs_antennas"] = config.bs_antennas;
    j["ris_elements"] = config.ris_elements;
    j["noise_density_dbm_hz"] = config.noise_density_dbm_hz;
    j["bandwidth_hz"] = config.bandwidth_hz;
    j["p_total_w"] = config.p_total_w;
    j["target_error"] = config.target_errors;
    j["alpha"] = config.alpha;
    j["max_cbl"] = config.max_cbl;
    j["min_cbl"] = config.min_cbl;
    j["rician_bs"] = config.rician_bs;
    j["rician_ris"] = config.rician_ris;
    j["rician_dir"] = config.rician_dir;
    j["bs_ris_distance_m"] = config.bs_ris_distance_m;
    j["user_ris_radius_m"] = config.user_ris_radius_m;
    j["spacing_over_wavelength"] = config.spacing_over_wavelength;
    j["elevation_min_rad"] = config.elevation_min_rad;
    j["elevation_max_rad"] = config.elevation_max_rad;
    j["csi_rho"] = config.csi_rho;
    j["random_phase_init"] = config.random_phase_init;
    j["precode_on_estimate"] = config.precode_on_estimate;
    j["ao_tol"] = config.solver.ao_tol;
    j["ao_max_iter"] = config.solver.ao_max_iter;
    j["sca_tol"] = config.solver.sca_tol;
    j["sca_max_rounds"] = config.solver.sca_max_rounds;
    j["fp_tol"] = config.solver.fp_tol;
    j["fp_max_rounds"] = config.solver.fp_max_rounds;
    j["pg_tol"] = config.solver.pg_tol;
    j["pg_max_iter"] = config.solver.pg_max_iter;
    return j.dump(2) + "\n";
}

void save_config(const SystemConfig& config, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::invalid_argument("config: cannot write '" + path + "'");
    out << config_to_json(config);
}

} // namespace risopt
