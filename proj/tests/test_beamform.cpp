// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "risopt/beamform.hpp"
#include "risopt/rng.hpp"

using namespace risopt;
using cdouble = std::complex<double>;

namespace {

SystemConfig test_config(int users, int bs, int ris)
{
    SystemConfig cfg;
    cfg.users = users;
    cfg.bs_antennas = bs;
    cfg.ris_elements = ris;
    cfg.target_errors = {1e-6};
    cfg.min_cbl = {10};
    cfg.normalize_per_user_fields();
    return cfg;
}

// Random channel set with order-one entries; scale does not matter for the
// identities exercised here.
ChannelSet synthetic_channels(const SystemConfig& cfg, std::uint64_t seed)
{
    Rng rng(seed);
    ChannelSet set;
    set.bs_ris.resize(cfg.ris_elements, cfg.bs_antennas);
    for (Eigen::Index i = 0; i < set.bs_ris.rows(); ++i)
        for (Eigen::Index j = 0; j < set.bs_ris.cols(); ++j)
            set.bs_ris(i, j) = rng.next_cgaussian();
    set.ris_user.resize(cfg.users);
    set.direct.resize(cfg.users);
    set.ris_user_beta.assign(cfg.users, 1.0);
    set.direct_beta.assign(cfg.users, 1.0);
    set.bs_ris_beta = 1.0;
    for (int k = 0; k < cfg.users; ++k) {
        set.ris_user[k].resize(cfg.ris_elements);
        set.direct[k].resize(cfg.bs_antennas);
        for (Eigen::Index i = 0; i < cfg.ris_elements; ++i)
            set.ris_user[k](i) = rng.next_cgaussian();
        for (Eigen::Index i = 0; i < cfg.bs_antennas; ++i)
            set.direct[k](i) = rng.next_cgaussian();
    }
    return set;
}

Eigen::VectorXcd random_unit_phase(int n, Rng& rng)
{
    Eigen::VectorXcd theta(n);
    for (int i = 0; i < n; ++i) {
        const double phi = rng.uniform(-M_PI, M_PI);
        theta(i) = cdouble(std::cos(phi), std::sin(phi));
    }
    return theta;
}

} // namespace

TEST_CASE("effective_channel")
{
    const SystemConfig cfg = test_config(2, 4, 9);
    const ChannelSet set = synthetic_channels(cfg, 1);
    Rng rng(2);

    SUBCASE("zero phase leaves only the direct channel")
    {
        const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(cfg.ris_elements);
        for (int k = 0; k < cfg.users; ++k) {
            const Eigen::RowVectorXcd h = effective_channel(set, zero, k);
            CHECK((h - set.direct[k].adjoint()).norm() < 1e-14);
        }
    }

    SUBCASE("scalar case expands by hand")
    {
        const SystemConfig tiny = test_config(1, 1, 1);
        const ChannelSet s = synthetic_channels(tiny, 3);
        const cdouble theta(0.6, 0.8);
        Eigen::VectorXcd phase(1);
        phase << theta;
        const cdouble expected =
            std::conj(s.direct[0](0)) + std::conj(theta) * std::conj(s.ris_user[0](0)) * s.bs_ris(0, 0);
        const Eigen::RowVectorXcd h = effective_channel(s, phase, 0);
        CHECK(std::abs(h(0) - expected) < 1e-14);
    }

    SUBCASE("matches the naive loop oracle")
    {
        const Eigen::VectorXcd theta = random_unit_phase(cfg.ris_elements, rng);
        for (int k = 0; k < cfg.users; ++k) {
            const Eigen::RowVectorXcd h = effective_channel(set, theta, k);
            const auto ref =
                oracle::naive_effective_channel(set.bs_ris, set.ris_user[k], set.direct[k], theta);
            for (int b = 0; b < cfg.bs_antennas; ++b)
                CHECK(std::abs(h(b) - ref[static_cast<std::size_t>(b)]) < 1e-12);
        }
    }
}

TEST_CASE("mrt_precoders")
{
    const SystemConfig cfg = test_config(3, 4, 9);
    const ChannelSet set = synthetic_channels(cfg, 4);
    Rng rng(5);
    const Eigen::VectorXcd theta = random_unit_phase(cfg.ris_elements, rng);
    const auto precoders = mrt_precoders(set, theta);

    for (const auto& w : precoders)
        CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("matched filter identity: |d_kk + theta^H r_kk| = ||h_k||")
    {
        const CouplingSet coup = coupling_set(set, precoders);
        for (int k = 0; k < cfg.users; ++k) {
            const double own = std::abs(coup.gain(k, k, theta));
            const double norm = effective_channel(set, theta, k).norm();
            CHECK(own == doctest::Approx(norm).epsilon(1e-12));
        }
    }

    SUBCASE("B = 1 gives a unit-modulus scalar")
    {
        const SystemConfig tiny = test_config(1, 1, 4);
        const ChannelSet s = synthetic_channels(tiny, 6);
        const auto w = mrt_precoders(s, Eigen::VectorXcd::Ones(4));
        CHECK(std::abs(std::abs(w[0](0)) - 1.0) < 1e-12);
    }

    SUBCASE("zero channel is rejected")
    {
        ChannelSet degenerate = set;
        degenerate.bs_ris.setZero();
        degenerate.ris_user[0].setZero();
        degenerate.direct[0].setZero();
        CHECK_THROWS_AS(mrt_precoders(degenerate, theta), std::runtime_error);
    }
}

TEST_CASE("coupling_set against the triple-loop oracle")
{
    const SystemConfig cfg = test_config(3, 4, 9);
    const ChannelSet set = synthetic_channels(cfg, 8);
    Rng rng(9);
    const Eigen::VectorXcd theta = random_unit_phase(cfg.ris_elements, rng);
    const auto precoders = mrt_precoders(set, theta);
    const CouplingSet coup = coupling_set(set, precoders);
    const auto ref = oracle::naive_couplings(set.bs_ris, set.ris_user, set.direct, precoders);

    for (int tx = 0; tx < cfg.users; ++tx) {
        for (int user = 0; user < cfg.users; ++user) {
            CHECK(std::abs(coup.d_of(tx, user) -
                           ref.d[static_cast<std::size_t>(tx)][static_cast<std::size_t>(user)]) <
                  1e-12);
            const Eigen::VectorXcd r = coup.r_of(tx, user);
            for (int n = 0; n < cfg.ris_elements; ++n)
                CHECK(std::abs(r(n) - ref.r[static_cast<std::size_t>(tx)]
                                           [static_cast<std::size_t>(user)]
                                           [static_cast<std::size_t>(n)]) < 1e-12);
        }
    }

    SUBCASE("bilinearity: scaling a precoder scales its column of d and r")
    {
        auto scaled = precoders;
        const cdouble c(2.0, -1.0);
        scaled[1] = c * scaled[1];
        const CouplingSet coup2 = coupling_set(set, scaled);
        for (int user = 0; user < cfg.users; ++user) {
            CHECK(std::abs(coup2.d_of(1, user) - c * coup.d_of(1, user)) < 1e-12);
            CHECK((coup2.r_of(1, user) - c * coup.r_of(1, user)).norm() < 1e-12);
        }
    }

    SUBCASE("tiny case by hand")
    {
        const SystemConfig tiny = test_config(1, 1, 1);
        const ChannelSet s = synthetic_channels(tiny, 10);
        std::vector<Eigen::VectorXcd> w{Eigen::VectorXcd::Ones(1)};
        const CouplingSet c1 = coupling_set(s, w);
        CHECK(std::abs(c1.d_of(0, 0) - std::conj(s.direct[0](0))) < 1e-14);
        CHECK(std::abs(c1.r_of(0, 0)(0) - std::conj(s.ris_user[0](0)) * s.bs_ris(0, 0)) < 1e-14);
    }
}

TEST_CASE("sinr_all")
{
    const SystemConfig cfg = test_config(2, 4, 9);
    const ChannelSet set = synthetic_channels(cfg, 11);
    Rng rng(12);
    const Eigen::VectorXcd theta = random_unit_phase(cfg.ris_elements, rng);
    const auto precoders = mrt_precoders(set, theta);
    const CouplingSet coup = coupling_set(set, precoders);
    const double noise = 0.01;

    SUBCASE("single user has no interference")
    {
        const SystemConfig one = test_config(1, 4, 9);
        const ChannelSet s = synthetic_channels(one, 13);
        const auto w = mrt_precoders(s, theta);
        const CouplingSet c = coupling_set(s, w);
        Eigen::VectorXd p(1);
        p << 0.25;
        const Eigen::VectorXd sinr = sinr_all(c, p, theta, noise);
        const double expected = 0.25 * std::norm(c.gain(0, 0, theta)) / noise;
        CHECK(sinr(0) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("zero power gives zero SINR")
    {
        const Eigen::VectorXd sinr =
            sinr_all(coup, Eigen::VectorXd::Zero(2), theta, noise);
        CHECK(sinr(0) == 0.0);
        CHECK(sinr(1) == 0.0);
    }

    SUBCASE("two-user hand expansion")
    {
        Eigen::VectorXd p(2);
        p << 0.4, 0.6;
        const Eigen::VectorXd sinr = sinr_all(coup, p, theta, noise);
        for (int k = 0; k < 2; ++k) {
            const int other = 1 - k;
            const double own = p(k) * std::norm(coup.d_of(k, k) + theta.dot(coup.r_of(k, k)));
            const double cross =
                p(other) * std::norm(coup.d_of(other, k) + theta.dot(coup.r_of(other, k)));
            CHECK(sinr(k) == doctest::Approx(own / (cross + noise)).epsilon(1e-12));
        }
    }

    SUBCASE("matches a from-scratch evaluation through effective channels")
    {
        Eigen::VectorXd p(2);
        p << 0.7, 0.3;
        const Eigen::VectorXd sinr = sinr_all(coup, p, theta, noise);
        for (int k = 0; k < 2; ++k) {
            const Eigen::RowVectorXcd h = effective_channel(set, theta, k);
            double interference = noise;
            for (int tx = 0; tx < 2; ++tx)
                if (tx != k)
                    interference += p(tx) * std::norm((h * precoders[tx])(0));
            const double own = p(k) * std::norm((h * precoders[k])(0));
            CHECK(sinr(k) == doctest::Approx(own / interference).epsilon(1e-10));
        }
    }

    SUBCASE("joint phase rotation of theta and r leaves gains unchanged")
    {
        const cdouble rot = std::polar(1.0, 0.77);
        CouplingSet rotated = coup;
        for (auto& r : rotated.r_for_user)
            r *= rot;
        const Eigen::VectorXcd theta_rot = rot * theta;
        for (int tx = 0; tx < 2; ++tx)
            for (int user = 0; user < 2; ++user)
                CHECK(std::abs(std::abs(rotated.gain(tx, user, theta_rot)) -
                               std::abs(coup.gain(tx, user, theta))) < 1e-12);
    }

    SUBCASE("MRT own-signal term beats random precoders")
    {
        Rng alt(77);
        for (int k = 0; k < 2; ++k) {
            const double own = std::norm(coup.gain(k, k, theta));
            const Eigen::RowVectorXcd h = effective_channel(set, theta, k);
            for (int trial = 0; trial < 100; ++trial) {
                Eigen::VectorXcd w(cfg.bs_antennas);
                for (int b = 0; b < cfg.bs_antennas; ++b)
                    w(b) = alt.next_cgaussian();
                w.normalize();
                CHECK(own >= std::norm((h * w)(0)) - 1e-12);
            }
        }
    }
}

TEST_CASE("total_fbl_rate")
{
    const SystemConfig cfg = [] {
        SystemConfig c = test_config(1, 4, 9);
        c.p_total_w = 1.0;
        c.max_cbl = 400;
        return c;
    }();
    ChannelSet set = synthetic_channels(cfg, 21);
    const Eigen::VectorXcd theta = Eigen::VectorXcd::Ones(cfg.ris_elements);
    const auto precoders = mrt_precoders(set, theta);
    const CouplingSet coup = coupling_set(set, precoders);

    SUBCASE("composition with the single-user example")
    {
        // Choose the power so the SINR is exactly 1, with eps = 0.5.
        SystemConfig c = cfg;
        c.target_errors = {0.5};
        const double own = std::norm(coup.gain(0, 0, theta));
        Eigen::VectorXd p(1);
        p << c.noise_power_w() / own;
        Allocation alloc{p, Eigen::VectorXd::Constant(1, 100.0), theta};
        const RateBreakdown out = total_fbl_rate(alloc, coup, c);
        CHECK(out.sinr(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.total == doctest::Approx(106.64385618977472).epsilon(1e-9));
    }

    SUBCASE("doubling blocklengths at eps = 0.5 follows the direct evaluation")
    {
        SystemConfig c = cfg;
        c.target_errors = {0.5};
        Eigen::VectorXd p(1);
        p << 0.5;
        Allocation a1{p, Eigen::VectorXd::Constant(1, 100.0), theta};
        Allocation a2{p, Eigen::VectorXd::Constant(1, 200.0), theta};
        const RateBreakdown r1 = total_fbl_rate(a1, coup, c);
        const RateBreakdown r2 = total_fbl_rate(a2, coup, c);
        const double cap = shannon_capacity(r1.sinr(0));
        CHECK(r2.total - r1.total ==
              doctest::Approx(100.0 * cap + std::log2(2.0)).epsilon(1e-9));
        CHECK(r2.total > 2.0 * r1.total - 2.0 * std::log2(200.0));
    }

    SUBCASE("zero power clamps the reported bits at zero")
    {
        // With the high-SNR dispersion constant the penalty term survives at
        // zero SINR and drives the raw bits negative; the report clamps.
        Allocation alloc{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 100.0), theta};
        const RateBreakdown out = total_fbl_rate(alloc, coup, cfg, DispersionMode::Approximate);
        CHECK(out.per_user(0) == 0.0);
        CHECK(out.per_user_raw(0) < 0.0);
        CHECK(out.total == 0.0);

        // Exact dispersion vanishes at zero SINR, leaving only the log term.
        const RateBreakdown exact = total_fbl_rate(alloc, coup, cfg, DispersionMode::Exact);
        CHECK(exact.per_user_raw(0) == doctest::Approx(std::log2(100.0)));
    }
}

TEST_CASE("allocation validation")
{
    SystemConfig cfg = test_config(2, 4, 4);
    cfg.p_total_w = 0.01;
    cfg.max_cbl = 100;

    Allocation good{Eigen::VectorXd::Constant(2, 0.005),
                    Eigen::VectorXd::Constant(2, 50.0),
                    Eigen::VectorXcd::Ones(4)};
    CHECK_NOTHROW(good.validate(cfg));

    Allocation over_power = good;
    over_power.power = Eigen::VectorXd::Constant(2, 0.006);
    CHECK_THROWS_AS(over_power.validate(cfg), std::invalid_argument);

    Allocation low_cbl = good;
    low_cbl.blocklength(0) = 5.0;
    CHECK_THROWS_AS(low_cbl.validate(cfg), std::invalid_argument);

    Allocation over_cbl = good;
    over_cbl.blocklength = Eigen::VectorXd::Constant(2, 51.0);
    CHECK_THROWS_AS(over_cbl.validate(cfg), std::invalid_argument);

    Allocation interior = good;
    interior.phase(0) = cdouble(0.5, 0.0);
    CHECK_THROWS_AS(interior.validate(cfg), std::invalid_argument);
    CHECK_NOTHROW(interior.validate(cfg, false));

    Allocation outside = good;
    outside.phase(0) = cdouble(1.1, 0.0);
    CHECK_THROWS_AS(outside.validate(cfg, false), std::invalid_argument);
}
