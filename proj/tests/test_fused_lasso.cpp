#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gaptv/fused_lasso.hpp"
#include "oracles.hpp"

using namespace gaptv;

TEST_CASE("fused_lasso_1d trivial cases") {
    SECTION("lambda zero returns the targets") {
        const std::vector<double> a{3.0, -1.0, 2.5, 0.0};
        const std::vector<double> w{1.0, 2.0, 0.5, 4.0};
        CHECK(fused_lasso_1d_weighted(a, w, 0.0) == a);
    }
    SECTION("single site") {
        CHECK(fused_lasso_1d_weighted(std::vector{4.2}, std::vector{2.0}, 5.0) ==
              std::vector{4.2});
    }
    SECTION("two-point closed form") {
        const std::vector<double> a{0.0, 1.0};
        const std::vector<double> w{1.0, 1.0};
        // below the fusion threshold |a1-a2| w1 w2/(w1+w2) = 0.5
        const auto loose = fused_lasso_1d_weighted(a, w, 0.3);
        CHECK(loose[0] == Catch::Approx(0.3).margin(1e-12));
        CHECK(loose[1] == Catch::Approx(0.7).margin(1e-12));
        // at and above the threshold: fused at the weighted mean
        for (double lam : {0.5, 0.8, 10.0}) {
            const auto fused = fused_lasso_1d_weighted(a, w, lam);
            CHECK(fused[0] == Catch::Approx(0.5).margin(1e-12));
            CHECK(fused[1] == Catch::Approx(0.5).margin(1e-12));
        }
    }
    SECTION("full fusion reaches the weighted mean") {
        const std::vector<double> a{1.0, 5.0, -2.0, 3.0};
        const std::vector<double> w{2.0, 1.0, 3.0, 4.0};
        const auto b = fused_lasso_1d_weighted(a, w, 1e6);
        const double mean = (2.0 * 1 + 1.0 * 5 + 3.0 * -2 + 4.0 * 3) / 10.0;
        for (double v : b) CHECK(v == Catch::Approx(mean).margin(1e-9));
    }
    SECTION("argument validation") {
        CHECK_THROWS_AS(
            fused_lasso_1d_weighted(std::vector{1.0}, std::vector{0.0}, 1.0),
            std::invalid_argument);
        CHECK_THROWS_AS(
            fused_lasso_1d_weighted(std::vector{1.0, 2.0}, std::vector{1.0}, 1.0),
            std::invalid_argument);
    }
}

TEST_CASE("fused_lasso_1d matches the dual-QP oracle") {
    std::mt19937_64 eng(101);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> uw(0.1, 3.0);
    std::uniform_int_distribution<int> un(2, 12);
    std::uniform_real_distribution<double> ul(0.0, 2.5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = un(eng);
        std::vector<double> a(static_cast<std::size_t>(n)),
            w(static_cast<std::size_t>(n));
        for (double& v : a) v = g(eng);
        for (double& v : w) v = uw(eng);
        const double lam = ul(eng);
        const auto mine = fused_lasso_1d_weighted(a, w, lam);
        const auto ref = oracle::fl1d_dual_oracle(a, w, lam);
        const double obj_mine = oracle::fl1d_objective(mine, a, w, lam);
        const double obj_ref = oracle::fl1d_objective(ref, a, w, lam);
        CHECK(obj_mine <= obj_ref + 1e-6);
        CHECK(std::abs(obj_mine - obj_ref) <= 1e-6);
    }
}

TEST_CASE("zero-weight positions tie to the fusion structure") {
    SECTION("interior zero-weight site ties to the left segment") {
        const std::vector<double> a{0.0, 99.0, 10.0};
        const std::vector<double> w{1.0, 0.0, 1.0};
        const auto b = fused_lasso_1d_weighted(a, w, 0.5);
        // the kept sites solve the two-point problem; the middle copies left
        CHECK(b[1] == b[0]);
        const auto two = fused_lasso_1d_weighted(std::vector{0.0, 10.0},
                                                 std::vector{1.0, 1.0}, 0.5);
        CHECK(b[0] == Catch::Approx(two[0]));
        CHECK(b[2] == Catch::Approx(two[1]));
    }
    SECTION("leading zero-weight run ties rightward") {
        const std::vector<double> a{-5.0, -5.0, 1.0, 2.0};
        const std::vector<double> w{0.0, 0.0, 1.0, 1.0};
        const auto b = fused_lasso_1d_weighted(a, w, 0.1);
        CHECK(b[0] == b[2]);
        CHECK(b[1] == b[2]);
    }
    SECTION("objective over kept sites matches the reduced problem") {
        std::mt19937_64 eng(7);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> a(8), w(8);
            std::vector<double> ka, kw;
            for (std::size_t i = 0; i < 8; ++i) {
                a[i] = g(eng);
                w[i] = (eng() % 3 == 0) ? 0.0 : 1.0 + std::abs(g(eng));
                if (w[i] > 0.0) {
                    ka.push_back(a[i]);
                    kw.push_back(w[i]);
                }
            }
            if (ka.empty()) continue;
            const double lam = 0.4;
            const auto full = fused_lasso_1d_weighted(a, w, lam);
            // zero-weight sites must sit between (or on) their kept
            // neighbours' values so the chain penalty collapses exactly
            const double obj_full = oracle::fl1d_objective(full, a, w, lam);
            const auto red = fused_lasso_1d_weighted(ka, kw, lam);
            const double obj_red = oracle::fl1d_objective(red, ka, kw, lam);
            CHECK(obj_full == Catch::Approx(obj_red).margin(1e-9));
        }
    }
}

TEST_CASE("fused_lasso_1d longer chains against the oracle") {
    std::mt19937_64 eng(555);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> uw(0.2, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 200;
        std::vector<double> a(static_cast<std::size_t>(n)),
            w(static_cast<std::size_t>(n));
        for (double& v : a) v = g(eng);
        for (double& v : w) v = uw(eng);
        const double lam = 0.7;
        const auto mine = fused_lasso_1d_weighted(a, w, lam);
        const auto ref = oracle::fl1d_dual_oracle(a, w, lam);
        CHECK(oracle::fl1d_objective(mine, a, w, lam) <=
              oracle::fl1d_objective(ref, a, w, lam) + 1e-6);
    }
}
