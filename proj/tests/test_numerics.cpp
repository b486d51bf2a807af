#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "uolens/numerics.hpp"
#include "uolens/rng.hpp"

using namespace uolens;

namespace {

Eigen::ArrayXd arr(std::initializer_list<double> v) {
    Eigen::ArrayXd a(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) a[i++] = x;
    return a;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    return Eigen::VectorXd(arr(v).matrix());
}

double entropic_objective(const Eigen::ArrayXd& w, const Eigen::ArrayXd& cost,
                          const Eigen::ArrayXd& prior, const WeightedEntropyGeometry& geom) {
    return (cost * w).sum() + weighted_entropy_bregman(w, prior, geom);
}

// Independent oracle: exhaustive simplex grid search at a fixed resolution,
// for up to three active coordinates.
Eigen::ArrayXd grid_search_solve(const Eigen::ArrayXd& cost, const Eigen::ArrayXd& prior,
                                 const WeightedEntropyGeometry& geom, int resolution) {
    const Eigen::Index n = cost.size();
    REQUIRE(n <= 3);
    Eigen::ArrayXd best = Eigen::ArrayXd::Zero(n);
    double best_val = std::numeric_limits<double>::infinity();
    const double h = 1.0 / resolution;
    if (n == 2) {
        for (int i = 0; i <= resolution; ++i) {
            Eigen::ArrayXd w = arr({i * h, (resolution - i) * h});
            const double v = entropic_objective(w, cost, prior, geom);
            if (v < best_val) {
                best_val = v;
                best = w;
            }
        }
    } else {
        for (int i = 0; i <= resolution; ++i) {
            for (int j = 0; j <= resolution - i; ++j) {
                Eigen::ArrayXd w = arr({i * h, j * h, (resolution - i - j) * h});
                const double v = entropic_objective(w, cost, prior, geom);
                if (v < best_val) {
                    best_val = v;
                    best = w;
                }
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("kl_divergence basics") {
    CHECK(kl_divergence(arr({0.3, 0.7}), arr({0.3, 0.7})) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(kl_divergence(arr({1.0, 0.0}), arr({0.5, 0.5}))
          == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // 0.25 log(0.5) + 0.75 log(1.5)
    CHECK(kl_divergence(arr({0.25, 0.75}), arr({0.5, 0.5}))
          == doctest::Approx(0.25 * std::log(0.5) + 0.75 * std::log(1.5)).epsilon(1e-12));
    CHECK_THROWS_AS(kl_divergence(arr({0.5, 0.5}), arr({1.0, 0.0})), DomainError);
}

TEST_CASE("weighted entropy bregman") {
    WeightedEntropyGeometry uni(arr({0.7, 0.7}));
    const Eigen::ArrayXd w = arr({0.2, 0.8});
    const Eigen::ArrayXd wp = arr({0.6, 0.4});
    // Uniform rates factor out: D_psi = KL / eta.
    CHECK(weighted_entropy_bregman(w, wp, uni)
          == doctest::Approx(kl_divergence(w, wp) / 0.7).epsilon(1e-12));
    CHECK(weighted_entropy_bregman(w, w, uni) == doctest::Approx(0.0).epsilon(1e-14));

    // Direct summation of (1/eta_j)(w_j log(w_j/wp_j) - w_j + wp_j).
    WeightedEntropyGeometry mixed(arr({1.0, 2.0}));
    const double expected = (1.0 * std::log(2.0) - 1.0 + 0.5) / 1.0 + (0.0 - 0.0 + 0.5) / 2.0;
    CHECK(expected == doctest::Approx(0.4431471805599453).epsilon(1e-12));
    CHECK(weighted_entropy_bregman(arr({1.0, 0.0}), arr({0.5, 0.5}), mixed)
          == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bregman nonnegative on the simplex, zero iff equal") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(4));
        Eigen::ArrayXd w(n), wp(n), rate(n);
        for (int i = 0; i < n; ++i) {
            w[i] = rng.uniform(1e-3, 1.0);
            wp[i] = rng.uniform(1e-3, 1.0);
            rate[i] = std::pow(10.0, rng.uniform(-3.0, 3.0));
        }
        w /= w.sum();
        wp /= wp.sum();
        WeightedEntropyGeometry geom{rate};
        CHECK(weighted_entropy_bregman(w, wp, geom) >= -1e-14);
        CHECK(weighted_entropy_bregman(w, w, geom) < 1e-12);
        if ((w - wp).abs().maxCoeff() > 1e-6) CHECK(weighted_entropy_bregman(w, wp, geom) > 0.0);
    }
}

TEST_CASE("entropic solve trivial cases") {
    WeightedEntropyGeometry geom(arr({0.5, 2.0, 4.0}));
    const Eigen::ArrayXd prior = arr({0.2, 0.5, 0.3});

    SUBCASE("zero cost with normalized prior returns the prior") {
        const Eigen::ArrayXd w =
            entropic_omd_solve(Eigen::ArrayXd::Zero(3), prior, geom, full_mask(3));
        CHECK((w - prior).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("single active coordinate gets all the mass") {
        Mask mask{0, 1, 0};
        const Eigen::ArrayXd w = entropic_omd_solve(arr({5.0, 100.0, -3.0}), prior, geom, mask);
        CHECK(w[0] == 0.0);
        CHECK(w[1] == 1.0);
        CHECK(w[2] == 0.0);
    }
    SUBCASE("zero-prior coordinate stays at zero") {
        const Eigen::ArrayXd w =
            entropic_omd_solve(arr({0.1, 0.2, 0.3}), arr({0.5, 0.0, 0.5}), geom, full_mask(3));
        CHECK(w[1] == 0.0);
        CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    }
    SUBCASE("empty active set is a configuration error") {
        CHECK_THROWS_AS(entropic_omd_solve(arr({0.0, 0.0, 0.0}), prior, geom, Mask{0, 0, 0}),
                        ConfigError);
    }
}

TEST_CASE("entropic solve matches uniform-rate closed form") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(5));
        const double eta = std::pow(10.0, rng.uniform(-2.0, 1.0));
        Eigen::ArrayXd cost(n), prior(n);
        for (int i = 0; i < n; ++i) {
            cost[i] = rng.uniform(-10.0, 10.0);
            prior[i] = rng.uniform(1e-3, 1.0);
        }
        prior /= prior.sum();
        WeightedEntropyGeometry geom{Eigen::ArrayXd::Constant(n, eta)};
        const Eigen::ArrayXd w = entropic_omd_solve(cost, prior, geom, full_mask(n));

        Eigen::ArrayXd expo = (-eta * cost).min(700.0);
        Eigen::ArrayXd closed = prior * (expo - expo.maxCoeff()).exp();
        closed /= closed.sum();
        CHECK((w - closed).abs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("entropic solve matches brute-force grid search") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(2));
        Eigen::ArrayXd cost(n), prior(n), rate(n);
        for (int i = 0; i < n; ++i) {
            cost[i] = rng.uniform(-2.0, 2.0);
            prior[i] = rng.uniform(0.05, 1.0);
            rate[i] = std::pow(10.0, rng.uniform(-1.0, 1.0));
        }
        prior /= prior.sum();
        WeightedEntropyGeometry geom{rate};
        const Eigen::ArrayXd w = entropic_omd_solve(cost, prior, geom, full_mask(n));
        const Eigen::ArrayXd brute = grid_search_solve(cost, prior, geom, 1000);
        CHECK((w - brute).abs().maxCoeff() < 5e-3);
    }
}

TEST_CASE("entropic solve KKT residuals") {
    SplitMix64 rng(47);
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(15));
        Eigen::ArrayXd cost(n), prior(n), rate(n);
        for (int i = 0; i < n; ++i) {
            cost[i] = rng.uniform(-10.0, 10.0);
            prior[i] = rng.uniform(1e-4, 1.0);
            rate[i] = std::pow(10.0, rng.uniform(-3.0, 3.0));
        }
        prior /= prior.sum();
        WeightedEntropyGeometry geom{rate};
        EntropicSolveStats stats;
        const Eigen::ArrayXd w =
            entropic_omd_solve(cost, prior, geom, full_mask(n), std::nullopt, &stats);
        CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
        for (int i = 0; i < n; ++i) {
            CHECK(w[i] >= 0.0);
            if (w[i] > 0.0) {
                const double stat = cost[i] + std::log(w[i] / prior[i]) / rate[i] + stats.multiplier;
                CHECK(std::abs(stat) <= 1e-10);
            }
        }
    }
}

TEST_CASE("entropic solve objective no worse than random feasible points") {
    SplitMix64 rng(59);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3;
        Eigen::ArrayXd cost(n), prior(n), rate(n);
        for (int i = 0; i < n; ++i) {
            cost[i] = rng.uniform(-5.0, 5.0);
            prior[i] = rng.uniform(0.05, 1.0);
            rate[i] = std::pow(10.0, rng.uniform(-2.0, 2.0));
        }
        prior /= prior.sum();
        WeightedEntropyGeometry geom{rate};
        const Eigen::ArrayXd w = entropic_omd_solve(cost, prior, geom, full_mask(n));
        const double opt = entropic_objective(w, cost, prior, geom);
        for (int k = 0; k < 20; ++k) {
            Eigen::ArrayXd q(n);
            for (int i = 0; i < n; ++i) q[i] = rng.uniform(1e-6, 1.0);
            q /= q.sum();
            CHECK(opt <= entropic_objective(q, cost, prior, geom) + 1e-10);
        }
    }
}

TEST_CASE("euclidean omd step") {
    const auto ball = ConvexDomain::ball(vec({0.0, 0.0}), 1.0);
    CHECK((euclidean_omd_step(vec({0.0, 0.0}), vec({0.3, -0.2}), 0.7, ball) - vec({0.3, -0.2}))
              .norm()
          < 1e-15);
    // Unconstrained solution (2, 0) projects radially to (1, 0).
    CHECK((euclidean_omd_step(vec({-4.0, 0.0}), vec({0.0, 0.0}), 1.0, ball) - vec({1.0, 0.0}))
              .norm()
          < 1e-12);
    const auto big = ConvexDomain::ball(vec({0.0, 0.0}), 100.0);
    CHECK((euclidean_omd_step(vec({1.0, 0.0}), vec({0.0, 0.0}), 1.0, big) - vec({-0.5, 0.0}))
              .norm()
          < 1e-12);
}

TEST_CASE("matrix omd step") {
    const auto big = ConvexDomain::ball(vec({0.0, 0.0}), 100.0);
    SUBCASE("zero gradient returns the center") {
        Eigen::MatrixXd u = Eigen::MatrixXd::Identity(2, 2) * 3.0;
        CHECK((matrix_omd_step(vec({0.0, 0.0}), vec({0.4, 0.1}), u, big) - vec({0.4, 0.1})).norm()
              < 1e-15);
    }
    SUBCASE("identity metric gives center - g") {
        Eigen::MatrixXd u = Eigen::MatrixXd::Identity(2, 2);
        const auto x = matrix_omd_step(vec({0.3, -0.1}), vec({0.0, 0.0}), u, big);
        CHECK((x - vec({-0.3, 0.1})).norm() < 1e-12);
    }
    SUBCASE("scalar box case") {
        const auto box = ConvexDomain::box(vec({-10.0}), vec({10.0}));
        Eigen::MatrixXd u(1, 1);
        u << 4.0;
        const auto x = matrix_omd_step(vec({2.0}), vec({0.0}), u, box);
        CHECK(x[0] == doctest::Approx(-0.5).epsilon(1e-12));
    }
    SUBCASE("gamma * I agrees with euclidean step 2/gamma") {
        SplitMix64 rng(71);
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 2 + static_cast<int>(rng.next_below(4));
            const double gamma = std::pow(10.0, rng.uniform(-1.0, 2.0));
            Eigen::VectorXd g(d), c(d);
            for (int i = 0; i < d; ++i) {
                g[i] = rng.uniform(-3.0, 3.0);
                c[i] = rng.uniform(-0.3, 0.3);
            }
            const auto dom = ConvexDomain::ball(Eigen::VectorXd::Zero(d), 1.0);
            const auto a = matrix_omd_step(g, c, gamma * Eigen::MatrixXd::Identity(d, d), dom);
            const auto b = euclidean_omd_step(g, c, 2.0 / gamma, dom);
            CHECK((a - b).norm() < 1e-10);
        }
    }
    SUBCASE("constrained ball solve satisfies the norm constraint and beats feasible points") {
        SplitMix64 rng(83);
        for (int trial = 0; trial < 50; ++trial) {
            const int d = 3;
            Eigen::MatrixXd a(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
            Eigen::MatrixXd u = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
            Eigen::VectorXd g(d), c(d);
            for (int i = 0; i < d; ++i) {
                g[i] = rng.uniform(-5.0, 5.0);
                c[i] = rng.uniform(-0.4, 0.4);
            }
            const auto dom = ConvexDomain::ball(Eigen::VectorXd::Zero(d), 0.6);
            const auto x = matrix_omd_step(g, c, u, dom);
            CHECK(dom.contains(x, 1e-9));
            const auto obj = [&](const Eigen::VectorXd& p) {
                return g.dot(p) + 0.5 * (p - c).transpose() * u * (p - c);
            };
            for (int k = 0; k < 25; ++k) {
                Eigen::VectorXd q(d);
                for (int i = 0; i < d; ++i) q[i] = rng.normal();
                q = dom.project(q * rng.uniform(0.0, 1.2));
                CHECK(obj(x) <= obj(q) + 1e-8);
            }
        }
    }
    SUBCASE("singular metric rejected") {
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(2, 2);
        CHECK_THROWS_AS(matrix_omd_step(vec({1.0, 0.0}), vec({0.0, 0.0}), u, big), NumericalError);
    }
    SUBCASE("box with non-diagonal metric unsupported") {
        const auto box = ConvexDomain::box(vec({-1.0, -1.0}), vec({1.0, 1.0}));
        Eigen::MatrixXd u(2, 2);
        u << 2.0, 0.3, 0.3, 2.0;
        CHECK_THROWS_AS(matrix_omd_step(vec({1.0, 0.0}), vec({0.0, 0.0}), u, box), CapabilityError);
    }
}

TEST_CASE("psd probe") {
    Eigen::MatrixXd good(2, 2);
    good << 2.0, 0.5, 0.5, 1.0;
    CHECK(psd_probe(good));
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 0.0, 0.0, -0.5;
    CHECK_FALSE(psd_probe(indef));
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.2, -0.2, 1.0;
    CHECK_FALSE(psd_probe(asym));
}

TEST_CASE("one-step OOMD inequality holds on random solve pairs") {
    SplitMix64 rng(97);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(6));
        Eigen::ArrayXd loss(n), optm(n), prior(n), rate(n);
        for (int i = 0; i < n; ++i) {
            loss[i] = rng.uniform(-1.0, 1.0);
            optm[i] = rng.uniform(-1.0, 1.0);
            prior[i] = rng.uniform(0.05, 1.0);
            rate[i] = std::pow(10.0, rng.uniform(-2.0, 0.0));
        }
        prior /= prior.sum();
        WeightedEntropyGeometry geom{rate};
        const Eigen::ArrayXd w_t = entropic_omd_solve(optm, prior, geom, full_mask(n));
        const Eigen::ArrayXd w_next = entropic_omd_solve(loss, prior, geom, full_mask(n));

        // Trivial comparator: u = w_t.
        auto self = omd_one_step_inequality(loss, optm, w_t, w_next, prior, w_t, geom);
        CHECK(self.holds);
        // Random comparator on the simplex.
        Eigen::ArrayXd u(n);
        for (int i = 0; i < n; ++i) u[i] = rng.uniform(1e-3, 1.0);
        u /= u.sum();
        auto c = omd_one_step_inequality(loss, optm, w_t, w_next, prior, u, geom);
        CHECK(c.holds);
        CHECK(c.slack >= -1e-9);
    }
}

TEST_CASE("one-step OOMD inequality zero loss and optimism") {
    WeightedEntropyGeometry geom(arr({1.0, 1.0}));
    const Eigen::ArrayXd prior = arr({0.5, 0.5});
    const Eigen::ArrayXd zero = arr({0.0, 0.0});
    auto c = omd_one_step_inequality(zero, zero, prior, prior, prior, arr({0.9, 0.1}), geom);
    CHECK(c.holds);
    CHECK(c.slack >= 0.0);
}
