#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tariffgame/montecarlo.hpp"
#include "tariffgame/nash.hpp"

using namespace tariffgame;
using Catch::Approx;

namespace {

// reference values computed from the closed forms at high precision
constexpr double kExpE = 0.80965608598524392;
constexpr double kExpTheta = 0.54241389709383788;
constexpr double kExpThetaStar = 0.73202750823083497;
constexpr double kExpETheta = 1.13284337782093;
constexpr double kExpEThetaStar = -0.49157599308864;

// own-tariff gain with the rate re-solved, for curvature oracles
double own_gain(const MarketModel& m, Side side, double own, double opp,
                const SolverConfig& cfg) {
    const TariffPair t = side == Side::Domestic ? TariffPair{own, opp} : TariffPair{opp, own};
    const double e = solve_rate(m, t, cfg).rate_e;
    return side == Side::Domestic ? gain_domestic(m, e, t) : gain_foreign(m, e, t);
}

double own_gain_curvature(const MarketModel& m, Side side, double own, double opp,
                          const SolverConfig& cfg, double h = 1e-4) {
    const double gp = own_gain(m, side, own + h, opp, cfg);
    const double g0 = own_gain(m, side, own, opp, cfg);
    const double gm = own_gain(m, side, own - h, opp, cfg);
    return (gp - 2 * g0 + gm) / (h * h);
}

}  // namespace

TEST_CASE("FOC residuals vanish at the reference solutions") {
    {
        const auto m = MarketModel::rational_square_symmetric();
        const auto r = foc_residuals(m, 1.0, {1.0 / 3.0, 1.0 / 3.0});
        for (double ri : r) CHECK(std::abs(ri) <= 1e-12);
    }
    {
        const auto m = MarketModel::clipped_linear_symmetric(0.5);
        const auto r = foc_residuals(m, 1.0, {2.0 / 3.0, 2.0 / 3.0});
        for (double ri : r) CHECK(std::abs(ri) <= 1e-12);
    }
    {
        const auto m = MarketModel::exponential_asymmetric(0.01, 2.0, 2.5);
        const auto rounded = foc_residuals(m, 0.81, {0.54, 0.73});
        for (double ri : rounded) CHECK(std::abs(ri) <= 5e-3);
        const auto exact = foc_residuals(m, kExpE, {kExpTheta, kExpThetaStar});
        for (double ri : exact) CHECK(std::abs(ri) <= 1e-8);
    }
}

TEST_CASE("solve_nash reproduces the three reference equilibria") {
    const SolverConfig cfg;
    {
        const auto res = solve_nash(MarketModel::rational_square_symmetric(), cfg);
        CHECK(res.best.e_hat == Approx(1.0).margin(1e-8));
        CHECK(res.best.theta_hat == Approx(1.0 / 3.0).margin(1e-8));
        CHECK(res.best.theta_star_hat == Approx(1.0 / 3.0).margin(1e-8));
        CHECK(nash_accepted(res.best, cfg));
    }
    {
        const auto res = solve_nash(MarketModel::clipped_linear_symmetric(0.5), cfg);
        CHECK(res.best.e_hat == Approx(1.0).margin(1e-8));
        CHECK(res.best.theta_hat == Approx(2.0 / 3.0).margin(1e-8));
        CHECK(res.best.theta_star_hat == Approx(2.0 / 3.0).margin(1e-8));
    }
    {
        const auto res = solve_nash(MarketModel::exponential_asymmetric(0.01, 2.0, 2.5), cfg);
        CHECK(res.best.e_hat == Approx(0.81).margin(5e-3));
        CHECK(res.best.theta_hat == Approx(0.54).margin(5e-3));
        CHECK(res.best.theta_star_hat == Approx(0.73).margin(5e-3));
        CHECK(res.best.e_hat == Approx(kExpE).margin(1e-9));
        CHECK(res.best.theta_hat == Approx(kExpTheta).margin(1e-9));
        CHECK(res.best.theta_star_hat == Approx(kExpThetaStar).margin(1e-9));
    }
}

TEST_CASE("stored residuals are reproduced exactly by re-evaluation") {
    const auto m = MarketModel::exponential_asymmetric(0.01, 2.0, 2.5);
    const auto res = solve_nash(m);
    const auto again = foc_residuals(m, res.best.e_hat,
                                     {res.best.theta_hat, res.best.theta_star_hat});
    CHECK(again[0] == res.best.foc_residuals[0]);
    CHECK(again[1] == res.best.foc_residuals[1]);
    CHECK(again[2] == res.best.foc_residuals[2]);
}

TEST_CASE("second-order conditions hold at all three reference solutions") {
    {
        const auto m = MarketModel::rational_square_symmetric();
        const auto tr = solve_nash(m).best;
        CHECK(check_second_order(m, tr) == std::pair<bool, bool>{true, true});
    }
    {
        const auto m = MarketModel::clipped_linear_symmetric(0.5);
        const auto tr = solve_symmetric(m);
        CHECK(check_second_order(m, tr) == std::pair<bool, bool>{true, true});
    }
    {
        const auto m = MarketModel::exponential_asymmetric(0.01, 2.0, 2.5);
        const auto tr = solve_nash(m).best;
        CHECK(check_second_order(m, tr) == std::pair<bool, bool>{true, true});
    }
}

TEST_CASE("SOC expressions equal the direct curvature of the gains") {
    // d2G/dth2 = (e_th / th) ine1 and d2G*/dths2 = (e_ths / (th* e)) ine2 / th^2,
    // with e re-solved after each tariff move; finite differences confirm both
    const SolverConfig cfg;
    struct Case {
        MarketModel model;
        EquilibriumTriple tr;
    };
    for (const auto& m : {MarketModel::rational_square_symmetric(),
                          MarketModel::clipped_linear_symmetric(0.5),
                          MarketModel::exponential_asymmetric(0.01, 2.0, 2.5)}) {
        const auto tr = m.symmetric() ? solve_symmetric(m, cfg) : solve_nash(m, cfg).best;
        const TariffPair t{tr.theta_hat, tr.theta_star_hat};
        const auto rep = second_order_report(m, tr.e_hat, t, tr.sensitivities);

        const double pred_dom = tr.sensitivities.de_dtheta / t.theta * rep.ine1;
        const double fd_dom = own_gain_curvature(m, Side::Domestic, t.theta, t.theta_star, cfg);
        CHECK(fd_dom == Approx(pred_dom).epsilon(2e-3).margin(1e-6));

        const double pred_fgn = tr.sensitivities.de_dtheta_star / (t.theta_star * tr.e_hat) *
                                rep.ine2 / (t.theta * t.theta);
        const double fd_fgn = own_gain_curvature(m, Side::Foreign, t.theta_star, t.theta, cfg);
        CHECK(fd_fgn == Approx(pred_fgn).epsilon(2e-3).margin(1e-6));

        CHECK(fd_dom < 0.0);  // both players sit at genuine maxima
        CHECK(fd_fgn < 0.0);
    }
}

TEST_CASE("best response recovers the equilibrium tariffs") {
    const SolverConfig cfg;
    const auto rs = MarketModel::rational_square_symmetric();
    CHECK(best_response(rs, Side::Domestic, 1.0 / 3.0, cfg) == Approx(1.0 / 3.0).margin(1e-4));

    const auto ex = MarketModel::exponential_asymmetric(0.01, 2.0, 2.5);
    CHECK(best_response(ex, Side::Foreign, 0.54, cfg) == Approx(0.73).margin(5e-3));
    CHECK(best_response(ex, Side::Domestic, 0.73, cfg) == Approx(0.54).margin(5e-3));

    CHECK_THROWS_AS(best_response(rs, Side::Domestic, 2.0, cfg), DomainError);
}

TEST_CASE("best-response iteration reaches the Nash points from (0.9, 0.9)") {
    const SolverConfig cfg;
    {
        const auto it = best_response_iteration(MarketModel::rational_square_symmetric(),
                                                {0.9, 0.9}, cfg);
        CHECK(it.triple.theta_hat == Approx(1.0 / 3.0).margin(1e-3));
        CHECK(it.triple.theta_star_hat == Approx(1.0 / 3.0).margin(1e-3));
        CHECK(it.triple.e_hat == Approx(1.0).margin(1e-3));
    }
    {
        const auto it = best_response_iteration(MarketModel::exponential_asymmetric(0.01, 2.0, 2.5),
                                                {0.9, 0.9}, cfg);
        CHECK(it.triple.theta_hat == Approx(0.54).margin(5e-3));
        CHECK(it.triple.theta_star_hat == Approx(0.73).margin(5e-3));
        CHECK(it.triple.e_hat == Approx(0.81).margin(5e-3));
        CHECK(it.rounds < 50);
    }
}

TEST_CASE("starting at the Nash pair is a fixed point of the iteration") {
    const SolverConfig cfg;
    const auto m = MarketModel::rational_square_symmetric();
    const auto it = best_response_iteration(m, {1.0 / 3.0, 1.0 / 3.0}, cfg);
    CHECK(it.rounds == 1);
    CHECK(it.triple.theta_hat == Approx(1.0 / 3.0).margin(1e-5));
    CHECK(it.triple.theta_star_hat == Approx(1.0 / 3.0).margin(1e-5));
}

TEST_CASE("gain at the Nash tariff dominates all nearby own-tariff deviations") {
    const SolverConfig cfg;
    for (const auto& m : {MarketModel::rational_square_symmetric(),
                          MarketModel::clipped_linear_symmetric(0.5),
                          MarketModel::exponential_asymmetric(0.01, 2.0, 2.5)}) {
        const auto tr = m.symmetric() ? solve_symmetric(m, cfg) : solve_nash(m, cfg).best;
        for (Side side : {Side::Domestic, Side::Foreign}) {
            const double own = side == Side::Domestic ? tr.theta_hat : tr.theta_star_hat;
            const double opp = side == Side::Domestic ? tr.theta_star_hat : tr.theta_hat;
            const double g0 = own_gain(m, side, own, opp, cfg);
            for (int k = 1; k <= 20; ++k) {
                for (double sgn : {-1.0, 1.0}) {
                    const double cand = std::clamp(own + sgn * 0.01 * k, 1.0 / m.box_bound(), 1.0);
                    if (cand == own) continue;
                    CHECK(own_gain(m, side, cand, opp, cfg) <= g0 + 1e-10);
                }
            }
        }
    }
}

TEST_CASE("oracle agreement: best response at the solved triple returns the own tariff") {
    const SolverConfig cfg;
    for (const auto& m : {MarketModel::rational_square_symmetric(),
                          MarketModel::clipped_linear_symmetric(0.5),
                          MarketModel::exponential_asymmetric(0.01, 2.0, 2.5)}) {
        const auto tr = m.symmetric() ? solve_symmetric(m, cfg) : solve_nash(m, cfg).best;
        CHECK(best_response(m, Side::Domestic, tr.theta_star_hat, cfg) ==
              Approx(tr.theta_hat).margin(1e-3));
        CHECK(best_response(m, Side::Foreign, tr.theta_hat, cfg) ==
              Approx(tr.theta_star_hat).margin(1e-3));
    }
}

TEST_CASE("solve_symmetric matches the closed forms and the generic solver") {
    const SolverConfig cfg;
    {
        const auto tr = solve_symmetric(MarketModel::rational_square_symmetric(), cfg);
        CHECK(tr.theta_hat == Approx(1.0 / 3.0).margin(1e-10));
        CHECK(tr.e_hat == 1.0);
    }
    for (double alpha : {0.25, 0.5, 0.8}) {
        const auto tr = solve_symmetric(MarketModel::clipped_linear_symmetric(alpha), cfg);
        CHECK(tr.theta_hat == Approx(2 * alpha / (1 + alpha)).margin(1e-10));
    }
    {
        // theta D(1/theta) = (theta-1) D'(1/theta) for D = e^{-dx} collapses to
        // theta = delta / (1 + delta)
        const auto tr = solve_symmetric(MarketModel::exponential_symmetric(2.5), cfg);
        CHECK(tr.theta_hat == Approx(2.5 / 3.5).margin(1e-10));
    }
    for (const auto& m : {MarketModel::rational_square_symmetric(),
                          MarketModel::clipped_linear_symmetric(0.5)}) {
        const auto fast = solve_symmetric(m, cfg);
        const auto generic = solve_nash(m, cfg).best;
        CHECK(fast.theta_hat == Approx(generic.theta_hat).margin(1e-6));
        CHECK(fast.e_hat == Approx(generic.e_hat).margin(1e-6));
    }
    CHECK_THROWS_AS(solve_symmetric(MarketModel::exponential_asymmetric(0.01, 2, 2.5), cfg),
                    DomainError);
}

TEST_CASE("symmetric models equalize tariffs and give a unit rate") {
    const SolverConfig cfg;
    for (const auto& m : {MarketModel::rational_square_symmetric(),
                          MarketModel::clipped_linear_symmetric(0.25),
                          MarketModel::clipped_linear_symmetric(0.5),
                          MarketModel::exponential_symmetric(2.5)}) {
        const auto tr = solve_nash(m, cfg).best;
        CHECK(std::abs(tr.theta_hat - tr.theta_star_hat) <= 1e-6);
        CHECK(std::abs(tr.e_hat - 1.0) <= 1e-6);
    }
}

TEST_CASE("exponential-family closed form") {
    const SolverConfig cfg;
    const auto tr = solve_exponential_family(0.01, 2.0, 2.5, cfg);
    CHECK(tr.e_hat == Approx(0.81).margin(5e-3));
    CHECK(tr.theta_hat == Approx(0.54).margin(5e-3));
    CHECK(tr.theta_star_hat == Approx(0.73).margin(5e-3));
    CHECK(tr.e_hat == Approx(kExpE).margin(1e-9));
    CHECK(tr.theta_hat == Approx(kExpTheta).margin(1e-9));
    CHECK(tr.theta_star_hat == Approx(kExpThetaStar).margin(1e-9));
    CHECK(tr.sensitivities.de_dtheta == Approx(1.13).margin(1e-2));
    CHECK(tr.sensitivities.de_dtheta_star == Approx(-0.49).margin(1e-2));
    CHECK(tr.sensitivities.de_dtheta == Approx(kExpETheta).margin(1e-8));
    CHECK(tr.sensitivities.de_dtheta_star == Approx(kExpEThetaStar).margin(1e-8));
    CHECK(tr.soc_pass.first);
    CHECK(tr.soc_pass.second);

    const auto generic = solve_nash(MarketModel::exponential_asymmetric(0.01, 2.0, 2.5), cfg).best;
    CHECK(std::abs(generic.e_hat - tr.e_hat) <= 1e-6);
    CHECK(std::abs(generic.theta_hat - tr.theta_hat) <= 1e-6);
    CHECK(std::abs(generic.theta_star_hat - tr.theta_star_hat) <= 1e-6);

    CHECK_THROWS_AS(solve_exponential_family(1.5, 2.0, 2.5, cfg), DomainError);
    CHECK_THROWS_AS(solve_exponential_family(0.01, -2.0, 2.5, cfg), DomainError);
}

TEST_CASE("Nash solving on a smoothed empirical model stays near the target") {
    // a matched sample's smoothed demands approximate the rational-square
    // model, so the smoothed-model Nash point must sit near (1, 1/3, 1/3)
    const auto sample = matched_sample(MarketModel::rational_square_symmetric(), 4000, 31);
    const auto emp = empirical_demands(sample);
    const auto res = solve_nash(emp);
    CHECK(detail::residual_norm(res.best.foc_residuals) <= 1e-8);
    CHECK(res.best.e_hat == Approx(1.0).margin(0.08));
    CHECK(res.best.theta_hat == Approx(1.0 / 3.0).margin(0.08));
    CHECK(res.best.theta_star_hat == Approx(1.0 / 3.0).margin(0.08));
}
