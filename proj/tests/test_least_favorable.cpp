#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdkf/errors.hpp"
#include "rdkf/least_favorable.hpp"
#include "test_helpers.hpp"

using rdkf::LfKernel;
using rdkf::Mat;
using rdkf::Rng;
using rdkf::Vec;

namespace {

rdkf::StateSpaceModel scalar_toy() {
    rdkf::StateSpaceModel model;
    model.A = Mat::Identity(1, 1);
    model.B = Mat::Identity(1, 1);
    model.Q = Mat::Identity(1, 1);
    model.channels.push_back({Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1)});
    model.x0_mean = Vec::Zero(1);
    model.V0 = Mat::Identity(1, 1);
    return model;
}

struct NominalStep {
    Mat K_yy, G, P;
};

NominalStep nominal_step(const rdkf::StateSpaceModel& model, const Mat& v) {
    Mat c = model.stacked_c();
    NominalStep s;
    s.K_yy = c * v * c.transpose() + model.block_r();
    s.G = model.A * v * c.transpose() * s.K_yy.inverse();
    Mat v_filt = v - v * c.transpose() * s.K_yy.inverse() * c * v;
    s.P = model.A * v_filt * model.A.transpose() + model.Q;
    return s;
}

}  // namespace

TEST_SUITE("least_favorable") {

TEST_CASE("zero risk gives back the nominal kernel") {
    Rng rng(21);
    rdkf::StateSpaceModel model = test::random_model(rng, 3, {2, 1});
    Mat v = test::random_spd(rng, 3);
    LfKernel k = rdkf::lf_kernel(model, v, 0.0);

    Mat s(6, 3);
    s.topRows(3) = model.A;
    s.bottomRows(3) = model.stacked_c();
    CHECK((k.M_x - s).norm() == 0.0);
    CHECK(k.M_hat.norm() == 0.0);
    CHECK((k.J_tilde.topLeftCorner(3, 3) - model.Q.inverse()).norm() < 1e-10);
    CHECK((k.J_tilde.bottomRightCorner(3, 3) - model.block_r().inverse()).norm() < 1e-10);
    CHECK(k.J_tilde.topRightCorner(3, 3).norm() == 0.0);
    CHECK((k.cov_chol * k.cov_chol.transpose() - k.cov).norm() < 1e-12);
    CHECK(rdkf::expected_kl(k, model, test::random_vec(rng, 3), v) == 0.0);
}

TEST_CASE("kernel preserves the nominal predictive geometry") {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(3));
        rdkf::StateSpaceModel model = test::random_model(rng, n, {2, 1});
        Mat v = test::random_spd(rng, n);
        NominalStep nom = nominal_step(model, v);
        double b = (trial % 2 == 0) ? 0.05 : 0.01;
        double theta = rdkf::find_theta(nom.P.inverse(), b);
        LfKernel k = rdkf::lf_kernel(model, v, theta);

        const int p = model.output_dim();
        Mat c = model.stacked_c();
        Mat s(n + p, n);
        s.topRows(n) = model.A;
        s.bottomRows(p) = c;

        // Means of the one-step law are untouched.
        CHECK((k.M_x + k.M_hat - s).norm() < 1e-9);
        CHECK((k.G - nom.G).norm() < 1e-9);

        Mat ind = k.cov + k.M_x * v * k.M_x.transpose();
        CHECK((ind.bottomRightCorner(p, p) - nom.K_yy).norm() < 1e-9);
        CHECK((ind.topRightCorner(n, p) - model.A * v * c.transpose()).norm() < 1e-9);

        Mat target = (nom.P.inverse() - theta * Mat::Identity(n, n)).inverse();
        Mat cond = ind.topLeftCorner(n, n) -
                   ind.topRightCorner(n, p) * ind.bottomRightCorner(p, p).inverse() *
                       ind.topRightCorner(n, p).transpose();
        CHECK((cond - target).norm() < 1e-9);

        // The next prediction error T z is orthogonal to y and carries the
        // shifted covariance, so the filter stays exact under this kernel.
        Mat t_map(n, n + p);
        t_map.leftCols(n) = Mat::Identity(n, n);
        t_map.rightCols(p) = -k.G;
        CHECK((t_map * ind * t_map.transpose() - target).norm() < 1e-9);
        Mat e_y = Mat::Zero(n + p, p);
        e_y.bottomRows(p) = Mat::Identity(p, p);
        CHECK((t_map * ind * e_y).norm() < 1e-9);
    }
}

TEST_CASE("ambiguity budget is spent exactly") {
    Rng rng(23);
    for (double b : {0.01, 0.05, 0.2}) {
        rdkf::StateSpaceModel model = test::random_model(rng, 3, {2});
        Mat v = test::random_spd(rng, 3);
        double theta = rdkf::find_theta(nominal_step(model, v).P.inverse(), b);
        LfKernel k = rdkf::lf_kernel(model, v, theta);
        CHECK(rdkf::expected_kl(k, model, test::random_vec(rng, 3), v) ==
              doctest::Approx(b).epsilon(1e-8));
    }
}

TEST_CASE("infeasible tilt is rejected") {
    rdkf::StateSpaceModel model = scalar_toy();
    // Nominal one-step variance is 1.5, so feasibility ends at 2/3.
    CHECK_THROWS_AS(rdkf::lf_kernel(model, Mat::Identity(1, 1), 0.7), rdkf::numerical_error);
    CHECK_THROWS_AS(rdkf::lf_kernel(model, Mat::Identity(1, 1), 2.0 / 3.0), rdkf::numerical_error);
    CHECK_THROWS_AS(rdkf::lf_kernel(model, Mat::Identity(1, 1), -0.1), std::invalid_argument);
    CHECK_NOTHROW(rdkf::lf_kernel(model, Mat::Identity(1, 1), 0.5));
}

TEST_CASE("sampled kernel matches its closed-form conditional variance") {
    rdkf::StateSpaceModel model = scalar_toy();
    double theta = rdkf::find_theta(Mat::Constant(1, 1, 2.0 / 3.0), 0.05);
    LfKernel k = rdkf::lf_kernel(model, Mat::Identity(1, 1), theta);

    Rng rng(24);
    const int draws = 1000000;
    Vec x_hat = Vec::Constant(1, 0.3);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < draws; ++i) {
        Vec x = x_hat + Vec::Constant(1, rng.normal());  // x ~ N(x_hat, V=1)
        Vec z = rdkf::sample_z(k, x, x_hat, rng);
        sx += z(0);
        sy += z(1);
        sxx += z(0) * z(0);
        syy += z(1) * z(1);
        sxy += z(0) * z(1);
    }
    double mx = sx / draws, my = sy / draws;
    double vxx = sxx / draws - mx * mx;
    double vyy = syy / draws - my * my;
    double vxy = sxy / draws - mx * my;

    CHECK(std::abs(vyy - 2.0) < 0.012);  // nominal y-marginal, ~4 sigma
    double cond = vxx - vxy * vxy / vyy;
    double target = 1.0 / (2.0 / 3.0 - theta);
    CHECK(std::abs(cond - target) / target < 0.008);
    CHECK(std::abs(my - 0.3) < 0.006);
}

TEST_CASE("zero-tolerance sampler reproduces white noise") {
    rdkf::StateSpaceModel model = scalar_toy();
    Rng rng(25);
    std::vector<rdkf::TrajectorySample> runs;
    auto schedule = rdkf::kernel_schedule(model, 0.0, 100);
    for (int r = 0; r < 100; ++r) runs.push_back(rdkf::sample_trajectory(model, schedule, rng));

    auto bounds = rdkf::noise_variance_bounds(runs, 10);
    CHECK(bounds.samples >= 100);
    CHECK(bounds.rho_min > 0.93);
    CHECK(bounds.rho_max < 1.07);

    double cc = 0;
    int count = 0;
    for (const auto& run : runs)
        for (std::size_t t = 10; t + 1 < run.w.size(); ++t) {
            cc += run.w[t](0) * run.v[t + 1](0);
            ++count;
        }
    cc /= count;
    CHECK(std::abs(cc) < 4.0 / std::sqrt(static_cast<double>(count)));
    for (const auto& run : runs)
        for (double th : run.thetas) CHECK(th == 0.0);
}

TEST_CASE("worst-case noises are serially correlated") {
    rdkf::StateSpaceModel model = scalar_toy();
    Rng rng(26);
    auto schedule = rdkf::kernel_schedule(model, 0.05, 200);
    double cc = 0, vw = 0, vv = 0;
    int count = 0;
    for (int r = 0; r < 200; ++r) {
        auto run = rdkf::sample_trajectory(model, schedule, rng);
        for (std::size_t t = 20; t + 1 < run.w.size(); ++t) {
            cc += run.w[t](0) * run.v[t + 1](0);
            vw += run.w[t](0) * run.w[t](0);
            vv += run.v[t + 1](0) * run.v[t + 1](0);
            ++count;
        }
    }
    cc /= count;
    vw /= count;
    vv /= count;
    double se = std::sqrt((vw * vv + cc * cc) / count);
    CHECK(std::abs(cc) > 3.0 * se);
}

TEST_CASE("filter error covariance settles on the stationary value") {
    rdkf::StateSpaceModel model = scalar_toy();
    const double b = 0.05;
    auto steady = rdkf::robust_steady_state(model, b);

    Rng rng(27);
    auto schedule = rdkf::kernel_schedule(model, b, 500);
    double acc = 0;
    int count = 0;
    for (int r = 0; r < 200; ++r) {
        auto run = rdkf::sample_trajectory(model, schedule, rng);
        auto steps = rdkf::centralized_robust_filter(model, b, run.measurements);
        for (int t = 100; t < 500; ++t) {
            double e = run.states[t](0) - steps[t].x_pred(0);
            acc += e * e;
            ++count;
        }
    }
    double emp = acc / count;
    CHECK(std::abs(emp - steady.V_inf(0, 0)) / steady.V_inf(0, 0) < 0.05);
}

TEST_CASE("schedules and the filter agree on the risk sequence") {
    Rng rng(28);
    rdkf::StateSpaceModel model = test::random_model(rng, 3, {2});
    auto schedule = rdkf::kernel_schedule(model, 0.05, 30);
    auto run = rdkf::sample_trajectory(model, schedule, rng);
    auto steps = rdkf::centralized_robust_filter(model, 0.05, run.measurements);
    for (int t = 0; t < 30; ++t) {
        CHECK(std::abs(schedule[t].theta - steps[t].theta) < 1e-8);
        CHECK(run.thetas[t] == schedule[t].theta);
    }
}

TEST_CASE("steady state at zero tolerance solves the Riccati equation") {
    Rng rng(29);
    rdkf::StateSpaceModel model = test::random_model(rng, 3, {1, 2});
    auto steady = rdkf::robust_steady_state(model, 0.0);
    CHECK(steady.theta_inf == 0.0);
    CHECK((steady.V_inf - steady.P_inf).norm() < 1e-11);
    CHECK((steady.K_tilde - steady.K).norm() < 1e-11);

    Mat c = model.stacked_c();
    Mat v = steady.V_inf;
    Mat k_yy = c * v * c.transpose() + model.block_r();
    Mat dare = model.A *
                   (v - v * c.transpose() * k_yy.inverse() * c * v) *
                   model.A.transpose() +
               model.Q;
    CHECK((dare - v).norm() < 1e-10);
}

TEST_CASE("robust steady state is a verified fixed point") {
    rdkf::StateSpaceModel toy = scalar_toy();
    auto steady = rdkf::robust_steady_state(toy, 0.05);
    NominalStep nom = nominal_step(toy, steady.V_inf);
    double theta = rdkf::find_theta(nom.P.inverse(), 0.05);
    Mat resub = (nom.P.inverse() - theta * Mat::Identity(1, 1)).inverse();
    CHECK((resub - steady.V_inf).norm() < 1e-10);
    CHECK(steady.theta_inf == doctest::Approx(theta));
    CHECK(steady.V_inf(0, 0) > steady.P_inf(0, 0));

    Rng rng(30);
    rdkf::StateSpaceModel model = test::random_model(rng, 3, {2, 1});
    auto st = rdkf::robust_steady_state(model, 0.02);
    CHECK(rdkf::psd_leq(st.P_inf, st.V_inf));
    CHECK((st.V_inf - (st.P_inf.inverse() - st.theta_inf * Mat::Identity(3, 3)).inverse()).norm() <
          1e-10);
    CHECK((st.K_tilde - st.K).bottomRightCorner(3, 3).norm() == 0.0);
    CHECK((st.K_tilde - st.K).topRightCorner(3, 3).norm() == 0.0);
    CHECK(rdkf::min_eig_sym((st.K_tilde - st.K).topLeftCorner(3, 3)) > -1e-12);
    CHECK(st.iterations > 0);
}

TEST_CASE("stationary divergences split the budget across channels") {
    Rng rng(31);
    rdkf::StateSpaceModel model = test::random_model(rng, 3, {1, 1, 1});
    const double b = 0.05;
    auto steady = rdkf::robust_steady_state(model, b);

    auto locals = rdkf::local_tolerances(steady, model);
    double full = rdkf::full_divergence(steady, model);
    REQUIRE(locals.size() == 3);
    for (double bi : locals) {
        CHECK(bi > 0.0);
        CHECK(bi <= full + 1e-12);
    }
    // The undeleted divergence is the budget itself.
    CHECK(full == doctest::Approx(b).epsilon(1e-9));

    double kept0 = rdkf::subset_tolerance(steady, model, {0});
    double kept01 = rdkf::subset_tolerance(steady, model, {0, 1});
    double kept012 = rdkf::subset_tolerance(steady, model, {0, 1, 2});
    CHECK(kept0 <= kept01 + 1e-12);
    CHECK(kept01 <= kept012 + 1e-12);
    CHECK(kept012 == doctest::Approx(full));
    CHECK(rdkf::state_marginal_tolerance(steady, model) <= full + 1e-12);
    CHECK(rdkf::state_marginal_tolerance(steady, model) >= 0.0);

    auto zero = rdkf::robust_steady_state(model, 0.0);
    for (double bi : rdkf::local_tolerances(zero, model)) CHECK(bi <= 1e-12);

    rdkf::StateSpaceModel single = test::random_model(rng, 2, {2});
    auto ssteady = rdkf::robust_steady_state(single, b);
    CHECK(rdkf::local_tolerances(ssteady, single)[0] ==
          doctest::Approx(rdkf::full_divergence(ssteady, single)));
}

TEST_CASE("noise bound estimates are sane and tighten with more data") {
    rdkf::StateSpaceModel model = scalar_toy();
    auto schedule = rdkf::kernel_schedule(model, 0.05, 60);

    auto collect = [&](int runs, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<rdkf::TrajectorySample> out;
        for (int r = 0; r < runs; ++r) out.push_back(rdkf::sample_trajectory(model, schedule, rng));
        return out;
    };

    // Replicate each sample size a few times; the replicate-to-replicate
    // scatter of the eigenvalue estimates shrinks as the count grows.
    auto scatter = [&](int runs, std::uint64_t seed0) {
        std::vector<rdkf::NoiseVarianceBounds> reps;
        for (std::uint64_t k = 0; k < 6; ++k)
            reps.push_back(rdkf::noise_variance_bounds(collect(runs, seed0 + k), 10));
        double m_max = 0, m_min = 0;
        for (const auto& r : reps) {
            m_max += r.rho_max / 6;
            m_min += r.rho_min / 6;
        }
        double dev = 0;
        for (const auto& r : reps)
            dev += std::abs(r.rho_max - m_max) + std::abs(r.rho_min - m_min);
        return dev / 6;
    };
    double dis_small = scatter(40, 32);
    double dis_large = scatter(400, 132);
    CHECK(dis_large < dis_small);

    auto one = rdkf::noise_variance_bounds(collect(400, 1), 10);
    CHECK(one.rho_max > 1.0);  // the worst-case noise is inflated
    CHECK(one.samples == 400 * 49);

    CHECK_THROWS_AS(rdkf::noise_variance_bounds(collect(1, 34), 10), std::invalid_argument);
}

}  // TEST_SUITE
