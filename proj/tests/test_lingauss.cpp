#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdkf/errors.hpp"
#include "rdkf/lingauss.hpp"
#include "rdkf/rng.hpp"

using rdkf::GaussianInfo;
using rdkf::GaussianMoment;
using rdkf::Mat;
using rdkf::Rng;
using rdkf::Vec;

namespace {

Mat random_spd(int n, Rng& rng, double ridge = 0.5) {
    Mat b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
    return rdkf::sym(b * b.transpose() + ridge * Mat::Identity(n, n));
}

Vec random_vec(int n, Rng& rng) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

// Conditioning through the precision matrix: partition J = cov^-1, then
// x_a | x_b = y has precision J_aa and mean mu_a - J_aa^-1 J_ab (y - mu_b).
// Deliberately a different algebraic route than the library's Schur form.
GaussianMoment condition_precision_oracle(const GaussianMoment& joint,
                                          const std::vector<int>& observed, const Vec& value) {
    const int n = static_cast<int>(joint.mean.size());
    std::vector<int> kept;
    std::vector<bool> is_obs(n, false);
    for (int i : observed) is_obs[i] = true;
    for (int i = 0; i < n; ++i)
        if (!is_obs[i]) kept.push_back(i);
    Mat j = joint.cov.inverse();
    const int na = static_cast<int>(kept.size());
    const int nb = static_cast<int>(observed.size());
    Mat j_aa(na, na), j_ab(na, nb);
    Vec mu_a(na), mu_b(nb);
    for (int i = 0; i < na; ++i) {
        mu_a(i) = joint.mean(kept[i]);
        for (int k = 0; k < na; ++k) j_aa(i, k) = j(kept[i], kept[k]);
        for (int k = 0; k < nb; ++k) j_ab(i, k) = j(kept[i], observed[k]);
    }
    for (int i = 0; i < nb; ++i) mu_b(i) = joint.mean(observed[i]);
    Mat cov = j_aa.inverse();
    return GaussianMoment{mu_a - cov * j_ab * (value - mu_b), cov};
}

}  // namespace

TEST_SUITE("lingauss") {

TEST_CASE("moment/information round trip on well-conditioned inputs") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(8));
        GaussianMoment g{random_vec(n, rng), random_spd(n, rng)};
        GaussianMoment back = rdkf::to_moment(rdkf::to_info(g));
        CHECK((back.mean - g.mean).norm() < 1e-10);
        CHECK((back.cov - g.cov).norm() < 1e-10);
    }
}

TEST_CASE("kl divergence of a density with itself is zero") {
    Rng rng(102);
    GaussianInfo a{random_vec(4, rng), random_spd(4, rng)};
    CHECK(rdkf::kl_divergence(a, a) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kl divergence closed-form scalar values") {
    GaussianInfo std_normal{Vec::Zero(1), Mat::Identity(1, 1)};
    GaussianInfo half_prec{Vec::Zero(1), 0.5 * Mat::Identity(1, 1)};  // N(0, 2)
    // 0.5*(1/2 - 1 + log 2), evaluated independently to 16 digits
    CHECK(rdkf::kl_divergence(std_normal, half_prec) ==
          doctest::Approx(0.0965735902799726547).epsilon(1e-12));

    GaussianInfo shifted{Vec::Ones(1), Mat::Identity(1, 1)};  // N(1, 1)
    CHECK(rdkf::kl_divergence(std_normal, shifted) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kl divergence is nonnegative over random pairs") {
    Rng rng(103);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(6));
        GaussianInfo a{random_vec(n, rng), random_spd(n, rng)};
        GaussianInfo b{random_vec(n, rng), random_spd(n, rng)};
        CHECK(rdkf::kl_divergence(a, b) >= 0.0);
    }
}

TEST_CASE("kl divergence rejects bad input") {
    GaussianInfo a{Vec::Zero(2), Mat::Identity(2, 2)};
    GaussianInfo b{Vec::Zero(3), Mat::Identity(3, 3)};
    CHECK_THROWS_AS(rdkf::kl_divergence(a, b), std::invalid_argument);
    GaussianInfo bad{Vec::Zero(2), -Mat::Identity(2, 2)};
    CHECK_THROWS_AS(rdkf::kl_divergence(bad, a), std::invalid_argument);
}

TEST_CASE("tilt with theta zero is the identity") {
    Rng rng(104);
    GaussianMoment g{random_vec(3, rng), random_spd(3, rng)};
    Mat t = Mat::Ones(1, 3);
    GaussianMoment out = rdkf::tilt(g, t, Vec::Ones(1), 0.0);
    CHECK((out.mean - g.mean).norm() < 1e-12);
    CHECK((out.cov - g.cov).norm() < 1e-12);
}

TEST_CASE("tilt scalar and 2-d pinned examples") {
    GaussianMoment g1{Vec::Zero(1), Mat::Identity(1, 1)};
    GaussianMoment out1 = rdkf::tilt(g1, Mat::Identity(1, 1), Vec::Zero(1), 0.5);
    CHECK(out1.mean(0) == doctest::Approx(0.0));
    CHECK(out1.cov(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

    // N(0, I2) reweighted by exp((0.5/2)(z1 + 1)^2): precision algebra gives
    // precision diag(0.5, 1), information vector (0.5, 0).
    GaussianMoment g2{Vec::Zero(2), Mat::Identity(2, 2)};
    Mat t(1, 2);
    t << 1.0, 0.0;
    GaussianMoment out2 = rdkf::tilt(g2, t, Vec::Ones(1), 0.5);
    CHECK(out2.mean(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out2.mean(1) == doctest::Approx(0.0));
    CHECK(out2.cov(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out2.cov(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out2.cov(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("tilt followed by the opposite tilt restores the input") {
    Rng rng(105);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(4));
        GaussianMoment g{random_vec(n, rng), random_spd(n, rng)};
        Mat t(1, n);
        for (int i = 0; i < n; ++i) t(0, i) = rng.normal();
        Vec u = random_vec(1, rng);
        double theta = 0.2 / std::max(1.0, (t * g.cov * t.transpose())(0, 0));
        GaussianMoment fwd = rdkf::tilt(g, t, u, theta);
        GaussianMoment back = rdkf::tilt(fwd, t, u, -theta);
        CHECK((back.mean - g.mean).norm() < 1e-9);
        CHECK((back.cov - g.cov).norm() < 1e-9);
    }
}

TEST_CASE("infeasible tilt reports a numerical error") {
    GaussianMoment g{Vec::Zero(1), Mat::Identity(1, 1)};
    CHECK_THROWS_AS(rdkf::tilt(g, Mat::Identity(1, 1), Vec::Zero(1), 1.5), rdkf::numerical_error);
}

TEST_CASE("conditioning on an independent block returns the marginal") {
    Mat cov = Mat::Zero(4, 4);
    cov.topLeftCorner(2, 2) << 2.0, 0.3, 0.3, 1.0;
    cov.bottomRightCorner(2, 2) << 1.5, -0.2, -0.2, 0.7;
    Vec mean(4);
    mean << 1, 2, 3, 4;
    GaussianMoment joint{mean, cov};
    Vec y(2);
    y << -5, 5;
    GaussianMoment out = rdkf::condition(joint, {2, 3}, y);
    CHECK((out.mean - mean.head(2)).norm() < 1e-12);
    CHECK((out.cov - cov.topLeftCorner(2, 2)).norm() < 1e-12);
}

TEST_CASE("conditioning matches the textbook bivariate identity") {
    double rho = 0.6, y = 1.7;
    Mat cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    GaussianMoment joint{Vec::Zero(2), cov};
    GaussianMoment out = rdkf::condition(joint, {1}, Vec::Constant(1, y));
    CHECK(out.mean(0) == doctest::Approx(rho * y).epsilon(1e-12));
    CHECK(out.cov(0, 0) == doctest::Approx(1.0 - rho * rho).epsilon(1e-12));
}

TEST_CASE("conditioning agrees with the precision-form oracle up to dimension 12") {
    Rng rng(106);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform_int(10));  // 3..12
        GaussianMoment joint{random_vec(n, rng), random_spd(n, rng)};
        int nb = 1 + static_cast<int>(rng.uniform_int(n - 1));
        std::vector<int> all(n);
        for (int i = 0; i < n; ++i) all[i] = i;
        std::vector<int> observed;
        Rng pick = Rng::substream(107, trial);
        std::vector<int> perm = pick.permutation(n);
        for (int i = 0; i < nb; ++i) observed.push_back(perm[i]);
        Vec value = random_vec(nb, rng);
        GaussianMoment got = rdkf::condition(joint, observed, value);
        GaussianMoment want = condition_precision_oracle(joint, observed, value);
        CHECK((got.mean - want.mean).norm() < 1e-9);
        CHECK((got.cov - want.cov).norm() < 1e-9);
    }
}

TEST_CASE("conditioning rejects a singular observed block") {
    Mat cov = Mat::Zero(2, 2);
    cov(0, 0) = 1.0;  // second coordinate is degenerate
    GaussianMoment joint{Vec::Zero(2), cov};
    CHECK_THROWS_AS(rdkf::condition(joint, {1}, Vec::Zero(1)), std::invalid_argument);
}

TEST_CASE("spd helpers: square root, log det, order check, validation") {
    Rng rng(108);
    Mat m = random_spd(5, rng);
    Mat r = rdkf::spd_sqrt(m);
    CHECK((r * r - m).norm() < 1e-10);
    CHECK(rdkf::logdet_spd(m) == doctest::Approx(std::log(m.determinant())).epsilon(1e-10));
    CHECK(rdkf::psd_leq(m, m));
    CHECK(rdkf::psd_leq(m, 2.0 * m));
    CHECK_FALSE(rdkf::psd_leq(2.0 * m, m));

    Mat asym = m;
    asym(0, 1) += 1.0;
    CHECK_THROWS_AS(rdkf::check_spd(asym, "test"), std::invalid_argument);
    CHECK_THROWS_AS(rdkf::check_spd(-m, "test"), std::invalid_argument);
}

}  // TEST_SUITE
