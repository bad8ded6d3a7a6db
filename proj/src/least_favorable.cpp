#include "rdkf/least_favorable.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "rdkf/errors.hpp"

namespace rdkf {

namespace {

Mat stack_noise_cov(const StateSpaceModel& model) {
    const int n = model.state_dim();
    const int p = model.output_dim();
    Mat sigma = Mat::Zero(n + p, n + p);
    sigma.topLeftCorner(n, n) = model.Q;
    sigma.bottomRightCorner(p, p) = model.block_r();
    return sigma;
}

Mat stack_maps(const StateSpaceModel& model) {
    const int n = model.state_dim();
    const int p = model.output_dim();
    Mat s(n + p, n);
    s.topRows(n) = model.A;
    s.bottomRows(p) = model.stacked_c();
    return s;
}

struct OneStep {
    Mat K_yy;
    Mat G;
    Mat P;  // nominal covariance of the next prediction error
};

OneStep one_step(const StateSpaceModel& model, const Mat& V) {
    const Mat c = model.stacked_c();
    OneStep out;
    out.K_yy = sym(c * V * c.transpose() + model.block_r());
    Eigen::LLT<Mat> llt(out.K_yy);
    if (llt.info() != Eigen::Success)
        throw numerical_error("innovation covariance lost positive definiteness");
    out.G = (llt.solve(c * V * model.A.transpose())).transpose();
    Mat v_filt = sym(V - V * c.transpose() * llt.solve(c * V));
    out.P = sym(model.A * v_filt * model.A.transpose() + model.Q);
    return out;
}

}  // namespace

LfKernel lf_kernel(const StateSpaceModel& model, const Mat& V, double theta) {
    const int n = model.state_dim();
    const int p = model.output_dim();
    if (V.rows() != n || V.cols() != n)
        throw std::invalid_argument("prediction covariance has the wrong shape");
    check_spd(V, "prediction covariance");
    if (theta < 0.0) throw std::invalid_argument("risk sensitivity must be nonnegative");

    LfKernel kernel;
    kernel.theta = theta;

    if (theta == 0.0) {
        kernel.G = one_step(model, V).G;
        kernel.M_x = stack_maps(model);
        kernel.M_hat = Mat::Zero(n + p, n);
        kernel.cov = stack_noise_cov(model);
        kernel.J_tilde = Mat::Zero(n + p, n + p);
        kernel.J_tilde.topLeftCorner(n, n) = spd_inverse(model.Q);
        kernel.J_tilde.bottomRightCorner(p, p) = spd_inverse(model.block_r());
        kernel.cov_chol = Mat::Zero(n + p, n + p);
        kernel.cov_chol.topLeftCorner(n, n) = spd_chol(model.Q);
        kernel.cov_chol.bottomRightCorner(p, p) = spd_chol(model.block_r());
        return kernel;
    }

    OneStep step = one_step(model, V);
    Mat slack = Mat::Identity(n, n) - theta * step.P;
    Eigen::LLT<Mat> slack_llt(sym(slack));
    if (min_eig_sym(sym(slack)) <= 0.0 || slack_llt.info() != Eigen::Success)
        throw numerical_error("worst-case tilt is infeasible: the tolerance is too large for this model");

    const Mat s = stack_maps(model);
    const Mat sigma = stack_noise_cov(model);
    Mat t_map(n, n + p);
    t_map.leftCols(n) = Mat::Identity(n, n);
    t_map.rightCols(p) = -step.G;
    const Mat f = model.A - step.G * model.stacked_c();

    // Tilting the joint law of (x - x_hat, z) by a quadratic in the next
    // prediction error T z - F x_hat inflates every block through
    // (I - theta P)^-1; the input marginal is then mapped back onto N(0, V).
    Mat sigma_zz = sym(s * V * s.transpose() + sigma);
    Mat zt = sigma_zz * t_map.transpose();          // (n+p) x n
    Mat x_fv = slack_llt.solve(f * V);              // (I - theta P)^-1 F V
    Mat v_breve = sym(V + theta * V * f.transpose() * x_fv);
    Mat zeps = s * V + theta * zt * x_fv;
    Mat sigma_zz_tilt = sym(sigma_zz + theta * zt * slack_llt.solve(zt.transpose()));

    Mat root_v = spd_sqrt(V);
    Mat root_breve = spd_sqrt(v_breve);
    Mat lambda = Eigen::LLT<Mat>(root_v)
                     .solve(Eigen::LLT<Mat>(root_breve).solve(zeps.transpose()))
                     .transpose();

    kernel.G = step.G;
    kernel.M_x = lambda;
    kernel.M_hat = s - lambda;
    kernel.cov = sym(sigma_zz_tilt - lambda * V * lambda.transpose());
    kernel.J_tilde = spd_inverse(kernel.cov);
    kernel.cov_chol = spd_chol(kernel.cov);
    return kernel;
}

Vec sample_z(const LfKernel& kernel, const Vec& x, const Vec& x_hat, Rng& rng) {
    const int d = static_cast<int>(kernel.cov_chol.rows());
    Vec xi(d);
    for (int i = 0; i < d; ++i) xi(i) = rng.normal();
    return kernel.M_x * x + kernel.M_hat * x_hat + kernel.cov_chol * xi;
}

double expected_kl(const LfKernel& kernel, const StateSpaceModel& model, const Vec& x_hat,
                   const Mat& V) {
    const Mat s = stack_maps(model);
    GaussianMoment nominal{s * x_hat, sym(s * V * s.transpose() + stack_noise_cov(model))};
    GaussianMoment induced{kernel.M_x * x_hat + kernel.M_hat * x_hat,
                           sym(kernel.cov + kernel.M_x * V * kernel.M_x.transpose())};
    return kl_divergence(to_info(induced), to_info(nominal));
}

std::vector<LfKernel> kernel_schedule(const StateSpaceModel& model, double b, int horizon,
                                      const RobustConfig& cfg) {
    if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
    std::vector<LfKernel> schedule;
    schedule.reserve(horizon);
    Mat v = model.V0;
    const int n = model.state_dim();
    for (int t = 0; t < horizon; ++t) {
        OneStep step = one_step(model, v);
        double theta = find_theta(spd_inverse(step.P), b, cfg);
        schedule.push_back(lf_kernel(model, v, theta));
        v = spd_inverse(sym(spd_inverse(step.P) - theta * Mat::Identity(n, n)));
    }
    return schedule;
}

TrajectorySample sample_trajectory(const StateSpaceModel& model,
                                   const std::vector<LfKernel>& schedule, Rng& rng) {
    const int n = model.state_dim();
    const int p = model.output_dim();

    TrajectorySample out;
    out.states.reserve(schedule.size() + 1);
    out.measurements.reserve(schedule.size());

    Vec xi(n);
    for (int i = 0; i < n; ++i) xi(i) = rng.normal();
    Vec x = model.x0_mean + spd_chol(model.V0) * xi;
    Vec x_hat = model.x0_mean;
    out.states.push_back(x);

    const Mat c = model.stacked_c();
    const Mat bt_qinv = model.B.transpose() * spd_inverse(model.Q);
    std::vector<Mat> dt_rinv;
    int v_dim = 0;
    for (const auto& ch : model.channels) {
        dt_rinv.push_back(ch.D.transpose() * spd_inverse(ch.R));
        v_dim += static_cast<int>(ch.D.cols());
    }

    for (const LfKernel& kernel : schedule) {
        Vec z = sample_z(kernel, x, x_hat, rng);
        Vec x_next = z.head(n);
        Vec y = z.tail(p);

        out.w.push_back(bt_qinv * (x_next - model.A * x));
        Vec v_rec(v_dim);
        int y_off = 0, v_off = 0;
        for (std::size_t i = 0; i < model.channels.size(); ++i) {
            const auto& ch = model.channels[i];
            const int pi = static_cast<int>(ch.C.rows());
            const int mi = static_cast<int>(ch.D.cols());
            v_rec.segment(v_off, mi) = dt_rinv[i] * (y.segment(y_off, pi) - ch.C * x);
            y_off += pi;
            v_off += mi;
        }
        out.v.push_back(std::move(v_rec));
        out.thetas.push_back(kernel.theta);
        out.measurements.push_back(y);

        x_hat = model.A * x_hat + kernel.G * (y - c * x_hat);
        x = x_next;
        out.states.push_back(x);
    }
    return out;
}

TrajectorySample sample_trajectory(const StateSpaceModel& model, double b, int horizon, Rng& rng,
                                   const RobustConfig& cfg) {
    return sample_trajectory(model, kernel_schedule(model, b, horizon, cfg), rng);
}

SteadyState robust_steady_state(const StateSpaceModel& model, double b, double tol, int max_iter,
                                const RobustConfig& cfg) {
    const int n = model.state_dim();
    Mat v = model.V0;
    int iterations = 0;
    bool converged = false;
    while (iterations < max_iter) {
        ++iterations;
        OneStep step = one_step(model, v);
        double theta = find_theta(spd_inverse(step.P), b, cfg);
        Mat v_next = spd_inverse(sym(spd_inverse(step.P) - theta * Mat::Identity(n, n)));
        bool done = (v_next - v).norm() < tol;
        v = v_next;
        if (done) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw numerical_error(
            "prediction covariance recursion did not converge; the tolerance may be too large");

    SteadyState out;
    out.V_inf = v;
    out.iterations = iterations;
    OneStep step = one_step(model, v);
    out.P_inf = step.P;
    out.theta_inf = find_theta(spd_inverse(step.P), b, cfg);
    out.G_inf = step.G;

    const int p = model.output_dim();
    const Mat c = model.stacked_c();
    Mat k(n + p, n + p);
    k.topLeftCorner(n, n) = sym(model.A * v * model.A.transpose() + model.Q);
    k.topRightCorner(n, p) = model.A * v * c.transpose();
    k.bottomLeftCorner(p, n) = k.topRightCorner(n, p).transpose();
    k.bottomRightCorner(p, p) = step.K_yy;
    out.K = k;

    out.K_tilde = k;
    Mat shifted = spd_inverse(sym(spd_inverse(step.P) - out.theta_inf * Mat::Identity(n, n)));
    out.K_tilde.topLeftCorner(n, n) =
        sym(shifted + step.G * step.K_yy * step.G.transpose());
    return out;
}

double subset_tolerance(const SteadyState& steady, const StateSpaceModel& model,
                        const std::vector<int>& channels) {
    const int n = model.state_dim();
    std::vector<int> keep;
    for (int i = 0; i < n; ++i) keep.push_back(i);
    std::vector<int> offsets(model.channels.size() + 1, 0);
    for (std::size_t i = 0; i < model.channels.size(); ++i)
        offsets[i + 1] = offsets[i] + static_cast<int>(model.channels[i].C.rows());
    for (int ch : channels) {
        if (ch < 0 || ch >= static_cast<int>(model.channels.size()))
            throw std::invalid_argument("channel index out of range");
        for (int r = offsets[ch]; r < offsets[ch + 1]; ++r) keep.push_back(n + r);
    }

    const int d = static_cast<int>(keep.size());
    Mat k(d, d), kt(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            k(i, j) = steady.K(keep[i], keep[j]);
            kt(i, j) = steady.K_tilde(keep[i], keep[j]);
        }

    Eigen::LLT<Mat> llt(sym(k));
    if (llt.info() != Eigen::Success)
        throw numerical_error("stationary covariance restricted to the subset is singular");
    double val = 0.5 * (llt.solve(kt).trace() - d + logdet_spd(sym(k)) - logdet_spd(sym(kt)));
    return std::max(val, 0.0);
}

std::vector<double> local_tolerances(const SteadyState& steady, const StateSpaceModel& model) {
    std::vector<double> out;
    for (int i = 0; i < static_cast<int>(model.channels.size()); ++i)
        out.push_back(subset_tolerance(steady, model, {i}));
    return out;
}

double full_divergence(const SteadyState& steady, const StateSpaceModel& model) {
    std::vector<int> all;
    for (int i = 0; i < static_cast<int>(model.channels.size()); ++i) all.push_back(i);
    return subset_tolerance(steady, model, all);
}

double state_marginal_tolerance(const SteadyState& steady, const StateSpaceModel& model) {
    return subset_tolerance(steady, model, {});
}

NoiseVarianceBounds noise_variance_bounds(const std::vector<TrajectorySample>& runs, int burn_in) {
    if (burn_in < 0) throw std::invalid_argument("burn-in must be nonnegative");
    std::vector<Vec> samples;
    for (const auto& run : runs) {
        const int steps = static_cast<int>(run.w.size());
        for (int t = burn_in; t + 1 < steps; ++t) {
            Vec s(run.w[t].size() + run.v[t + 1].size());
            s << run.w[t], run.v[t + 1];
            samples.push_back(std::move(s));
        }
    }
    if (samples.size() < 100)
        throw std::invalid_argument("need at least 100 post-burn-in noise samples");

    const int d = static_cast<int>(samples[0].size());
    Vec mean = Vec::Zero(d);
    for (const Vec& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    Mat cov = Mat::Zero(d, d);
    for (const Vec& s : samples) {
        Vec c = s - mean;
        cov += c * c.transpose();
    }
    cov /= static_cast<double>(samples.size() - 1);

    NoiseVarianceBounds out;
    out.rho_min = min_eig_sym(sym(cov));
    out.rho_max = max_eig_sym(sym(cov));
    out.samples = static_cast<int>(samples.size());
    return out;
}

}  // namespace rdkf
