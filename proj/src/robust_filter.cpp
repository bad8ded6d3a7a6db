#include "rdkf/robust_filter.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rdkf/errors.hpp"

namespace rdkf {

namespace {

double gamma_from_eigs(const Vec& eigs, double theta) {
    double acc = 0.0;
    for (int k = 0; k < eigs.size(); ++k) {
        double x = eigs(k) / (eigs(k) - theta);
        acc += x - std::log(x) - 1.0;
    }
    return 0.5 * acc;
}

Vec spd_eigenvalues(const Mat& omega, const char* what) {
    check_spd(omega, what);
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(omega), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

}  // namespace

int StateSpaceModel::output_dim() const {
    int p = 0;
    for (const auto& ch : channels) p += static_cast<int>(ch.C.rows());
    return p;
}

Mat StateSpaceModel::stacked_c() const {
    Mat c(output_dim(), state_dim());
    int row = 0;
    for (const auto& ch : channels) {
        c.middleRows(row, ch.C.rows()) = ch.C;
        row += static_cast<int>(ch.C.rows());
    }
    return c;
}

Mat StateSpaceModel::block_r() const {
    const int p = output_dim();
    Mat r = Mat::Zero(p, p);
    int row = 0;
    for (const auto& ch : channels) {
        r.block(row, row, ch.R.rows(), ch.R.cols()) = ch.R;
        row += static_cast<int>(ch.R.rows());
    }
    return r;
}

void StateSpaceModel::validate() const {
    const int n = state_dim();
    if (A.rows() != A.cols()) throw std::invalid_argument("dynamics matrix must be square");
    if (B.rows() != n) throw std::invalid_argument("input map row count must match the state dimension");
    if (Q.rows() != n || Q.cols() != n)
        throw std::invalid_argument("process noise covariance has the wrong shape");
    check_spd(Q, "process noise covariance");
    if ((Q - B * B.transpose()).norm() > 1e-10 * (1.0 + Q.norm()))
        throw std::invalid_argument("process noise covariance must equal B B^T");
    if (std::abs(A.determinant()) <= 1e-12)
        throw std::invalid_argument("dynamics matrix must be invertible");
    if (x0_mean.size() != n) throw std::invalid_argument("initial mean has the wrong dimension");
    if (V0.rows() != n || V0.cols() != n)
        throw std::invalid_argument("initial covariance has the wrong shape");
    check_spd(V0, "initial covariance");
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const auto& ch = channels[i];
        const std::string tag = "channel " + std::to_string(i);
        if (ch.C.cols() != n)
            throw std::invalid_argument(tag + ": output matrix column count must match the state dimension");
        if (ch.R.rows() != ch.C.rows() || ch.R.cols() != ch.C.rows())
            throw std::invalid_argument(tag + ": measurement noise covariance has the wrong shape");
        if (ch.D.rows() != ch.C.rows())
            throw std::invalid_argument(tag + ": noise map row count must match the output dimension");
        check_spd(ch.R, (tag + " measurement noise covariance").c_str());
        if ((ch.R - ch.D * ch.D.transpose()).norm() > 1e-10 * (1.0 + ch.R.norm()))
            throw std::invalid_argument(tag + ": measurement noise covariance must equal D D^T");
    }
    if (channels.empty()) throw std::invalid_argument("model must have at least one measurement channel");
    const Mat c = stacked_c();
    Mat obs(c.rows() * n, n);
    Mat power = Mat::Identity(n, n);
    for (int k = 0; k < n; ++k) {
        obs.middleRows(k * c.rows(), c.rows()) = c * power;
        power = power * A;
    }
    if (Eigen::ColPivHouseholderQR<Mat>(obs).rank() < n)
        throw std::invalid_argument("model is not observable from the stacked outputs");
}

double gamma(const Mat& omega, double theta) {
    Vec eigs = spd_eigenvalues(omega, "precision matrix");
    if (theta < 0.0 || theta >= eigs.minCoeff())
        throw std::invalid_argument("risk sensitivity must lie in [0, min-eig of the precision)");
    return gamma_from_eigs(eigs, theta);
}

double find_theta(const Mat& omega, double b, const RobustConfig& cfg) {
    if (b < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
    Vec eigs = spd_eigenvalues(omega, "precision matrix");
    if (b == 0.0) return 0.0;

    double lo = 0.0;
    double hi = eigs.minCoeff() * (1.0 - 1e-14);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        double mid = 0.5 * (lo + hi);
        double g = gamma_from_eigs(eigs, mid);
        if (std::abs(g - b) < cfg.root_tolerance) return mid;
        (g < b ? lo : hi) = mid;
    }
    throw numerical_error("risk sensitivity bisection did not reach the requested residual");
}

double shrinkage_mu(double b) {
    if (b < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
    if (b == 0.0) return 1.0;
    // lambda - log lambda - 1 is increasing on lambda > 1 from 0 to infinity.
    auto f = [b](double lam) { return lam - std::log(lam) - 1.0 - 2.0 * b; };
    double lo = 1.0, hi = 2.0;
    while (f(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 1.0 / (0.5 * (lo + hi));
}

GaussianInfo robust_correct(const GaussianInfo& pred, const Mat& C, const Mat& R, const Vec& y) {
    const int n = pred.dim();
    if (C.cols() != n) throw std::invalid_argument("output matrix column count must match the state dimension");
    if (R.rows() != C.rows() || R.cols() != C.rows())
        throw std::invalid_argument("measurement noise covariance has the wrong shape");
    if (y.size() != C.rows()) throw std::invalid_argument("measurement has the wrong dimension");
    Eigen::LLT<Mat> llt(sym(R));
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("measurement noise covariance is not positive definite");
    Mat rinv_c = llt.solve(C);
    GaussianInfo out;
    out.omega = sym(pred.omega + C.transpose() * rinv_c);
    out.q = pred.q + C.transpose() * llt.solve(y);
    return out;
}

RobustPrediction robust_predict(const GaussianInfo& filt, const Mat& A, const Mat& Q, double b,
                                const RobustConfig& cfg) {
    const int n = filt.dim();
    if (A.rows() != n || A.cols() != n) throw std::invalid_argument("dynamics matrix has the wrong shape");
    if (Q.rows() != n || Q.cols() != n)
        throw std::invalid_argument("process noise covariance has the wrong shape");
    Mat omega_inv = spd_inverse(filt.omega);
    RobustPrediction out;
    out.omega_pred = spd_inverse(sym(A * omega_inv * A.transpose() + Q));
    out.theta = find_theta(out.omega_pred, b, cfg);
    out.pred.omega = sym(out.omega_pred - out.theta * Mat::Identity(n, n));
    out.pred.q = out.pred.omega * (A * (omega_inv * filt.q));
    return out;
}

CentralizedRobustFilter::CentralizedRobustFilter(StateSpaceModel model, double b, RobustConfig cfg)
    : model_(std::move(model)), b_(b), cfg_(cfg) {
    if (b_ < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
    c_ = model_.stacked_c();
    Mat r = model_.block_r();
    Eigen::LLT<Mat> llt(sym(r));
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("stacked measurement noise covariance is not positive definite");
    ct_rinv_ = llt.solve(c_).transpose();
    ct_rinv_c_ = sym(ct_rinv_ * c_);
    prior_ = to_info({model_.x0_mean, model_.V0});
}

double CentralizedRobustFilter::peek_theta() const {
    GaussianInfo filt;
    filt.omega = sym(prior_.omega + ct_rinv_c_);
    filt.q = Vec::Zero(model_.state_dim());
    return robust_predict(filt, model_.A, model_.Q, b_, cfg_).theta;
}

FilterStep CentralizedRobustFilter::step(const Vec& y) {
    if (y.size() != c_.rows()) throw std::invalid_argument("measurement has the wrong dimension");
    FilterStep out;
    out.V_pred = prior_.covariance();
    out.x_pred = out.V_pred * prior_.q;

    GaussianInfo filt;
    filt.omega = sym(prior_.omega + ct_rinv_c_);
    filt.q = prior_.q + ct_rinv_ * y;
    out.x_filt = filt.mean();

    RobustPrediction next = robust_predict(filt, model_.A, model_.Q, b_, cfg_);
    out.theta = next.theta;
    prior_ = next.pred;
    return out;
}

std::vector<FilterStep> centralized_robust_filter(const StateSpaceModel& model, double b,
                                                  const std::vector<Vec>& measurements,
                                                  const RobustConfig& cfg) {
    CentralizedRobustFilter filter(model, b, cfg);
    std::vector<FilterStep> steps;
    steps.reserve(measurements.size());
    for (const Vec& y : measurements) steps.push_back(filter.step(y));
    return steps;
}

}  // namespace rdkf
