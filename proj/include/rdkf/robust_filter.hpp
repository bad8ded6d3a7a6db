#pragma once

#include <vector>

#include "rdkf/lingauss.hpp"

namespace rdkf {

// One measurement channel y = C x + D v, v standard white; R = D D^T.
struct SensorChannel {
    Mat C;
    Mat D;
    Mat R;
};

struct StateSpaceModel {
    Mat A;
    Mat B;
    Mat Q;  // = B B^T
    std::vector<SensorChannel> channels;
    Vec x0_mean;
    Mat V0;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int output_dim() const;
    Mat stacked_c() const;
    Mat block_r() const;

    // Full contract check: shapes, SPD noise covariances consistent with their
    // factors, invertible dynamics, observable (A, stacked C). Filter routines
    // only check what they use, so degenerate models (e.g. C = 0) remain
    // runnable for diagnostics.
    void validate() const;
};

struct RobustConfig {
    double root_tolerance = 1e-12;  // on the gamma residual
    int max_iterations = 200;
};

// gamma(Omega, theta) = (tr X - log det X - n) / 2 with X = (I - theta Omega^-1)^-1,
// defined for 0 <= theta < min-eig(Omega); strictly increasing in theta.
double gamma(const Mat& omega, double theta);

// Unique theta in [0, min-eig(Omega)) with gamma(Omega, theta) = b. b = 0 maps
// to theta = 0 without iteration; otherwise bracketed bisection to |gamma - b|
// below cfg.root_tolerance.
double find_theta(const Mat& omega, double b, const RobustConfig& cfg = {});

// Largest mu with Omega - theta I >= mu Omega for every Omega and
// theta = find_theta(Omega, b): mu = 1/lambda with lambda > 1 solving
// lambda - log lambda - 1 = 2b.
double shrinkage_mu(double b);

GaussianInfo robust_correct(const GaussianInfo& pred, const Mat& C, const Mat& R, const Vec& y);

struct RobustPrediction {
    GaussianInfo pred;  // (q, Psi) for t+1|t
    double theta;
    Mat omega_pred;  // nominal predicted precision before the theta shift
};

RobustPrediction robust_predict(const GaussianInfo& filt, const Mat& A, const Mat& Q, double b,
                                const RobustConfig& cfg = {});

struct FilterStep {
    Vec x_pred;    // prior mean at t
    Mat V_pred;    // prior covariance Psi^-1 at t
    double theta;  // risk sensitivity used by the prediction at t
    Vec x_filt;    // filtered mean at t
};

// Stacked-measurement robust filter. The covariance recursion is
// data-independent, so the upcoming theta can be peeked before the
// measurement arrives (the trajectory sampler relies on this).
class CentralizedRobustFilter {
  public:
    CentralizedRobustFilter(StateSpaceModel model, double b, RobustConfig cfg = {});

    double peek_theta() const;
    FilterStep step(const Vec& y);

    const GaussianInfo& prior() const { return prior_; }
    const StateSpaceModel& model() const { return model_; }

  private:
    StateSpaceModel model_;
    double b_;
    RobustConfig cfg_;
    Mat c_;         // stacked C
    Mat ct_rinv_;   // C^T R^-1
    Mat ct_rinv_c_;
    GaussianInfo prior_;
};

std::vector<FilterStep> centralized_robust_filter(const StateSpaceModel& model, double b,
                                                  const std::vector<Vec>& measurements,
                                                  const RobustConfig& cfg = {});

}  // namespace rdkf
