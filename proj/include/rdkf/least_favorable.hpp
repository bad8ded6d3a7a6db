#pragma once

#include <vector>

#include "rdkf/rng.hpp"
#include "rdkf/robust_filter.hpp"

namespace rdkf {

// Gaussian transition kernel for z = [x_{t+1}; y_t] given the realized state x
// and the filter's predicted mean x_hat:
//   z | x, x_hat ~ N(M_x x + M_hat x_hat, J_tilde^-1).
// At theta = 0 it is the nominal model: J_tilde = blkdiag(Q^-1, R^-1),
// M_x = [A; C], M_hat = 0. For theta > 0 the induced one-step law of z keeps
// the nominal y-marginal and the nominal conditional mean of x_{t+1} given y,
// and inflates the conditional covariance from P to (P^-1 - theta I)^-1.
struct LfKernel {
    Mat J_tilde;
    Mat M_x;
    Mat M_hat;
    Mat G;  // one-step predictor gain A V C^T (C V C^T + R)^-1
    double theta = 0.0;
    Mat cov;       // J_tilde^-1
    Mat cov_chol;  // lower Cholesky factor of cov

    int state_dim() const { return static_cast<int>(M_x.cols()); }
    int output_dim() const { return static_cast<int>(M_x.rows() - M_x.cols()); }
};

// V is the current prediction-error covariance; theta must keep I - theta P
// positive definite for the nominal one-step covariance P, which holds
// whenever theta comes from find_theta on P^-1.
LfKernel lf_kernel(const StateSpaceModel& model, const Mat& V, double theta);

Vec sample_z(const LfKernel& kernel, const Vec& x, const Vec& x_hat, Rng& rng);

// KL divergence between the one-step law of z induced by the kernel under
// x ~ N(x_hat, V) and the nominal one; equals b at theta = find_theta of the
// predicted precision, i.e. the ambiguity budget is spent exactly.
double expected_kl(const LfKernel& kernel, const StateSpaceModel& model, const Vec& x_hat,
                   const Mat& V);

// The covariance side of the sampler is measurement-free, so the kernel
// sequence can be computed once and shared by all Monte Carlo runs.
std::vector<LfKernel> kernel_schedule(const StateSpaceModel& model, double b, int horizon,
                                      const RobustConfig& cfg = {});

struct TrajectorySample {
    std::vector<Vec> states;        // x_0 .. x_T
    std::vector<Vec> measurements;  // stacked y_0 .. y_{T-1}
    std::vector<Vec> w;             // recovered process noise, length T
    std::vector<Vec> v;             // recovered stacked measurement noise, length T
    std::vector<double> thetas;     // risk sensitivity per step
};

TrajectorySample sample_trajectory(const StateSpaceModel& model,
                                   const std::vector<LfKernel>& schedule, Rng& rng);
TrajectorySample sample_trajectory(const StateSpaceModel& model, double b, int horizon, Rng& rng,
                                   const RobustConfig& cfg = {});

struct SteadyState {
    Mat V_inf;  // stationary prediction-error covariance under the worst case
    Mat P_inf;  // its nominal (pre-shift) counterpart
    double theta_inf = 0.0;
    Mat G_inf;
    Mat K;        // stationary covariance of [x_{t+1}; y_t] under the nominal kernel
    Mat K_tilde;  // counterpart under the worst-case kernel
    int iterations = 0;
};

SteadyState robust_steady_state(const StateSpaceModel& model, double b, double tol = 1e-12,
                                int max_iter = 100000, const RobustConfig& cfg = {});

// KL divergence of the stationary z-law after keeping the state block and the
// outputs of the chosen channels only. The empty subset gives the state
// marginal; the full subset gives the undeleted divergence.
double subset_tolerance(const SteadyState& steady, const StateSpaceModel& model,
                        const std::vector<int>& channels);

// Per-channel tolerances b^i; each is at most the undeleted value.
std::vector<double> local_tolerances(const SteadyState& steady, const StateSpaceModel& model);

double full_divergence(const SteadyState& steady, const StateSpaceModel& model);
double state_marginal_tolerance(const SteadyState& steady, const StateSpaceModel& model);

struct NoiseVarianceBounds {
    double rho_min = 0.0;
    double rho_max = 0.0;
    int samples = 0;
};

// Extreme eigenvalues of the empirical covariance of [w_t; v_{t+1}] across
// runs, skipping the first burn_in steps of each. Diagnostic only.
NoiseVarianceBounds noise_variance_bounds(const std::vector<TrajectorySample>& runs, int burn_in);

}  // namespace rdkf
