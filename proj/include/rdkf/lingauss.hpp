#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rdkf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// ============================================================
// Symmetric positive (semi)definite helpers
// ============================================================

// Symmetric part. Re-applied after every covariance/precision update to stop
// asymmetry from accumulating over long recursions.
inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Throws std::invalid_argument unless m is square, symmetric (1e-12 relative)
// and admits a Cholesky factorization.
void check_spd(const Mat& m, const char* what);

// Cholesky-based inverse of an SPD matrix; throws if the factorization fails.
Mat spd_inverse(const Mat& m);

// log det of an SPD matrix via Cholesky.
double logdet_spd(const Mat& m);

// Symmetric square root of an SPD matrix (eigendecomposition).
Mat spd_sqrt(const Mat& m);

// Lower Cholesky factor; throws on non-PD input.
Mat spd_chol(const Mat& m);

double min_eig_sym(const Mat& m);
double max_eig_sym(const Mat& m);

// Loewner order check x <= y, implemented as min-eig(y - x) >= -slack.
// Exact semidefinite tests are meaningless in floating point.
bool psd_leq(const Mat& x, const Mat& y, double slack = 1e-10);

// ============================================================
// Gaussian densities in moment and information form
// ============================================================

struct GaussianMoment {
    Vec mean;
    Mat cov;
};

// Information pair (q, omega): mean = omega^-1 q, covariance = omega^-1.
// This is the object nodes exchange.
struct GaussianInfo {
    Vec q;
    Mat omega;

    Vec mean() const;
    Mat covariance() const;
    int dim() const { return static_cast<int>(q.size()); }
};

GaussianInfo to_info(const GaussianMoment& g);
GaussianMoment to_moment(const GaussianInfo& g);

// KL divergence D(a || b) between Gaussians given as information pairs.
// Result is clamped at 0; tiny negatives only arise from rounding.
double kl_divergence(const GaussianInfo& a, const GaussianInfo& b);

// Exponential-of-quadratic reweighting of a Gaussian by exp((theta/2)|Tz + u|^2):
// precision becomes cov^-1 - theta T^T T, information vector cov^-1 mean + theta T^T u.
// Throws rdkf::numerical_error if the reweighting destroys positive
// definiteness (the tilt is infeasible, i.e. theta is too large).
GaussianMoment tilt(const GaussianMoment& g, const Mat& T, const Vec& u, double theta);

// Condition a joint Gaussian on observed coordinates. `observed` lists the
// indices of the observed block (any order-free subset); the returned Gaussian
// is over the remaining coordinates in their original order.
GaussianMoment condition(const GaussianMoment& joint, const std::vector<int>& observed,
                         const Vec& value);

}  // namespace rdkf
