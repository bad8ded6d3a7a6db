#include "rdkf/lingauss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rdkf/errors.hpp"

namespace rdkf {

namespace {

Eigen::LLT<Mat> checked_llt(const Mat& m, const char* what) {
    if (m.rows() != m.cols())
        throw std::invalid_argument(std::string(what) + ": matrix is not square");
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(std::string(what) + ": matrix is not positive definite");
    return llt;
}

}  // namespace

void check_spd(const Mat& m, const char* what) {
    if (m.rows() != m.cols())
        throw std::invalid_argument(std::string(what) + ": matrix is not square");
    double scale = m.norm();
    double asym = (m - m.transpose()).norm();
    if (asym > 1e-12 * std::max(1.0, scale))
        throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
    checked_llt(sym(m), what);
}

Mat spd_inverse(const Mat& m) {
    Eigen::LLT<Mat> llt = checked_llt(sym(m), "spd_inverse");
    return sym(llt.solve(Mat::Identity(m.rows(), m.cols())));
}

double logdet_spd(const Mat& m) {
    Eigen::LLT<Mat> llt = checked_llt(sym(m), "logdet_spd");
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Mat spd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m));
    if (es.info() != Eigen::Success)
        throw std::invalid_argument("spd_sqrt: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
        throw std::invalid_argument("spd_sqrt: matrix is not positive semidefinite");
    Vec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return sym(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

Mat spd_chol(const Mat& m) {
    Eigen::LLT<Mat> llt = checked_llt(sym(m), "spd_chol");
    return llt.matrixL();
}

double min_eig_sym(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_eig_sym(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

bool psd_leq(const Mat& x, const Mat& y, double slack) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw std::invalid_argument("psd_leq: dimension mismatch");
    return min_eig_sym(y - x) >= -slack;
}

Vec GaussianInfo::mean() const {
    Eigen::LLT<Mat> llt = checked_llt(sym(omega), "GaussianInfo::mean");
    return llt.solve(q);
}

Mat GaussianInfo::covariance() const { return spd_inverse(omega); }

GaussianInfo to_info(const GaussianMoment& g) {
    Mat omega = spd_inverse(g.cov);
    return GaussianInfo{omega * g.mean, omega};
}

GaussianMoment to_moment(const GaussianInfo& g) {
    Mat cov = spd_inverse(g.omega);
    return GaussianMoment{cov * g.q, cov};
}

double kl_divergence(const GaussianInfo& a, const GaussianInfo& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("kl_divergence: dimension mismatch");
    const int n = a.dim();
    Mat cov_a = spd_inverse(a.omega);
    Vec m_a = cov_a * a.q;
    Eigen::LLT<Mat> llt_b = checked_llt(sym(b.omega), "kl_divergence");
    Vec m_b = llt_b.solve(b.q);
    Vec d = m_a - m_b;
    double quad = d.dot(b.omega * d);
    double trace = (b.omega * cov_a).trace();
    double logdet = logdet_spd(a.omega) - logdet_spd(b.omega);
    double kl = 0.5 * (trace - n + quad + logdet);
    return kl < 0.0 ? 0.0 : kl;
}

GaussianMoment tilt(const GaussianMoment& g, const Mat& T, const Vec& u, double theta) {
    if (T.cols() != g.mean.size() || u.size() != T.rows())
        throw std::invalid_argument("tilt: dimension mismatch");
    Mat prec = spd_inverse(g.cov);
    Mat prec_tilted = sym(prec - theta * T.transpose() * T);
    Eigen::LLT<Mat> llt(prec_tilted);
    if (llt.info() != Eigen::Success)
        throw numerical_error("tilt: reweighting destroys positive definiteness (tolerance too large)");
    Vec h = prec * g.mean + theta * T.transpose() * u;
    Mat cov = sym(llt.solve(Mat::Identity(prec.rows(), prec.cols())));
    return GaussianMoment{cov * h, cov};
}

GaussianMoment condition(const GaussianMoment& joint, const std::vector<int>& observed,
                         const Vec& value) {
    const int n = static_cast<int>(joint.mean.size());
    if (static_cast<int>(observed.size()) != value.size())
        throw std::invalid_argument("condition: observed index/value size mismatch");
    std::vector<bool> is_obs(static_cast<std::size_t>(n), false);
    for (int idx : observed) {
        if (idx < 0 || idx >= n)
            throw std::invalid_argument("condition: observed index out of range");
        if (is_obs[static_cast<std::size_t>(idx)])
            throw std::invalid_argument("condition: duplicate observed index");
        is_obs[static_cast<std::size_t>(idx)] = true;
    }
    std::vector<int> kept;
    for (int i = 0; i < n; ++i)
        if (!is_obs[static_cast<std::size_t>(i)]) kept.push_back(i);

    const int na = static_cast<int>(kept.size());
    const int nb = static_cast<int>(observed.size());
    Vec mu_a(na), mu_b(nb);
    Mat s_aa(na, na), s_ab(na, nb), s_bb(nb, nb);
    for (int i = 0; i < na; ++i) {
        mu_a(i) = joint.mean(kept[static_cast<std::size_t>(i)]);
        for (int j = 0; j < na; ++j)
            s_aa(i, j) = joint.cov(kept[static_cast<std::size_t>(i)], kept[static_cast<std::size_t>(j)]);
        for (int j = 0; j < nb; ++j)
            s_ab(i, j) = joint.cov(kept[static_cast<std::size_t>(i)], observed[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < nb; ++i) {
        mu_b(i) = joint.mean(observed[static_cast<std::size_t>(i)]);
        for (int j = 0; j < nb; ++j)
            s_bb(i, j) = joint.cov(observed[static_cast<std::size_t>(i)], observed[static_cast<std::size_t>(j)]);
    }

    Eigen::LLT<Mat> llt(sym(s_bb));
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("condition: observed block is singular");
    Mat gain = llt.solve(s_ab.transpose()).transpose();  // s_ab s_bb^-1
    return GaussianMoment{mu_a + gain * (value - mu_b), sym(s_aa - gain * s_ab.transpose())};
}

}  // namespace rdkf
