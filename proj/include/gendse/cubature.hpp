#ifndef GENDSE_CUBATURE_HPP
#define GENDSE_CUBATURE_HPP

// Third-degree spherical-radial cubature Kalman filter and its Huber-robust
// variant, generic over state and measurement dimension.

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "gendse/types.hpp"

namespace gendse::cubature {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int R, int C>
using Mat = Eigen::Matrix<double, R, C>;
template <int N>
using Points = Eigen::Matrix<double, N, 2 * N>;

template <class M>
M symmetrized(const M& m) {
    return 0.5 * (m + m.transpose());
}

template <int N>
struct SqrtFactor {
    Mat<N, N> S;
    double jitter = 0.0;  // diagonal loading that was needed, 0 if none
};

// Lower-triangular S with S S^T = P. On failure, diagonal jitter from 1e-12
// to 1e-6 is tried in decade steps.
template <int N>
SqrtFactor<N> sqrt_factor(const Mat<N, N>& P) {
    const Mat<N, N> Ps = symmetrized(P);
    if (!Ps.allFinite()) throw NumericalError("sqrt_factor: non-finite covariance");
    Eigen::LLT<Mat<N, N>> llt(Ps);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
    for (double j = 1e-12; j <= 1e-6 * 1.0001; j *= 10.0) {
        llt.compute(Ps + j * Mat<N, N>::Identity());
        if (llt.info() == Eigen::Success) return {llt.matrixL(), j};
    }
    Eigen::SelfAdjointEigenSolver<Mat<N, N>> es(Ps);
    std::ostringstream msg;
    msg << "sqrt_factor: covariance not positive definite, eigenvalues [" << es.eigenvalues().transpose() << "]";
    throw NumericalError(msg.str());
}

// 2N points at x +/- sqrt(N) S e_j, equally weighted.
template <int N>
Points<N> cubature_points(const Vec<N>& x, const Mat<N, N>& S) {
    const double xi = std::sqrt(static_cast<double>(N));
    Points<N> X;
    for (int j = 0; j < N; ++j) {
        X.col(j) = x + xi * S.col(j);
        X.col(j + N) = x - xi * S.col(j);
    }
    return X;
}

template <int N, int C>
Vec<N> point_mean(const Mat<N, C>& X) {
    return X.rowwise().mean();
}

// Equal-weight scatter about the given means. Identical to the raw second
// moment minus the mean outer product, with less cancellation.
template <int A, int B, int C>
Mat<A, B> point_cross(const Mat<A, C>& X, const Vec<A>& mx, const Mat<B, C>& Z, const Vec<B>& mz) {
    const Mat<A, C> dx = X.colwise() - mx;
    const Mat<B, C> dz = Z.colwise() - mz;
    return dx * dz.transpose() / static_cast<double>(C);
}

template <int N>
struct Prediction {
    Vec<N> x;
    Mat<N, N> P;
    double jitter = 0.0;
    double asymmetry = 0.0;  // of the covariance before symmetrization
};

template <class M>
double asymmetry(const M& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

// Propagates cubature points through the state map; map(Vec<N>, int point) -> Vec<N>.
template <int N, class Map>
Prediction<N> forecast(const Vec<N>& x, const Mat<N, N>& P, const Mat<N, N>& Q, Map&& map) {
    const SqrtFactor<N> f = sqrt_factor<N>(P);
    const Points<N> X = cubature_points<N>(x, f.S);
    Points<N> Xs;
    for (int i = 0; i < 2 * N; ++i) {
        Xs.col(i) = map(Vec<N>(X.col(i)), i);
        if (!Xs.col(i).allFinite()) {
            std::ostringstream msg;
            msg << "forecast: propagation of cubature point " << i << " diverged";
            throw NumericalError(msg.str());
        }
    }
    Prediction<N> out;
    out.x = point_mean<N, 2 * N>(Xs);
    const Mat<N, N> raw = point_cross<N, N, 2 * N>(Xs, out.x, Xs, out.x) + Q;
    out.asymmetry = asymmetry(raw);
    out.P = symmetrized(raw);
    out.jitter = f.jitter;
    return out;
}

// Predicted-measurement moments before any measurement covariance is added.
template <int N, int M>
struct MeasurementMoments {
    Vec<M> z_hat;
    Mat<M, M> Pzz_points;  // point scatter only
    Mat<N, M> Pxz;
    double jitter = 0.0;
};

template <int N, int M, class Meas>
MeasurementMoments<N, M> measurement_moments(const Vec<N>& x_pred, const Mat<N, N>& P_pred, Meas&& h) {
    const SqrtFactor<N> f = sqrt_factor<N>(P_pred);
    const Points<N> X = cubature_points<N>(x_pred, f.S);
    Mat<M, 2 * N> Z;
    for (int i = 0; i < 2 * N; ++i) Z.col(i) = h(Vec<N>(X.col(i)));
    MeasurementMoments<N, M> mm;
    mm.z_hat = point_mean<M, 2 * N>(Z);
    mm.Pzz_points = point_cross<M, M, 2 * N>(Z, mm.z_hat, Z, mm.z_hat);
    mm.Pxz = point_cross<N, M, 2 * N>(X, x_pred, Z, mm.z_hat);
    mm.jitter = f.jitter;
    return mm;
}

template <int N, int M>
struct Posterior {
    Vec<N> x;
    Mat<N, N> P;
    Vec<M> innovation;
    Mat<M, M> Pzz;
    Mat<N, M> gain;
    double asymmetry = 0.0;  // of the downdated covariance before symmetrization
};

// Gain, state correction and covariance downdate for a given measurement covariance.
template <int N, int M>
Posterior<N, M> correct(const Vec<N>& x_pred, const Mat<N, N>& P_pred, const MeasurementMoments<N, M>& mm,
                        const Vec<M>& z, const Mat<M, M>& R_eff) {
    Posterior<N, M> out;
    out.Pzz = symmetrized(Mat<M, M>(mm.Pzz_points + R_eff));
    Eigen::LDLT<Mat<M, M>> ldlt(out.Pzz);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15)
        throw NumericalError("correct: innovation covariance is numerically singular");
    out.gain = ldlt.solve(mm.Pxz.transpose()).transpose();
    out.innovation = z - mm.z_hat;
    out.x = x_pred + out.gain * out.innovation;
    const Mat<N, N> raw = P_pred - out.gain * out.Pzz * out.gain.transpose();
    out.asymmetry = asymmetry(raw);
    out.P = symmetrized(raw);
    return out;
}

template <int N, int M, class Meas>
Posterior<N, M> ckf_update(const Vec<N>& x_pred, const Mat<N, N>& P_pred, const Vec<M>& z, const Mat<M, M>& R,
                           Meas&& h) {
    return correct<N, M>(x_pred, P_pred, measurement_moments<N, M>(x_pred, P_pred, h), z, R);
}

// ---------------------------------------------------------------------------
// Huber equivalence weights on a diagonal measurement covariance.

template <int M>
struct HuberWeighting {
    Vec<M> sigma;         // standard deviation of each innovation component
    Vec<M> r_std;         // standardized innovation
    Vec<M> p_bar;         // diagonal of the equivalence weight matrix
    Mat<M, M> R_bar;      // corrected covariance, inverse of the weight matrix
    int triggered = 0;    // channels outside the threshold
};

template <int M>
HuberWeighting<M> huber_weights(const Vec<M>& r, const Mat<M, M>& Pzz_pre, const Mat<M, M>& R, double C) {
    require(C > 0.0, "huber_weights: C must be > 0");
    HuberWeighting<M> w;
    w.R_bar.setZero();
    for (int m = 0; m < M; ++m) {
        const double var = Pzz_pre(m, m);
        if (!(var > 0.0)) throw NumericalError("huber_weights: zero innovation standard deviation");
        require(R(m, m) > 0.0, "huber_weights: R diagonal must be > 0");
        w.sigma(m) = std::sqrt(var);
        w.r_std(m) = r(m) / w.sigma(m);
        const double a = std::abs(w.r_std(m));
        if (a <= C) {
            w.p_bar(m) = 1.0 / R(m, m);
        } else {
            w.p_bar(m) = C / (R(m, m) * a);
            ++w.triggered;
        }
        w.R_bar(m, m) = 1.0 / w.p_bar(m);
    }
    return w;
}

template <int N, int M>
struct RobustPosterior {
    Posterior<N, M> post;
    HuberWeighting<M> huber;
    Mat<M, M> Pzz_pre;
};

// Pre-correction innovation covariance with R, Huber re-weighting, then the
// update redone with the corrected covariance.
template <int N, int M>
RobustPosterior<N, M> robust_correct(const Vec<N>& x_pred, const Mat<N, N>& P_pred,
                                     const MeasurementMoments<N, M>& mm, const Vec<M>& z, const Mat<M, M>& R,
                                     double C) {
    RobustPosterior<N, M> out;
    out.Pzz_pre = symmetrized(Mat<M, M>(mm.Pzz_points + R));
    const Vec<M> r = z - mm.z_hat;
    out.huber = huber_weights<M>(r, out.Pzz_pre, R, C);
    out.post = correct<N, M>(x_pred, P_pred, mm, z, out.huber.R_bar);
    return out;
}

template <int N, int M, class Meas>
RobustPosterior<N, M> rckf_update(const Vec<N>& x_pred, const Mat<N, N>& P_pred, const Vec<M>& z,
                                  const Mat<M, M>& R, double C, Meas&& h) {
    return robust_correct<N, M>(x_pred, P_pred, measurement_moments<N, M>(x_pred, P_pred, h), z, R, C);
}

template <int N>
double min_eigenvalue(const Mat<N, N>& P) {
    Eigen::SelfAdjointEigenSolver<Mat<N, N>> es(P, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace gendse::cubature

#endif  // GENDSE_CUBATURE_HPP
