// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/linalg.hpp
//! Weighted least squares through a rank-revealing QR.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_LINALG_HPP
#define INFSAMP_LINALG_HPP

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "error.hpp"

namespace infsamp
{

//! Relative pivot tolerance below which a design is declared rank deficient.
inline constexpr double rank_tolerance = 1e-10;

/*!
 * Solve min_b sum_i w_i (y_i - x_i'b)^2.
 *
 * Equivalent to b = (X'WX)^{-1} X'Wy but factorizes sqrt(W)X with column
 * pivoting instead of forming the normal equations. Rank deficiency throws
 * singular_design; no pseudo-inverse fallback.
 */
inline Eigen::VectorXd weighted_least_squares(Eigen::MatrixXd const& x,
                                              Eigen::VectorXd const& y,
                                              Eigen::VectorXd const& w)
{
    require(x.rows() == y.size() && y.size() == w.size(),
            "weighted_least_squares: dimension mismatch");
    if (x.rows() < x.cols())
    {
        fail(ErrorKind::singular_design,
             "design has " + std::to_string(x.rows()) + " rows for "
                 + std::to_string(x.cols()) + " coefficients");
    }
    Eigen::VectorXd sw(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
    {
        if (!(w[i] > 0) || !std::isfinite(w[i]))
            fail(ErrorKind::invalid_argument,
                 "regression weights must be positive and finite");
        sw[i] = std::sqrt(w[i]);
    }
    Eigen::MatrixXd xs = sw.asDiagonal() * x;
    Eigen::VectorXd ys = sw.cwiseProduct(y);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    qr.setThreshold(rank_tolerance);
    if (qr.rank() < x.cols())
    {
        fail(ErrorKind::singular_design,
             "design rank " + std::to_string(qr.rank()) + " < "
                 + std::to_string(x.cols()));
    }
    return qr.solve(ys);
}

inline Eigen::VectorXd least_squares(Eigen::MatrixXd const& x,
                                     Eigen::VectorXd const& y)
{
    return weighted_least_squares(x, y, Eigen::VectorXd::Ones(y.size()));
}

}  // namespace infsamp

#endif  // INFSAMP_LINALG_HPP
