// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/esw.hpp
//! Models for the sample-conditional weight expectations E_s(w | y, z) and
//! E_s(w | z), fitted from the sample alone.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_ESW_HPP
#define INFSAMP_ESW_HPP

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "error.hpp"
#include "linalg.hpp"

namespace infsamp
{

enum class EswForm
{
    linear,      //!< w ~ (1, y, z)
    log_linear,  //!< log w ~ (1, y, z)
};

enum class ZFit
{
    regression,  //!< w (or log w) on (1, z)
    saturated,   //!< per-level sample mean of w; discrete z only
    automatic,   //!< saturated when z has few distinct levels
    constant,    //!< fixed value everywhere
};

using LevelKey = std::vector<double>;

template<class Row>
LevelKey level_key(Row const& row)
{
    LevelKey key(static_cast<std::size_t>(row.size()));
    for (Eigen::Index k = 0; k < row.size(); ++k)
        key[static_cast<std::size_t>(k)] = row[k];
    return key;
}

inline std::string to_string(LevelKey const& key)
{
    std::string s;
    for (std::size_t k = 0; k < key.size(); ++k)
    {
        if (k)
            s += ";";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", key[k]);
        s += buf;
    }
    return s;
}

//---------------------------------------------------------------------------//
struct EswModel
{
    EswForm form = EswForm::log_linear;
    Eigen::VectorXd coef_yz;  //!< on (1, y, z_1..z_p)
    ZFit z_fit = ZFit::regression;
    Eigen::VectorXd coef_z;  //!< on (1, z_1..z_p); regression fit only
    std::map<LevelKey, double> level_means;  //!< saturated fit only
    double constant_value = 0;

    static EswModel constant(double value)
    {
        require(value > 0, "constant E_s(w) must be positive");
        EswModel m;
        m.form = EswForm::linear;
        m.z_fit = ZFit::constant;
        m.constant_value = value;
        m.coef_yz = Eigen::VectorXd::Constant(1, value);
        return m;
    }

    //! Fitted E_s(w | y, z).
    template<class Row>
    double predict(double y, Row const& z) const
    {
        if (z_fit == ZFit::constant)
            return constant_value;
        double eta = coef_yz[0] + coef_yz[1] * y;
        for (Eigen::Index k = 0; k + 2 < coef_yz.size(); ++k)
            eta += coef_yz[k + 2] * z[k];
        return form == EswForm::log_linear ? std::exp(eta) : eta;
    }

    //! Fitted E_s(w | z).
    template<class Row>
    double predict_z(Row const& z) const
    {
        switch (z_fit)
        {
            case ZFit::constant: return constant_value;
            case ZFit::saturated: {
                auto it = level_means.find(level_key(z));
                if (it == level_means.end())
                    fail(ErrorKind::unsupported_level,
                         "z level " + to_string(level_key(z))
                             + " not seen when fitting E_s(w|z)");
                return it->second;
            }
            default: break;
        }
        double eta = coef_z[0];
        for (Eigen::Index k = 0; k + 1 < coef_z.size(); ++k)
            eta += coef_z[k + 1] * z[k];
        return form == EswForm::log_linear ? std::exp(eta) : eta;
    }
};

inline std::size_t count_levels(Eigen::MatrixXd const& z)
{
    std::set<LevelKey> levels;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        levels.insert(level_key(z.row(i)));
    return levels.size();
}

/*!
 * Fit E_s(w | y, z) by least squares of w (linear) or log w (log-linear) on
 * (1, y, z), and a companion E_s(w | z).
 *
 * Fitted values on the training sample must be positive; a linear fit that
 * goes nonpositive throws invalid_weight_model.
 */
inline EswModel
estimate_esw(Sample const& s, EswForm form = EswForm::log_linear, ZFit z_fit = ZFit::automatic)
{
    auto const n = static_cast<Eigen::Index>(s.size());
    auto const p = s.z.cols();
    require(n > p + 2, "estimate_esw needs more than p + 2 units");
    require(z_fit != ZFit::constant, "use EswModel::constant for a fixed value");

    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        require(s.w[i] > 0, "weights must be positive");
        target[i] = form == EswForm::log_linear ? std::log(s.w[i]) : s.w[i];
    }

    EswModel m;
    m.form = form;

    Eigen::MatrixXd xyz(n, p + 2);
    xyz.col(0).setOnes();
    xyz.col(1) = s.y;
    xyz.rightCols(p) = s.z;
    m.coef_yz = least_squares(xyz, target);

    if (z_fit == ZFit::automatic)
    {
        auto levels = count_levels(s.z);
        z_fit = (levels <= 64 && 2 * levels <= s.size()) ? ZFit::saturated
                                                         : ZFit::regression;
    }
    m.z_fit = z_fit;
    if (z_fit == ZFit::saturated)
    {
        std::map<LevelKey, std::pair<double, std::size_t>> acc;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            auto& a = acc[level_key(s.z.row(i))];
            a.first += s.w[i];
            ++a.second;
        }
        for (auto const& [key, a] : acc)
            m.level_means[key] = a.first / static_cast<double>(a.second);
    }
    else
    {
        Eigen::MatrixXd xz(n, p + 1);
        xz.col(0).setOnes();
        xz.rightCols(p) = s.z;
        m.coef_z = least_squares(xz, target);
    }

    for (Eigen::Index i = 0; i < n; ++i)
    {
        auto row = s.z.row(i);
        if (!(m.predict(s.y[i], row) > 0) || !(m.predict_z(row) > 0))
            fail(ErrorKind::invalid_weight_model,
                 "fitted weight expectation is nonpositive at sample unit "
                     + std::to_string(i),
                 static_cast<std::size_t>(i));
    }
    return m;
}

}  // namespace infsamp

#endif  // INFSAMP_ESW_HPP
