// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/estimators.hpp
//! Design-weighted and regression estimators computed from a Sample.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_ESTIMATORS_HPP
#define INFSAMP_ESTIMATORS_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "error.hpp"
#include "esw.hpp"
#include "linalg.hpp"

namespace infsamp
{

struct EstimatorResult
{
    std::string name;
    std::vector<std::string> components;
    std::vector<double> value;  //!< same length as components
    std::size_t n_used = 0;
    std::map<std::string, double> diagnostics;

    double scalar() const { return value.at(0); }
};

//! Coefficient of variation of the weights (population standard deviation).
inline double weight_cv(Eigen::VectorXd const& w)
{
    if (w.size() == 0)
        return 0;
    double mean = w.mean();
    double var = (w.array() - mean).square().mean();
    return std::sqrt(var) / mean;
}

namespace detail
{
inline EstimatorResult
make_scalar(std::string name, double v, std::size_t n, Eigen::VectorXd const& w)
{
    EstimatorResult r;
    r.name = std::move(name);
    r.components = {"value"};
    r.value = {v};
    r.n_used = n;
    r.diagnostics["weight_cv"] = weight_cv(w);
    return r;
}

inline void require_nonempty(Sample const& s)
{
    if (s.size() == 0)
        fail(ErrorKind::invalid_argument, "empty sample");
}
}  // namespace detail

//---------------------------------------------------------------------------//
//! Unweighted sample mean; the naive baseline.
inline EstimatorResult sample_mean(Sample const& s)
{
    detail::require_nonempty(s);
    return detail::make_scalar("sample_mean", s.y.mean(), s.size(), s.w);
}

//! Hajek ratio estimator sum w_i y_i / sum w_i.
inline EstimatorResult hajek_mean(Sample const& s)
{
    detail::require_nonempty(s);
    double v = s.w.dot(s.y) / s.w.sum();
    return detail::make_scalar("hajek", v, s.size(), s.w);
}

//---------------------------------------------------------------------------//
struct PostStratOptions
{
    //! Drop cells with N_j > 0 but no sample instead of failing. Dropped
    //! cells are listed in the diagnostics as dropped_cell_<j> = N_j.
    bool drop_empty_cells = false;
};

/*!
 * Poststratified mean sum_j N_j ybar_j / sum_j N_j with ybar_j the
 * unweighted sample mean in cell j.
 */
inline EstimatorResult poststratified_mean(Sample const& s,
                                           std::span<double const> cell_sizes,
                                           PostStratOptions opts = {})
{
    detail::require_nonempty(s);
    require(s.cell_id.size() == s.size(), "sample carries no cell labels");
    auto const J = cell_sizes.size();
    std::vector<double> sum(J, 0.0);
    std::vector<std::size_t> count(J, 0);
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        auto c = s.cell_id[i];
        require(c < J, "sample cell_id " + std::to_string(c) + " has no cell size");
        sum[c] += s.y[static_cast<Eigen::Index>(i)];
        ++count[c];
    }

    EstimatorResult r;
    r.name = "poststratified";
    r.components = {"value"};
    double num = 0, den = 0;
    std::size_t dropped = 0;
    for (std::size_t j = 0; j < J; ++j)
    {
        require(cell_sizes[j] >= 0, "cell sizes must be nonnegative");
        if (cell_sizes[j] == 0)
            continue;
        if (count[j] == 0)
        {
            if (!opts.drop_empty_cells)
                fail(ErrorKind::empty_cell,
                     "cell " + std::to_string(j) + " has N_j = "
                         + std::to_string(cell_sizes[j]) + " but no sample",
                     j);
            r.diagnostics["dropped_cell_" + std::to_string(j)] = cell_sizes[j];
            ++dropped;
            continue;
        }
        num += cell_sizes[j] * sum[j] / static_cast<double>(count[j]);
        den += cell_sizes[j];
        r.n_used += count[j];
    }
    if (!(den > 0))
        fail(ErrorKind::empty_cell, "no populated cell has a sample");
    r.value = {num / den};
    r.diagnostics["weight_cv"] = weight_cv(s.w);
    r.diagnostics["dropped_cells"] = static_cast<double>(dropped);
    return r;
}

//---------------------------------------------------------------------------//
/*!
 * Hajek mean of domain 1 minus Hajek mean of domain 0.
 *
 * `domain` holds a 0/1 label per sample unit.
 */
inline EstimatorResult weighted_domain_difference(Sample const& s,
                                                  std::span<int const> domain)
{
    require(domain.size() == s.size(), "domain length must equal sample size");
    double wy[2] = {0, 0}, ws[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        int d = domain[i];
        require(d == 0 || d == 1, "domain labels must be 0 or 1");
        auto ii = static_cast<Eigen::Index>(i);
        wy[d] += s.w[ii] * s.y[ii];
        ws[d] += s.w[ii];
        ++count[d];
    }
    for (std::size_t d : {1u, 0u})
    {
        if (count[d] == 0)
            fail(ErrorKind::empty_domain,
                 "domain " + std::to_string(d) + " has no sampled units", d);
    }
    auto r = detail::make_scalar(
        "domain_difference", wy[1] / ws[1] - wy[0] / ws[0], s.size(), s.w);
    r.diagnostics["n_domain_0"] = static_cast<double>(count[0]);
    r.diagnostics["n_domain_1"] = static_cast<double>(count[1]);
    return r;
}

//---------------------------------------------------------------------------//
//! Which z columns enter a regression; nullopt means all of them. An empty
//! list gives the intercept-only model.
using ColumnSelection = std::optional<std::vector<std::size_t>>;

inline Eigen::MatrixXd design_matrix(Eigen::MatrixXd const& z,
                                     ColumnSelection const& cols = std::nullopt)
{
    std::vector<std::size_t> use;
    if (cols)
        use = *cols;
    else
        for (Eigen::Index k = 0; k < z.cols(); ++k)
            use.push_back(static_cast<std::size_t>(k));

    Eigen::MatrixXd x(z.rows(), static_cast<Eigen::Index>(use.size()) + 1);
    x.col(0).setOnes();
    for (std::size_t k = 0; k < use.size(); ++k)
    {
        require(use[k] < static_cast<std::size_t>(z.cols()),
                "regression column out of range");
        x.col(static_cast<Eigen::Index>(k) + 1)
            = z.col(static_cast<Eigen::Index>(use[k]));
    }
    return x;
}

inline std::vector<std::string> coefficient_names(Eigen::Index p,
                                                  ColumnSelection const& cols)
{
    std::vector<std::string> names{"intercept"};
    if (cols)
        for (auto k : *cols)
            names.push_back("z_" + std::to_string(k + 1));
    else
        for (Eigen::Index k = 0; k < p; ++k)
            names.push_back("z_" + std::to_string(k + 1));
    return names;
}

namespace detail
{
inline EstimatorResult regression(std::string name,
                                  Sample const& s,
                                  Eigen::VectorXd const& reg_weights,
                                  ColumnSelection const& cols)
{
    require_nonempty(s);
    Eigen::MatrixXd x = design_matrix(s.z, cols);
    Eigen::VectorXd b = weighted_least_squares(x, s.y, reg_weights);
    EstimatorResult r;
    r.name = std::move(name);
    r.components = coefficient_names(s.z.cols(), cols);
    r.value.assign(b.data(), b.data() + b.size());
    r.n_used = s.size();
    r.diagnostics["weight_cv"] = weight_cv(s.w);
    return r;
}
}  // namespace detail

//! Unweighted least squares of y on (1, z).
inline EstimatorResult ols_fit(Sample const& s, ColumnSelection const& cols = std::nullopt)
{
    return detail::regression(
        "ols", s, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.size())), cols);
}

//! b_w = [sum w_i z_i z_i']^{-1} sum w_i z_i y_i.
inline EstimatorResult
weighted_regression_bw(Sample const& s, ColumnSelection const& cols = std::nullopt)
{
    return detail::regression("bw", s, s.w, cols);
}

/*!
 * b_q with q_i = w_i / E_s(w | z_i).
 *
 * Dividing out the z-conditional part of the weight keeps only the part
 * that distorts f(y | z), so b_q is less variable than b_w.
 */
inline EstimatorResult q_weighted_regression_bq(Sample const& s,
                                                EswModel const& esw,
                                                ColumnSelection const& cols = std::nullopt)
{
    detail::require_nonempty(s);
    Eigen::VectorXd q(s.w.size());
    for (Eigen::Index i = 0; i < q.size(); ++i)
    {
        double e = esw.predict_z(s.z.row(i));
        if (!(e > 0) || !std::isfinite(e))
            fail(ErrorKind::invalid_weight_model,
                 "fitted E_s(w|z) is nonpositive at sample unit " + std::to_string(i),
                 static_cast<std::size_t>(i));
        q[i] = s.w[i] / e;
    }
    auto r = detail::regression("bq", s, q, cols);
    r.diagnostics["q_cv"] = weight_cv(q);
    return r;
}

//---------------------------------------------------------------------------//
/*!
 * Two-step regression of y on a discrete z through a binary design variable
 * x: fit saturated cell means yhat(z, x), then average them over the
 * population distribution of x within each z level.
 */
struct TwoStepSpec
{
    std::size_t z_col = 0;
    std::size_t x_col = 1;
    //! Per z level: (Pr_pop(x = 0 | z), Pr_pop(x = 1 | z)).
    std::map<double, std::array<double, 2>> pop_x_dist;
};

inline EstimatorResult two_step_regression(Sample const& s, TwoStepSpec const& spec)
{
    detail::require_nonempty(s);
    require(spec.z_col < static_cast<std::size_t>(s.z.cols())
                && spec.x_col < static_cast<std::size_t>(s.z.cols())
                && spec.z_col != spec.x_col,
            "two-step: z and x must be distinct sample columns");
    require(!spec.pop_x_dist.empty(), "two-step: pop_x_dist is empty");
    for (auto const& [level, px] : spec.pop_x_dist)
    {
        require(px[0] >= 0 && px[1] >= 0 && std::abs(px[0] + px[1] - 1.0) <= 1e-9,
                "two-step: pop_x_dist row for z = " + std::to_string(level)
                    + " must sum to 1");
    }

    std::map<double, std::size_t> level_index;
    for (auto const& [level, px] : spec.pop_x_dist)
        level_index.emplace(level, level_index.size());
    auto const L = level_index.size();
    std::vector<double> sum(2 * L, 0.0);
    std::vector<std::size_t> count(2 * L, 0);

    auto zc = static_cast<Eigen::Index>(spec.z_col);
    auto xc = static_cast<Eigen::Index>(spec.x_col);
    for (Eigen::Index i = 0; i < s.y.size(); ++i)
    {
        double x = s.z(i, xc);
        require(x == 0.0 || x == 1.0, "two-step: x must be binary");
        auto it = level_index.find(s.z(i, zc));
        require(it != level_index.end(),
                "two-step: sample z level missing from pop_x_dist");
        auto cell = 2 * it->second + static_cast<std::size_t>(x);
        sum[cell] += s.y[i];
        ++count[cell];
    }

    EstimatorResult r;
    r.name = "two_step";
    r.n_used = s.size();
    for (auto const& [level, px] : spec.pop_x_dist)
    {
        auto l = level_index.at(level);
        double v = 0;
        for (std::size_t x = 0; x < 2; ++x)
        {
            if (px[x] == 0)
                continue;
            auto cell = 2 * l + x;
            if (count[cell] == 0)
                fail(ErrorKind::empty_cell,
                     "two-step: no sample in cell (z = " + std::to_string(level)
                         + ", x = " + std::to_string(x) + ")",
                     cell);
            v += px[x] * sum[cell] / static_cast<double>(count[cell]);
        }
        char buf[40];
        std::snprintf(buf, sizeof buf, "z=%.17g", level);
        r.components.push_back(buf);
        r.value.push_back(v);
    }
    if (L == 2)
    {
        r.components.push_back("contrast");
        r.value.push_back(r.value[1] - r.value[0]);
    }
    r.diagnostics["weight_cv"] = weight_cv(s.w);
    return r;
}

}  // namespace infsamp

#endif  // INFSAMP_ESTIMATORS_HPP
