// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/sample_model.hpp
//! Exact discrete-support sample, population and sample-complement
//! distributions, the finite-population total predictor and the full
//! likelihood of sample data plus membership indicators.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_SAMPLE_MODEL_HPP
#define INFSAMP_SAMPLE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "error.hpp"
#include "esw.hpp"
#include "estimators.hpp"

namespace infsamp
{

inline constexpr std::size_t max_support = 64;

//---------------------------------------------------------------------------//
/*!
 * Probability table over a finite (y, z) grid.
 *
 * Rows of `p` index y_support, columns index z_support. Conditionals
 * f(y | z) are the column-normalized table.
 */
struct DiscreteJointDist
{
    std::vector<double> y_support;
    std::vector<LevelKey> z_support;
    Eigen::MatrixXd p;

    Eigen::Index ny() const { return p.rows(); }
    Eigen::Index nz() const { return p.cols(); }

    void validate(double tol = 1e-12) const
    {
        require(!y_support.empty() && !z_support.empty(),
                "supports must be nonempty");
        require(y_support.size() <= max_support && z_support.size() <= max_support,
                "supports are limited to 64 points each");
        require(p.rows() == static_cast<Eigen::Index>(y_support.size())
                    && p.cols() == static_cast<Eigen::Index>(z_support.size()),
                "probability table shape does not match supports");
        require((p.array() >= 0).all() && p.allFinite(),
                "probabilities must be finite and nonnegative");
        require(std::abs(p.sum() - 1.0) <= tol, "probabilities must sum to 1");
    }

    Eigen::VectorXd z_marginal() const { return p.colwise().sum().transpose(); }

    //! f(y | z); columns with zero z-mass are left at zero.
    Eigen::MatrixXd conditional() const
    {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ny(), nz());
        for (Eigen::Index j = 0; j < nz(); ++j)
        {
            double m = p.col(j).sum();
            if (m > 0)
                c.col(j) = p.col(j) / m;
        }
        return c;
    }

    //! Same supports, new table.
    DiscreteJointDist with_table(Eigen::MatrixXd table) const
    {
        return {y_support, z_support, std::move(table)};
    }
};

//! pi(y, z) = Pr(i in s | y, z) on the grid of a DiscreteJointDist.
struct PiFunction
{
    Eigen::MatrixXd pi;

    void validate(DiscreteJointDist const& d) const
    {
        require(pi.rows() == d.ny() && pi.cols() == d.nz(),
                "pi table shape does not match the distribution");
        require((pi.array() > 0).all() && (pi.array() <= 1).all(),
                "pi values must lie in (0, 1]");
    }
};

namespace detail
{
//! Joint table from conditional columns and unnormalized z masses.
inline Eigen::MatrixXd assemble(Eigen::MatrixXd const& cond, Eigen::VectorXd zmass)
{
    double total = zmass.sum();
    Eigen::MatrixXd joint = cond;
    for (Eigen::Index j = 0; j < cond.cols(); ++j)
        joint.col(j) *= zmass[j] / total;
    return joint;
}
}  // namespace detail

//---------------------------------------------------------------------------//
//! Pr(i in s | z) = sum_y pi(y, z) f_p(y | z); zero where f_p(z) = 0.
inline Eigen::VectorXd inclusion_given_z(DiscreteJointDist const& fp, PiFunction const& pi)
{
    Eigen::MatrixXd c = fp.conditional();
    return (pi.pi.array() * c.array()).colwise().sum().transpose();
}

/*!
 * Sample distribution f_s(y, z).
 *
 * f_s(y | z) = pi(y, z) f_p(y | z) / Pr(s | z), and the z-marginal is
 * reweighted by Pr(s | z).
 */
inline DiscreteJointDist exact_sample_pdf(DiscreteJointDist const& fp, PiFunction const& pi)
{
    fp.validate();
    pi.validate(fp);
    Eigen::MatrixXd cond = fp.conditional();
    Eigen::VectorXd fz = fp.z_marginal();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(fp.ny(), fp.nz());
    Eigen::VectorXd zmass = Eigen::VectorXd::Zero(fp.nz());
    for (Eigen::Index j = 0; j < fp.nz(); ++j)
    {
        if (fz[j] == 0)
            continue;
        double incl = pi.pi.col(j).dot(cond.col(j));
        if (!(incl > 0))
            fail(ErrorKind::degenerate_design,
                 "Pr(i in s | z) = 0 at z index " + std::to_string(j),
                 static_cast<std::size_t>(j));
        out.col(j) = pi.pi.col(j).cwiseProduct(cond.col(j)) / incl;
        zmass[j] = incl * fz[j];
    }
    return fp.with_table(detail::assemble(out, zmass));
}

/*!
 * Population distribution from the sample distribution and exact weights
 * w = 1/pi:
 *   f_p(y | z) = E_s(w | y, z) f_s(y | z) / E_s(w | z),
 * with f_p(z) proportional to E_s(w | z) f_s(z).
 */
inline DiscreteJointDist
recover_population_pdf(DiscreteJointDist const& fs, PiFunction const& pi)
{
    fs.validate();
    pi.validate(fs);
    Eigen::MatrixXd cond = fs.conditional();
    Eigen::VectorXd fz = fs.z_marginal();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(fs.ny(), fs.nz());
    Eigen::VectorXd zmass = Eigen::VectorXd::Zero(fs.nz());
    for (Eigen::Index j = 0; j < fs.nz(); ++j)
    {
        if (fz[j] == 0)
            continue;
        Eigen::VectorXd w_yz = pi.pi.col(j).cwiseInverse();
        double w_z = w_yz.dot(cond.col(j));
        if (!std::isfinite(w_z) || !(w_z > 0))
            fail(ErrorKind::unrecoverable_support,
                 "E_s(w | z) is not finite at z index " + std::to_string(j),
                 static_cast<std::size_t>(j));
        out.col(j) = w_yz.cwiseProduct(cond.col(j)) / w_z;
        zmass[j] = w_z * fz[j];
    }
    return fs.with_table(detail::assemble(out, zmass));
}

//---------------------------------------------------------------------------//
//! Sample-complement distribution computed two independent ways.
struct ComplementPdf
{
    //! Pr(i not in s | y, z) f_p(y | z) / Pr(i not in s | z).
    DiscreteJointDist definition;
    //! E_s[(w - 1) | y, z] f_s(y | z) / E_s[(w - 1) | z], from f_s alone.
    DiscreteJointDist moment;
};

inline ComplementPdf exact_complement_pdf(DiscreteJointDist const& fp, PiFunction const& pi)
{
    fp.validate();
    pi.validate(fp);
    Eigen::MatrixXd cond = fp.conditional();
    Eigen::VectorXd fz = fp.z_marginal();

    Eigen::MatrixXd def = Eigen::MatrixXd::Zero(fp.ny(), fp.nz());
    Eigen::VectorXd def_mass = Eigen::VectorXd::Zero(fp.nz());
    for (Eigen::Index j = 0; j < fp.nz(); ++j)
    {
        if (fz[j] == 0)
            continue;
        Eigen::VectorXd out_yz = (1.0 - pi.pi.col(j).array()).matrix();
        double out_z = out_yz.dot(cond.col(j));
        if (!(out_z > 0))
            fail(ErrorKind::empty_complement,
                 "pi = 1 on the support of z index " + std::to_string(j),
                 static_cast<std::size_t>(j));
        def.col(j) = out_yz.cwiseProduct(cond.col(j)) / out_z;
        def_mass[j] = out_z * fz[j];
    }

    DiscreteJointDist fs = exact_sample_pdf(fp, pi);
    Eigen::MatrixXd scond = fs.conditional();
    Eigen::VectorXd sz = fs.z_marginal();
    Eigen::MatrixXd mom = Eigen::MatrixXd::Zero(fp.ny(), fp.nz());
    Eigen::VectorXd mom_mass = Eigen::VectorXd::Zero(fp.nz());
    for (Eigen::Index j = 0; j < fp.nz(); ++j)
    {
        if (sz[j] == 0)
            continue;
        Eigen::VectorXd wm1 = (pi.pi.col(j).array().inverse() - 1.0).matrix();
        double wm1_z = wm1.dot(scond.col(j));
        if (!(wm1_z > 0))
            fail(ErrorKind::empty_complement,
                 "E_s[(w - 1) | z] = 0 at z index " + std::to_string(j),
                 static_cast<std::size_t>(j));
        mom.col(j) = wm1.cwiseProduct(scond.col(j)) / wm1_z;
        mom_mass[j] = wm1_z * sz[j];
    }
    return {fp.with_table(detail::assemble(def, def_mass)),
            fp.with_table(detail::assemble(mom, mom_mass))};
}

//---------------------------------------------------------------------------//
/*!
 * True iff max |pi(y, z) - Pr(s | z)| <= tol over all y and every z with
 * positive population mass.
 */
inline bool
ignorability_check(DiscreteJointDist const& fp, PiFunction const& pi, double tol)
{
    fp.validate();
    pi.validate(fp);
    Eigen::VectorXd fz = fp.z_marginal();
    Eigen::VectorXd incl = inclusion_given_z(fp, pi);
    for (Eigen::Index j = 0; j < fp.nz(); ++j)
    {
        if (fz[j] == 0)
            continue;
        for (Eigen::Index i = 0; i < fp.ny(); ++i)
        {
            if (std::abs(pi.pi(i, j) - incl[j]) > tol)
                return false;
        }
    }
    return true;
}

//---------------------------------------------------------------------------//
//! Max absolute residuals of the exact identities for one (f_p, pi) instance.
struct IdentityReport
{
    double sample_normalization = 0;  //!< |sum f_s - 1|
    double roundtrip = 0;             //!< max |recover(f_s) - f_p|
    std::optional<double> dual_form;  //!< max |definition - moment| for f_c
    std::optional<double> mixture;    //!< max |Pr(s|z) f_s + Pr(not s|z) f_c - f_p|
    std::optional<std::string> complement_error;
    bool ignorable = false;
    //! When ignorable: max |f_s(y|z) - f_p(y|z)|, |f_c(y|z) - f_p(y|z)|.
    std::optional<double> fixed_point;

    DiscreteJointDist fs;
    std::optional<DiscreteJointDist> fc;

    double max_residual() const
    {
        double m = std::max(sample_normalization, roundtrip);
        for (auto const& v : {dual_form, mixture, fixed_point})
            if (v)
                m = std::max(m, *v);
        return m;
    }
};

inline IdentityReport identity_residuals(DiscreteJointDist const& fp,
                                         PiFunction const& pi,
                                         double ignorability_tol = 1e-12)
{
    IdentityReport rep;
    rep.fs = exact_sample_pdf(fp, pi);
    rep.sample_normalization = std::abs(rep.fs.p.sum() - 1.0);
    rep.roundtrip = (recover_population_pdf(rep.fs, pi).p - fp.p).cwiseAbs().maxCoeff();
    rep.ignorable = ignorability_check(fp, pi, ignorability_tol);

    Eigen::MatrixXd pcond = fp.conditional();
    Eigen::MatrixXd scond = rep.fs.conditional();
    Eigen::VectorXd fz = fp.z_marginal();
    Eigen::VectorXd incl = inclusion_given_z(fp, pi);

    std::optional<Eigen::MatrixXd> ccond;
    try
    {
        auto comp = exact_complement_pdf(fp, pi);
        rep.dual_form = (comp.definition.p - comp.moment.p).cwiseAbs().maxCoeff();
        ccond = comp.definition.conditional();
        rep.fc = comp.definition;
        double mix = 0;
        for (Eigen::Index j = 0; j < fp.nz(); ++j)
        {
            if (fz[j] == 0)
                continue;
            for (Eigen::Index i = 0; i < fp.ny(); ++i)
            {
                double lhs = incl[j] * scond(i, j) + (1 - incl[j]) * (*ccond)(i, j);
                mix = std::max(mix, std::abs(lhs - pcond(i, j)));
            }
        }
        rep.mixture = mix;
    }
    catch (Error const& e)
    {
        rep.complement_error = e.what();
    }

    if (rep.ignorable)
    {
        double fpt = (scond - pcond).cwiseAbs().maxCoeff();
        if (ccond)
            fpt = std::max(fpt, (*ccond - pcond).cwiseAbs().maxCoeff());
        rep.fixed_point = fpt;
    }
    return rep;
}

//---------------------------------------------------------------------------//
enum class PredictMode
{
    moments,  //!< raw weights: within-level sample means of (w-1)y and (w-1)
    modeled,  //!< weights replaced by the fitted E_s(w | y, z)
};

/*!
 * Predictor of the population total
 *   sum_{i in s} y_i + sum_{j not in s} E_s[(w-1) y | z_j] / E_s[(w-1) | z_j]
 * for discrete z. `nonsample_counts` maps each z level to the number of
 * nonsampled units at that level; levels with zero count are skipped.
 */
inline EstimatorResult predict_total(Sample const& s,
                                     std::map<LevelKey, double> const& nonsample_counts,
                                     PredictMode mode = PredictMode::moments,
                                     EswModel const* esw = nullptr)
{
    require(mode == PredictMode::moments || esw != nullptr,
            "modeled prediction needs an EswModel");
    struct Moments
    {
        double wm1_y = 0;
        double wm1 = 0;
    };
    std::map<LevelKey, Moments> levels;
    double sample_sum = 0;
    for (Eigen::Index i = 0; i < s.y.size(); ++i)
    {
        auto row = s.z.row(i);
        double w = mode == PredictMode::moments ? s.w[i] : esw->predict(s.y[i], row);
        auto& m = levels[level_key(row)];
        m.wm1_y += (w - 1) * s.y[i];
        m.wm1 += w - 1;
        sample_sum += s.y[i];
    }

    double predicted = 0;
    std::size_t idx = 0;
    for (auto const& [key, count] : nonsample_counts)
    {
        require(count >= 0, "nonsample counts must be nonnegative");
        if (count == 0)
        {
            ++idx;
            continue;
        }
        auto it = levels.find(key);
        if (it == levels.end())
            fail(ErrorKind::unsupported_level,
                 "nonsampled z level " + to_string(key) + " absent from sample",
                 idx);
        if (!(it->second.wm1 > 0))
            fail(ErrorKind::degenerate_weights,
                 "sum of (w - 1) is not positive at z level " + to_string(key),
                 idx);
        predicted += count * it->second.wm1_y / it->second.wm1;
        ++idx;
    }

    EstimatorResult r;
    r.name = mode == PredictMode::moments ? "predict_total" : "predict_total_modeled";
    r.components = {"value"};
    r.value = {sample_sum + predicted};
    r.n_used = s.size();
    r.diagnostics["sample_sum"] = sample_sum;
    r.diagnostics["predicted_nonsample"] = predicted;
    r.diagnostics["weight_cv"] = weight_cv(s.w);
    return r;
}

//---------------------------------------------------------------------------//
struct LogLikelihood
{
    double value = 0;
    //! Population unit whose factor is zero, when value is -infinity.
    std::optional<std::size_t> offending_unit;
};

/*!
 * Full log-likelihood of the sample outcomes and membership indicators:
 *
 *   sum_{i in s}     log pi(y_i, z_i) + log f_p(y_i | z_i)
 * + sum_{j not in s} log(1 - sum_y pi(y, z_j) f_p(y | z_j)).
 *
 * `z_all[j]` is the covariate level of population unit j; sample units are
 * located through Sample::unit_ids. Every y and z must lie on the grid.
 */
inline LogLikelihood full_log_likelihood(DiscreteJointDist const& fp,
                                         PiFunction const& pi,
                                         Sample const& s,
                                         std::vector<LevelKey> const& z_all)
{
    fp.validate();
    pi.validate(fp);
    auto z_index = [&](LevelKey const& key) {
        auto it = std::find(fp.z_support.begin(), fp.z_support.end(), key);
        require(it != fp.z_support.end(), "z level " + to_string(key) + " off the grid");
        return static_cast<Eigen::Index>(it - fp.z_support.begin());
    };
    auto y_index = [&](double y) {
        auto it = std::find(fp.y_support.begin(), fp.y_support.end(), y);
        require(it != fp.y_support.end(), "y value off the grid");
        return static_cast<Eigen::Index>(it - fp.y_support.begin());
    };

    Eigen::MatrixXd cond = fp.conditional();
    Eigen::VectorXd incl = inclusion_given_z(fp, pi);
    std::vector<char> in_sample(z_all.size(), 0);
    for (auto u : s.unit_ids)
    {
        require(u < z_all.size(), "sample unit id outside the population");
        in_sample[u] = 1;
    }

    LogLikelihood ll;
    auto add = [&](double factor, std::size_t unit) {
        if (!(factor > 0))
        {
            ll.value = -std::numeric_limits<double>::infinity();
            ll.offending_unit = unit;
            return false;
        }
        ll.value += std::log(factor);
        return true;
    };

    for (std::size_t k = 0; k < s.size(); ++k)
    {
        auto kk = static_cast<Eigen::Index>(k);
        auto unit = s.unit_ids[k];
        Eigen::Index zj = z_index(level_key(s.z.row(kk)));
        require(zj == z_index(z_all[unit]), "sample z disagrees with z_all");
        Eigen::Index yi = y_index(s.y[kk]);
        if (!add(pi.pi(yi, zj), unit) || !add(cond(yi, zj), unit))
            return ll;
    }
    for (std::size_t j = 0; j < z_all.size(); ++j)
    {
        if (in_sample[j])
            continue;
        if (!add(1.0 - incl[z_index(z_all[j])], j))
            return ll;
    }
    return ll;
}

}  // namespace infsamp

#endif  // INFSAMP_SAMPLE_MODEL_HPP
