// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/design.hpp
//! Inclusion probabilities, Poisson sampling and a response stage.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_DESIGN_HPP
#define INFSAMP_DESIGN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "population.hpp"
#include "rng.hpp"

namespace infsamp
{

//! Logistic response propensity 1/(1+exp(-(b0 + b_y y + b_z'z))).
struct ResponseModel
{
    double b0 = 0;
    double b_y = 0;
    std::vector<double> b_z;  //!< empty means all zero

    template<class Row>
    double probability(double y, Row const& z) const
    {
        double eta = b0 + b_y * y;
        for (std::size_t k = 0; k < b_z.size(); ++k)
            eta += b_z[k] * z[static_cast<Eigen::Index>(k)];
        return 1.0 / (1.0 + std::exp(-eta));
    }
};

/*!
 * Selection score exp(a0 + a_y y + a_z'z), rescaled so that the expected
 * number of respondents equals target_n, capped at one, then multiplied by
 * the response propensity when a response model is present.
 *
 * a_y != 0 makes selection informative; b_y != 0 makes nonresponse NMAR.
 */
struct InclusionModel
{
    double a0 = 0;
    double a_y = 0;
    std::vector<double> a_z;  //!< empty means all zero
    std::optional<ResponseModel> response;
    double target_n = 0;

    template<class Row>
    double score(double y, Row const& z) const
    {
        double s = a0 + a_y * y;
        for (std::size_t k = 0; k < a_z.size(); ++k)
            s += a_z[k] * z[static_cast<Eigen::Index>(k)];
        return s;
    }
};

//! Which probability the analyst's weights invert.
enum class WeightMode
{
    true_combined,   //!< 1/(pi_selection * pi_response)
    selection_only,  //!< 1/pi_selection, ignoring nonresponse
};

inline char const* to_string(WeightMode m)
{
    return m == WeightMode::true_combined ? "true" : "selection-only";
}

//---------------------------------------------------------------------------//
//! Per-unit probabilities; combined[i] = selection[i] * response[i].
struct InclusionProbabilities
{
    std::vector<double> selection;
    std::vector<double> response;
    std::vector<double> combined;
};

/*!
 * Solve for the scale c such that sum_i min(1, c e^{score_i}) r_i = target_n.
 *
 * The left side is continuous and nondecreasing in c, so bisection on log c
 * between the uncapped solution (a lower bound) and the all-capped point
 * converges. Scores are shifted by their maximum before exponentiating.
 */
inline InclusionProbabilities
compute_inclusion_probs(Population const& pop, InclusionModel const& model)
{
    auto const n = pop.size();
    require(model.target_n > 0, "target_n must be positive");
    if (!(model.target_n < static_cast<double>(n)))
        fail(ErrorKind::invalid_argument,
             "target_n must be smaller than the population size");
    require(model.a_z.size() <= static_cast<std::size_t>(pop.z.cols()),
            "a_z longer than the number of covariate columns");
    if (model.response)
        require(model.response->b_z.size() <= static_cast<std::size_t>(pop.z.cols()),
                "b_z longer than the number of covariate columns");

    InclusionProbabilities out;
    out.response.assign(n, 1.0);
    std::vector<double> score(n);
    double smax = -std::numeric_limits<double>::infinity();
    double smin = std::numeric_limits<double>::infinity();
    double resp_total = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        auto row = pop.z.row(static_cast<Eigen::Index>(i));
        score[i] = model.score(pop.y[i], row);
        require(std::isfinite(score[i]), "selection score is not finite");
        smax = std::max(smax, score[i]);
        smin = std::min(smin, score[i]);
        if (model.response)
            out.response[i] = model.response->probability(pop.y[i], row);
        resp_total += out.response[i];
    }
    require(model.target_n < resp_total,
            "target_n exceeds the expected respondents of a census");

    auto expected = [&](double log_c) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i)
            total += std::min(1.0, std::exp(log_c + score[i] - smax)) * out.response[i];
        return total;
    };

    double uncapped = 0;
    for (std::size_t i = 0; i < n; ++i)
        uncapped += std::exp(score[i] - smax) * out.response[i];
    double lo = std::log(model.target_n) - std::log(uncapped);
    double hi = smax - smin;
    if (hi < lo)
        hi = lo;
    for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++iter)
    {
        double mid = 0.5 * (lo + hi);
        (expected(mid) < model.target_n ? lo : hi) = mid;
    }
    double log_c = std::abs(expected(lo) - model.target_n)
                           <= std::abs(expected(hi) - model.target_n)
                       ? lo
                       : hi;

    out.selection.resize(n);
    out.combined.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        out.selection[i] = std::min(1.0, std::exp(log_c + score[i] - smax));
        out.combined[i] = out.selection[i] * out.response[i];
        if (!(out.combined[i] > 0))
            fail(ErrorKind::invalid_argument,
                 "inclusion probability underflows to zero for unit "
                     + std::to_string(i),
                 i);
    }
    return out;
}

//---------------------------------------------------------------------------//
//! Observed units. All weights are >= 1 and unit_ids strictly increase.
struct Sample
{
    std::vector<std::size_t> unit_ids;
    Eigen::VectorXd y;
    Eigen::MatrixXd z;
    std::vector<std::size_t> cell_id;
    Eigen::VectorXd w;
    WeightMode weight_mode = WeightMode::true_combined;
    bool response_applied = false;

    std::size_t size() const { return static_cast<std::size_t>(y.size()); }
    Eigen::Index cols() const { return z.cols(); }

    void validate() const
    {
        auto n = size();
        require(static_cast<std::size_t>(w.size()) == n
                    && static_cast<std::size_t>(z.rows()) == n
                    && unit_ids.size() == n
                    && (cell_id.empty() || cell_id.size() == n),
                "sample field lengths disagree");
        for (std::size_t i = 0; i < n; ++i)
        {
            require(w[static_cast<Eigen::Index>(i)] >= 1.0,
                    "sample weights must be >= 1");
            require(i == 0 || unit_ids[i] > unit_ids[i - 1],
                    "unit_ids must be strictly increasing");
        }
    }

    //! Subset preserving order.
    Sample subset(std::vector<std::size_t> const& rows) const
    {
        Sample s;
        auto m = static_cast<Eigen::Index>(rows.size());
        s.y.resize(m);
        s.w.resize(m);
        s.z.resize(m, z.cols());
        for (Eigen::Index r = 0; r < m; ++r)
        {
            auto i = rows[static_cast<std::size_t>(r)];
            auto ii = static_cast<Eigen::Index>(i);
            s.unit_ids.push_back(unit_ids[i]);
            s.y[r] = y[ii];
            s.w[r] = w[ii];
            s.z.row(r) = z.row(ii);
            if (!cell_id.empty())
                s.cell_id.push_back(cell_id[i]);
        }
        s.weight_mode = weight_mode;
        s.response_applied = response_applied;
        return s;
    }
};

/*!
 * Poisson sampling: unit i enters independently with probability pi[i] and
 * gets weight 1/pi[i]. Every unit consumes exactly one uniform draw.
 */
inline Sample
draw_sample(Population const& pop, std::span<double const> pi, std::uint64_t seed)
{
    require(pi.size() == pop.size(), "pi length must equal population size");
    for (double p : pi)
        require(p > 0 && p <= 1, "inclusion probabilities must lie in (0, 1]");

    Engine eng = make_engine(seed, StreamTag::selection);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < pop.size(); ++i)
    {
        if (uniform01(eng) < pi[i])
            rows.push_back(i);
    }

    Sample s;
    auto m = static_cast<Eigen::Index>(rows.size());
    s.unit_ids = rows;
    s.y.resize(m);
    s.w.resize(m);
    s.z.resize(m, pop.z.cols());
    s.cell_id.resize(rows.size());
    for (Eigen::Index r = 0; r < m; ++r)
    {
        auto i = rows[static_cast<std::size_t>(r)];
        auto ii = static_cast<Eigen::Index>(i);
        s.y[r] = pop.y[ii];
        s.z.row(r) = pop.z.row(ii);
        s.cell_id[static_cast<std::size_t>(r)] = pop.cell_id[i];
        s.w[r] = 1.0 / pi[i];
    }
    return s;
}

/*!
 * Keep each selected unit independently with its response propensity.
 *
 * In true_combined mode weights become 1/(pi_sel * pi_resp); in
 * selection_only mode they stay at 1/pi_sel, which is what an analyst who
 * ignores nonresponse would use.
 */
inline Sample apply_response(Sample const& sample,
                             InclusionModel const& model,
                             std::uint64_t seed,
                             WeightMode mode)
{
    if (!model.response)
        fail(ErrorKind::invalid_state, "no response model configured");
    if (sample.response_applied)
        fail(ErrorKind::invalid_state, "response already applied to sample");

    Engine eng = make_engine(seed, StreamTag::response);
    std::vector<std::size_t> keep;
    std::vector<double> prob;
    for (std::size_t i = 0; i < sample.size(); ++i)
    {
        auto ii = static_cast<Eigen::Index>(i);
        double r = model.response->probability(sample.y[ii], sample.z.row(ii));
        if (uniform01(eng) < r)
        {
            keep.push_back(i);
            prob.push_back(r);
        }
    }
    Sample out = sample.subset(keep);
    if (mode == WeightMode::true_combined)
    {
        for (std::size_t k = 0; k < keep.size(); ++k)
            out.w[static_cast<Eigen::Index>(k)] /= prob[k];
    }
    out.weight_mode = mode;
    out.response_applied = true;
    return out;
}

}  // namespace infsamp

#endif  // INFSAMP_DESIGN_HPP
