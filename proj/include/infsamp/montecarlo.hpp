// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/montecarlo.hpp
//! Replicated design experiments with bias / variance / MSE summaries.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_MONTECARLO_HPP
#define INFSAMP_MONTECARLO_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "error.hpp"
#include "esw.hpp"
#include "estimators.hpp"
#include "linalg.hpp"
#include "population.hpp"
#include "rng.hpp"
#include "sample_model.hpp"

namespace infsamp
{

//---------------------------------------------------------------------------//
struct Summary
{
    double mean = 0;
    double bias = 0;
    double variance = 0;  //!< denominator R - 1; zero when R = 1
    double mse = 0;       //!< mean squared error, denominator R
    double mcse = 0;      //!< sqrt(variance / R)
};

/*!
 * Moments of estimate - truth across replications. With a single truth this
 * is the usual bias / variance / MSE of the estimates.
 */
inline Summary summarize(std::span<double const> estimates, std::span<double const> truths)
{
    require(!estimates.empty(), "summarize needs at least one estimate");
    require(truths.size() == estimates.size(), "one truth per estimate");
    auto const r = static_cast<double>(estimates.size());
    Summary out;
    double err_sum = 0;
    for (std::size_t k = 0; k < estimates.size(); ++k)
    {
        out.mean += estimates[k];
        err_sum += estimates[k] - truths[k];
    }
    out.mean /= r;
    out.bias = err_sum / r;
    double ss = 0;
    for (std::size_t k = 0; k < estimates.size(); ++k)
    {
        double e = estimates[k] - truths[k];
        ss += (e - out.bias) * (e - out.bias);
        out.mse += e * e;
    }
    out.mse /= r;
    out.variance = estimates.size() > 1 ? ss / (r - 1) : 0.0;
    out.mcse = std::sqrt(out.variance / r);
    return out;
}

inline Summary summarize(std::span<double const> estimates, double truth)
{
    std::vector<double> t(estimates.size(), truth);
    return summarize(estimates, std::span<double const>(t));
}

//---------------------------------------------------------------------------//
struct EstimatorSpec
{
    std::string name;
    EswForm esw_form = EswForm::log_linear;
    ZFit z_fit = ZFit::automatic;
    bool drop_empty_cells = false;
    ColumnSelection columns;
};

inline std::vector<std::string> const& known_estimators()
{
    static std::vector<std::string> const names{
        "sample_mean", "hajek", "poststratified", "domain_difference",
        "ols",         "bw",    "bq",             "two_step",
        "predict_total", "predict_total_modeled"};
    return names;
}

struct TwoStepColumns
{
    std::size_t z_col = 0;
    std::size_t x_col = 1;
};

struct ExperimentConfig
{
    PopulationModel population;
    std::size_t population_size = 0;
    //! Draw a fresh population each replication instead of one fixed one.
    bool regenerate_population = false;
    InclusionModel design;
    //! Select every unit (pi = 1); the response stage still applies.
    bool census = false;
    WeightMode weight_mode = WeightMode::true_combined;
    std::vector<EstimatorSpec> estimators;
    std::size_t replications = 1;
    std::uint64_t seed = 0;
    //! Binary z column defining the domains for domain_difference.
    std::optional<std::size_t> domain_column;
    std::optional<TwoStepColumns> two_step;
    //! 0 reads INFSAMP_THREADS, falling back to hardware concurrency.
    unsigned threads = 0;

    void validate() const
    {
        require(replications >= 1, "replications must be >= 1");
        require(!estimators.empty(), "estimator list is empty");
        require(population_size >= 1, "population size must be >= 1");
        population.validate();
        auto const& known = known_estimators();
        for (auto const& e : estimators)
            require(std::find(known.begin(), known.end(), e.name) != known.end(),
                    "unknown estimator '" + e.name + "'");
        auto p = population.num_columns();
        if (domain_column)
            require(*domain_column < p, "domain_column out of range");
        if (two_step)
            require(two_step->z_col < p && two_step->x_col < p
                        && two_step->z_col != two_step->x_col,
                    "two_step columns out of range");
    }
};

//---------------------------------------------------------------------------//
struct ReplicationRecord
{
    std::size_t replication = 0;
    std::string estimator;
    std::string component;
    double estimate = std::numeric_limits<double>::quiet_NaN();
    double truth = std::numeric_limits<double>::quiet_NaN();
    std::string error;  //!< empty on success, else the error kind
};

struct SummaryRow
{
    std::string estimator;
    std::string component;
    double truth = 0;  //!< mean truth over successful replications
    Summary stats;
    std::size_t failures = 0;
    std::size_t successes = 0;
};

struct SimulationReport
{
    ExperimentConfig config;
    std::vector<ReplicationRecord> records;
    std::vector<SummaryRow> summary;

    SummaryRow const& row(std::string const& est, std::string const& comp) const
    {
        for (auto const& r : summary)
            if (r.estimator == est && r.component == comp)
                return r;
        fail(ErrorKind::invalid_argument, "no summary row " + est + "/" + comp);
    }
};

//---------------------------------------------------------------------------//
//! Finite-population targets for every estimator of an experiment.
struct PopulationTruth
{
    double mean = 0;
    double total = 0;
    std::optional<double> domain_difference;
    std::map<std::string, std::vector<double>> regression;  //!< keyed by estimator
    std::map<double, double> level_means;  //!< by two-step z level
    std::map<double, std::array<double, 2>> pop_x_dist;
    std::map<LevelKey, double> level_counts;
};

namespace detail
{
inline std::string columns_key(ColumnSelection const& c)
{
    if (!c)
        return "all";
    std::string s;
    for (auto k : *c)
        s += std::to_string(k) + ",";
    return s;
}

inline std::pair<double, double> binary_domain_means(Eigen::VectorXd const& y,
                                                     Eigen::VectorXd const& d)
{
    double sum[2] = {0, 0}, n[2] = {0, 0};
    for (Eigen::Index i = 0; i < y.size(); ++i)
    {
        int k = d[i] == 1.0 ? 1 : 0;
        sum[k] += y[i];
        n[k] += 1;
    }
    return {sum[0] / n[0], sum[1] / n[1]};
}
}  // namespace detail

inline PopulationTruth compute_truth(Population const& pop, ExperimentConfig const& cfg)
{
    PopulationTruth t;
    t.total = pop.y.sum();
    t.mean = t.total / static_cast<double>(pop.size());
    if (cfg.domain_column)
    {
        auto [m0, m1] = detail::binary_domain_means(
            pop.y, pop.z.col(static_cast<Eigen::Index>(*cfg.domain_column)));
        t.domain_difference = m1 - m0;
    }
    for (auto const& e : cfg.estimators)
    {
        if (e.name != "ols" && e.name != "bw" && e.name != "bq")
            continue;
        auto key = detail::columns_key(e.columns);
        if (t.regression.count(key))
            continue;
        try
        {
            Eigen::VectorXd b = least_squares(design_matrix(pop.z, e.columns), pop.y);
            t.regression[key].assign(b.data(), b.data() + b.size());
        }
        catch (Error const&)
        {
            // Left absent; those estimators then report no truth.
        }
    }
    if (cfg.two_step)
    {
        auto zc = static_cast<Eigen::Index>(cfg.two_step->z_col);
        auto xc = static_cast<Eigen::Index>(cfg.two_step->x_col);
        std::map<double, std::array<double, 3>> acc;  // n(x=0), n(x=1), sum y
        for (Eigen::Index i = 0; i < pop.y.size(); ++i)
        {
            auto& a = acc[pop.z(i, zc)];
            a[pop.z(i, xc) == 1.0 ? 1 : 0] += 1;
            a[2] += pop.y[i];
        }
        for (auto const& [level, a] : acc)
        {
            double n = a[0] + a[1];
            t.pop_x_dist[level] = {a[0] / n, a[1] / n};
            t.level_means[level] = a[2] / n;
        }
    }
    for (Eigen::Index i = 0; i < pop.z.rows(); ++i)
        t.level_counts[level_key(pop.z.row(i))] += 1;
    return t;
}

//---------------------------------------------------------------------------//
//! One estimator evaluated on one sample, with its truth per component.
struct Evaluation
{
    EstimatorResult result;
    std::vector<double> truth;
};

inline Evaluation evaluate_estimator(EstimatorSpec const& spec,
                                     Sample const& s,
                                     PopulationTruth const& truth,
                                     ExperimentConfig const& cfg,
                                     Population const& pop)
{
    Evaluation ev;
    auto scalar_truth = [&](double v) { ev.truth = {v}; };
    auto const& n = spec.name;
    if (n == "sample_mean")
    {
        ev.result = sample_mean(s);
        scalar_truth(truth.mean);
    }
    else if (n == "hajek")
    {
        ev.result = hajek_mean(s);
        scalar_truth(truth.mean);
    }
    else if (n == "poststratified")
    {
        std::vector<double> sizes(pop.cell_sizes.begin(), pop.cell_sizes.end());
        ev.result = poststratified_mean(s, sizes, {spec.drop_empty_cells});
        scalar_truth(truth.mean);
    }
    else if (n == "domain_difference")
    {
        require(cfg.domain_column.has_value(), "domain_difference needs domain_column");
        auto col = static_cast<Eigen::Index>(*cfg.domain_column);
        std::vector<int> d(s.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            d[i] = s.z(static_cast<Eigen::Index>(i), col) == 1.0 ? 1 : 0;
        ev.result = weighted_domain_difference(s, d);
        scalar_truth(*truth.domain_difference);
    }
    else if (n == "ols" || n == "bw" || n == "bq")
    {
        if (n == "ols")
            ev.result = ols_fit(s, spec.columns);
        else if (n == "bw")
            ev.result = weighted_regression_bw(s, spec.columns);
        else
            ev.result = q_weighted_regression_bq(
                s, estimate_esw(s, spec.esw_form, spec.z_fit), spec.columns);
        auto it = truth.regression.find(detail::columns_key(spec.columns));
        if (it != truth.regression.end())
            ev.truth = it->second;
        else
            ev.truth.assign(ev.result.value.size(), std::numeric_limits<double>::quiet_NaN());
    }
    else if (n == "two_step")
    {
        require(cfg.two_step.has_value(), "two_step needs two_step columns");
        ev.result = two_step_regression(
            s, {cfg.two_step->z_col, cfg.two_step->x_col, truth.pop_x_dist});
        for (auto const& [level, m] : truth.level_means)
            ev.truth.push_back(m);
        if (truth.level_means.size() == 2)
            ev.truth.push_back(std::next(truth.level_means.begin())->second
                               - truth.level_means.begin()->second);
    }
    else if (n == "predict_total" || n == "predict_total_modeled")
    {
        std::map<LevelKey, double> counts = truth.level_counts;
        for (Eigen::Index i = 0; i < s.z.rows(); ++i)
            counts[level_key(s.z.row(i))] -= 1;
        if (n == "predict_total")
        {
            ev.result = predict_total(s, counts);
        }
        else
        {
            auto esw = estimate_esw(s, spec.esw_form, spec.z_fit);
            ev.result = predict_total(s, counts, PredictMode::modeled, &esw);
        }
        scalar_truth(truth.total);
    }
    else
    {
        fail(ErrorKind::invalid_argument, "unknown estimator '" + n + "'");
    }
    return ev;
}

//---------------------------------------------------------------------------//
inline unsigned resolve_threads(unsigned requested)
{
    if (requested > 0)
        return requested;
    if (char const* env = std::getenv("INFSAMP_THREADS"))
    {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0)
            return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/*!
 * Run R replications: (optionally) regenerate the population, draw a
 * Poisson sample, apply the response stage, evaluate every estimator
 * against the truth of the realized population.
 *
 * Replication r uses seeds derived from (seed, r) only, and results are
 * reduced in replication order, so reports do not depend on thread count.
 * Estimator errors are counted as failures and excluded from the moments.
 */
inline SimulationReport run_replications(ExperimentConfig const& cfg)
{
    cfg.validate();
    auto const R = cfg.replications;

    std::optional<Population> fixed_pop;
    std::optional<InclusionProbabilities> fixed_probs;
    std::optional<PopulationTruth> fixed_truth;
    auto make_probs = [&](Population const& pop) {
        if (!cfg.census)
            return compute_inclusion_probs(pop, cfg.design);
        InclusionProbabilities p;
        p.selection.assign(pop.size(), 1.0);
        p.response.assign(pop.size(), 1.0);
        if (cfg.design.response)
            for (std::size_t i = 0; i < pop.size(); ++i)
                p.response[i] = cfg.design.response->probability(
                    pop.y[static_cast<Eigen::Index>(i)],
                    pop.z.row(static_cast<Eigen::Index>(i)));
        p.combined = p.response;
        return p;
    };
    if (!cfg.regenerate_population)
    {
        fixed_pop = generate_population(cfg.population, cfg.population_size, cfg.seed);
        fixed_probs = make_probs(*fixed_pop);
        fixed_truth = compute_truth(*fixed_pop, cfg);
    }

    std::vector<std::vector<ReplicationRecord>> per_rep(R);
    auto run_one = [&](std::size_t r) {
        auto rep_seed = derive_seed(cfg.seed, r);
        std::optional<Population> own_pop;
        std::optional<InclusionProbabilities> own_probs;
        std::optional<PopulationTruth> own_truth;
        if (cfg.regenerate_population)
        {
            own_pop = generate_population(cfg.population, cfg.population_size, rep_seed);
            own_probs = make_probs(*own_pop);
            own_truth = compute_truth(*own_pop, cfg);
        }
        auto const& pop = own_pop ? *own_pop : *fixed_pop;
        auto const& probs = own_probs ? *own_probs : *fixed_probs;
        auto const& truth = own_truth ? *own_truth : *fixed_truth;

        Sample s = draw_sample(pop, probs.selection, rep_seed);
        if (cfg.design.response)
            s = apply_response(s, cfg.design, rep_seed, cfg.weight_mode);

        auto& out = per_rep[r];
        for (auto const& spec : cfg.estimators)
        {
            try
            {
                auto ev = evaluate_estimator(spec, s, truth, cfg, pop);
                for (std::size_t k = 0; k < ev.result.value.size(); ++k)
                {
                    double t = k < ev.truth.size()
                                   ? ev.truth[k]
                                   : std::numeric_limits<double>::quiet_NaN();
                    out.push_back({r, spec.name, ev.result.components[k],
                                   ev.result.value[k], t, ""});
                }
            }
            catch (Error const& e)
            {
                out.push_back({r, spec.name, "*", std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN(),
                               to_string(e.kind())});
            }
        }
    };

    unsigned nthreads = std::min<std::size_t>(resolve_threads(cfg.threads), R);
    if (nthreads <= 1)
    {
        for (std::size_t r = 0; r < R; ++r)
            run_one(r);
    }
    else
    {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(nthreads);
        for (unsigned t = 0; t < nthreads; ++t)
        {
            pool.emplace_back([&, t] {
                try
                {
                    for (std::size_t r; (r = next.fetch_add(1)) < R;)
                        run_one(r);
                }
                catch (...)
                {
                    errors[t] = std::current_exception();
                    next = R;
                }
            });
        }
        for (auto& th : pool)
            th.join();
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }

    SimulationReport rep;
    rep.config = cfg;
    for (auto& v : per_rep)
        for (auto& rec : v)
            rep.records.push_back(std::move(rec));

    for (auto const& spec : cfg.estimators)
    {
        std::size_t failures = 0;
        std::vector<std::string> order;
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_comp;
        for (auto const& rec : rep.records)
        {
            if (rec.estimator != spec.name)
                continue;
            if (!rec.error.empty())
            {
                ++failures;
                continue;
            }
            if (!by_comp.count(rec.component))
                order.push_back(rec.component);
            auto& [est, tru] = by_comp[rec.component];
            est.push_back(rec.estimate);
            tru.push_back(rec.truth);
        }
        if (order.empty())
        {
            SummaryRow row;
            row.estimator = spec.name;
            row.component = "*";
            double nan = std::numeric_limits<double>::quiet_NaN();
            row.truth = nan;
            row.stats = {nan, nan, nan, nan, nan};
            row.failures = failures;
            rep.summary.push_back(row);
            continue;
        }
        for (auto const& comp : order)
        {
            auto const& [est, tru] = by_comp[comp];
            SummaryRow row;
            row.estimator = spec.name;
            row.component = comp;
            row.stats = summarize(est, tru);
            double tsum = 0;
            for (double t : tru)
                tsum += t;
            row.truth = tsum / static_cast<double>(tru.size());
            row.failures = failures;
            row.successes = est.size();
            rep.summary.push_back(row);
        }
    }
    return rep;
}

}  // namespace infsamp

#endif  // INFSAMP_MONTECARLO_HPP
