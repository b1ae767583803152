// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/population.hpp
//! Synthetic finite populations from a linear superpopulation model.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_POPULATION_HPP
#define INFSAMP_POPULATION_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"

namespace infsamp
{

//---------------------------------------------------------------------------//
/*!
 * Generator for one covariate.
 *
 * A discrete covariate with K categories contributes K-1 one-hot columns to
 * the design; category 0 is the reference level. A binary covariate is thus a
 * single 0/1 column.
 */
struct CovariateSpec
{
    enum class Kind
    {
        normal,
        discrete
    };

    Kind kind = Kind::normal;
    std::vector<double> probs;  //!< category probabilities (discrete only)

    static CovariateSpec standard_normal() { return {}; }
    static CovariateSpec discrete(std::vector<double> p)
    {
        return {Kind::discrete, std::move(p)};
    }

    std::size_t num_categories() const
    {
        return kind == Kind::discrete ? probs.size() : 0;
    }
    std::size_t num_columns() const
    {
        return kind == Kind::discrete ? probs.size() - 1 : 1;
    }
};

//---------------------------------------------------------------------------//
//! y = beta_0 + z'beta_slopes + eps, eps ~ N(0, sigma_eps^2).
struct PopulationModel
{
    std::vector<double> beta;  //!< intercept first
    double sigma_eps = 1.0;
    std::vector<CovariateSpec> covariates;
    //! Indices into covariates (discrete only) whose categories form cells.
    std::vector<std::size_t> cell_covariates;

    std::size_t num_columns() const
    {
        std::size_t p = 0;
        for (auto const& c : covariates)
            p += c.num_columns();
        return p;
    }

    //! Number of cells J (product of category counts; 1 when no cells).
    std::size_t num_cells() const
    {
        std::size_t j = 1;
        for (auto k : cell_covariates)
            j *= covariates[k].num_categories();
        return j;
    }

    void validate() const
    {
        require(sigma_eps > 0 && std::isfinite(sigma_eps),
                "sigma_eps must be positive");
        for (auto const& c : covariates)
        {
            if (c.kind != CovariateSpec::Kind::discrete)
                continue;
            require(c.probs.size() >= 2,
                    "discrete covariate needs at least two categories");
            double total = 0;
            for (double p : c.probs)
            {
                require(p >= 0, "category probabilities must be nonnegative");
                total += p;
            }
            require(std::abs(total - 1.0) <= 1e-12,
                    "category probabilities must sum to 1");
        }
        require(beta.size() == 1 + num_columns(),
                "beta must have 1 + " + std::to_string(num_columns())
                    + " entries");
        for (auto k : cell_covariates)
        {
            require(k < covariates.size()
                        && covariates[k].kind == CovariateSpec::Kind::discrete,
                    "cell covariates must be discrete covariate indices");
        }
    }
};

//---------------------------------------------------------------------------//
//! Finite universe of N units.
struct Population
{
    Eigen::VectorXd y;
    Eigen::MatrixXd z;  //!< N x p design columns (no intercept)
    std::vector<std::size_t> cell_id;
    std::vector<std::size_t> cell_sizes;

    std::size_t size() const { return static_cast<std::size_t>(y.size()); }
    std::size_t num_cells() const { return cell_sizes.size(); }

    void validate() const
    {
        require(size() >= 1, "population must have at least one unit");
        require(static_cast<std::size_t>(z.rows()) == size()
                    && cell_id.size() == size(),
                "population field lengths disagree");
        std::vector<std::size_t> tally(cell_sizes.size(), 0);
        for (auto c : cell_id)
        {
            require(c < cell_sizes.size(), "cell_id out of range");
            ++tally[c];
        }
        require(tally == cell_sizes, "cell_sizes do not match cell_id");
    }
};

//---------------------------------------------------------------------------//
/*!
 * Draw a population of N units. Deterministic given seed.
 *
 * Each unit draws its covariates in declaration order, then its error, from a
 * single engine. Cells are numbered in lexicographic order of the category
 * tuple over cell_covariates (first listed covariate most significant).
 */
inline Population
generate_population(PopulationModel const& model, std::size_t n, std::uint64_t seed)
{
    if (n == 0)
        fail(ErrorKind::invalid_argument, "population size must be >= 1");
    model.validate();

    auto const p = model.num_columns();
    Population pop;
    pop.y.resize(n);
    pop.z.setZero(n, p);
    pop.cell_id.assign(n, 0);
    pop.cell_sizes.assign(model.num_cells(), 0);

    Engine eng = make_engine(seed, StreamTag::population);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::size_t> category(model.covariates.size(), 0);

    for (std::size_t i = 0; i < n; ++i)
    {
        Eigen::Index col = 0;
        for (std::size_t k = 0; k < model.covariates.size(); ++k)
        {
            auto const& cov = model.covariates[k];
            if (cov.kind == CovariateSpec::Kind::normal)
            {
                pop.z(i, col++) = normal(eng);
                continue;
            }
            double u = uniform01(eng);
            std::size_t cat = cov.probs.size() - 1;
            double cum = 0;
            for (std::size_t c = 0; c + 1 < cov.probs.size(); ++c)
            {
                cum += cov.probs[c];
                if (u < cum)
                {
                    cat = c;
                    break;
                }
            }
            category[k] = cat;
            if (cat > 0)
                pop.z(i, col + static_cast<Eigen::Index>(cat) - 1) = 1.0;
            col += static_cast<Eigen::Index>(cov.num_columns());
        }

        double mean = model.beta[0];
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j)
            mean += model.beta[j + 1] * pop.z(i, j);
        pop.y[i] = mean + model.sigma_eps * normal(eng);

        std::size_t cell = 0;
        for (auto k : model.cell_covariates)
            cell = cell * model.covariates[k].num_categories() + category[k];
        pop.cell_id[i] = cell;
        ++pop.cell_sizes[cell];
    }
    return pop;
}

//---------------------------------------------------------------------------//
struct CellGroup
{
    std::size_t cell;
    std::size_t size;
    std::vector<std::size_t> members;
};

//! Nonempty cells in index order with their member units.
inline std::vector<CellGroup> cell_structure(Population const& pop)
{
    std::vector<std::vector<std::size_t>> members(pop.num_cells());
    for (std::size_t i = 0; i < pop.size(); ++i)
        members[pop.cell_id[i]].push_back(i);

    std::vector<CellGroup> groups;
    for (std::size_t j = 0; j < members.size(); ++j)
    {
        if (members[j].empty())
            continue;
        groups.push_back({j, members[j].size(), std::move(members[j])});
    }
    return groups;
}

}  // namespace infsamp

#endif  // INFSAMP_POPULATION_HPP
