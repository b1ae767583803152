// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/io.hpp
//! CSV tables and JSON configs for the command line front end.
//---------------------------------------------------------------------------//
#ifndef INFSAMP_IO_HPP
#define INFSAMP_IO_HPP

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "montecarlo.hpp"
#include "population.hpp"
#include "sample_model.hpp"

namespace infsamp
{

using nlohmann::json;

//! 17 significant digits, so values survive a text round trip exactly.
inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string const& name) const
    {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name)
                return k;
        return std::nullopt;
    }
};

namespace detail
{
inline std::vector<std::string> split_csv_line(std::string line)
{
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}
}  // namespace detail

//! Plain comma-separated table with a header row; no quoting.
inline CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        fail(ErrorKind::invalid_argument, "CSV input is empty");
    t.header = detail::split_csv_line(line);
    std::size_t lineno = 1;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        auto row = detail::split_csv_line(line);
        if (row.size() != t.header.size())
            fail(ErrorKind::invalid_argument,
                 "CSV line " + std::to_string(lineno) + " has " + std::to_string(row.size())
                     + " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline double parse_double(std::string const& s, std::string const& where)
{
    try
    {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos == s.size())
            return v;
    }
    catch (std::exception const&)
    {
    }
    fail(ErrorKind::invalid_argument, where + ": cannot parse number '" + s + "'");
}

inline void write_population_csv(std::ostream& os, Population const& pop)
{
    os << "unit_id,y";
    for (Eigen::Index k = 0; k < pop.z.cols(); ++k)
        os << ",z_" << k + 1;
    os << ",cell_id\n";
    for (std::size_t i = 0; i < pop.size(); ++i)
    {
        auto ii = static_cast<Eigen::Index>(i);
        os << i << ',' << format_double(pop.y[ii]);
        for (Eigen::Index k = 0; k < pop.z.cols(); ++k)
            os << ',' << format_double(pop.z(ii, k));
        os << ',' << pop.cell_id[i] << '\n';
    }
}

inline void write_sample_csv(std::ostream& os, Sample const& s)
{
    os << "unit_id,y";
    for (Eigen::Index k = 0; k < s.z.cols(); ++k)
        os << ",z_" << k + 1;
    os << ",cell_id,w\n";
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        auto ii = static_cast<Eigen::Index>(i);
        os << s.unit_ids[i] << ',' << format_double(s.y[ii]);
        for (Eigen::Index k = 0; k < s.z.cols(); ++k)
            os << ',' << format_double(s.z(ii, k));
        os << ',' << (s.cell_id.empty() ? 0 : s.cell_id[i]) << ','
           << format_double(s.w[ii]) << '\n';
    }
}

//! Sample plus the optional per-unit columns the CLI understands.
struct SampleTable
{
    Sample sample;
    bool has_w = false;
    std::optional<std::vector<int>> domain;
    std::optional<std::size_t> x_col;  //!< index of x inside sample.z
};

/*!
 * Build a sample from CSV columns y, w, z_1..z_p and optional unit_id,
 * cell_id, domain, x. A missing w column yields unit weights and has_w =
 * false; the x column, when present, is appended after the z columns.
 */
inline SampleTable sample_from_csv(CsvTable const& t)
{
    auto ycol = t.column("y");
    if (!ycol)
        fail(ErrorKind::invalid_argument, "missing required column 'y'");
    std::vector<std::size_t> zcols;
    for (std::size_t p = 1;; ++p)
    {
        auto c = t.column("z_" + std::to_string(p));
        if (!c)
            break;
        zcols.push_back(*c);
    }
    auto wcol = t.column("w");
    auto ccol = t.column("cell_id");
    auto dcol = t.column("domain");
    auto xcol = t.column("x");
    auto ucol = t.column("unit_id");

    SampleTable out;
    out.has_w = wcol.has_value();
    auto n = static_cast<Eigen::Index>(t.rows.size());
    auto p = static_cast<Eigen::Index>(zcols.size()) + (xcol ? 1 : 0);
    Sample& s = out.sample;
    s.y.resize(n);
    s.w.resize(n);
    s.z.resize(n, p);
    if (dcol)
        out.domain.emplace();
    if (xcol)
        out.x_col = zcols.size();
    for (Eigen::Index i = 0; i < n; ++i)
    {
        auto const& row = t.rows[static_cast<std::size_t>(i)];
        auto where = "row " + std::to_string(i + 1);
        s.y[i] = parse_double(row[*ycol], where + " y");
        s.w[i] = wcol ? parse_double(row[*wcol], where + " w") : 1.0;
        for (std::size_t k = 0; k < zcols.size(); ++k)
            s.z(i, static_cast<Eigen::Index>(k)) = parse_double(row[zcols[k]], where + " z");
        if (xcol)
            s.z(i, p - 1) = parse_double(row[*xcol], where + " x");
        if (ccol)
            s.cell_id.push_back(static_cast<std::size_t>(
                parse_double(row[*ccol], where + " cell_id")));
        if (dcol)
            out.domain->push_back(static_cast<int>(parse_double(row[*dcol], where + " domain")));
        s.unit_ids.push_back(ucol ? static_cast<std::size_t>(
                                        parse_double(row[*ucol], where + " unit_id"))
                                  : static_cast<std::size_t>(i));
    }
    return out;
}

inline void write_estimates_csv(std::ostream& os,
                                std::vector<EstimatorResult> const& results,
                                std::vector<std::pair<std::string, std::string>> const& errors)
{
    os << "estimator,component,value,n_used,status,weight_cv,diagnostics\n";
    for (auto const& r : results)
    {
        std::string diag;
        for (auto const& [k, v] : r.diagnostics)
        {
            if (k == "weight_cv")
                continue;
            if (!diag.empty())
                diag += ';';
            diag += k + "=" + format_double(v);
        }
        auto cv = r.diagnostics.count("weight_cv") ? r.diagnostics.at("weight_cv") : NAN;
        for (std::size_t k = 0; k < r.value.size(); ++k)
        {
            os << r.name << ',' << r.components[k] << ',' << format_double(r.value[k]) << ','
               << r.n_used << ",ok," << format_double(cv) << ',' << diag << '\n';
        }
    }
    for (auto const& [name, err] : errors)
        os << name << ",*,nan,0," << err << ",nan,\n";
}

inline void write_replications_csv(std::ostream& os, SimulationReport const& rep)
{
    os << "replication,estimator,component,estimate,error_flag\n";
    for (auto const& r : rep.records)
    {
        os << r.replication << ',' << r.estimator << ',' << r.component << ','
           << format_double(r.estimate) << ',' << (r.error.empty() ? "0" : r.error) << '\n';
    }
}

inline void write_summary_csv(std::ostream& os, SimulationReport const& rep)
{
    os << "estimator,component,bias,variance,mse,mcse,failures,mean_estimate,truth\n";
    for (auto const& r : rep.summary)
    {
        os << r.estimator << ',' << r.component << ',' << format_double(r.stats.bias) << ','
           << format_double(r.stats.variance) << ',' << format_double(r.stats.mse) << ','
           << format_double(r.stats.mcse) << ',' << r.failures << ','
           << format_double(r.stats.mean) << ',' << format_double(r.truth) << '\n';
    }
}

//---------------------------------------------------------------------------//
// JSON
//---------------------------------------------------------------------------//

namespace detail
{
//! Typed lookup that names the offending field on failure.
class Fields
{
  public:
    Fields(json const& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            bad(path_, "expected an object");
    }

    [[noreturn]] static void bad(std::string const& path, std::string const& what)
    {
        fail(ErrorKind::invalid_argument, (path.empty() ? "<root>" : path) + ": " + what);
    }

    std::string at(std::string const& key) const
    {
        return path_.empty() ? key : path_ + "." + key;
    }
    bool has(std::string const& key) const { return j_.contains(key); }
    json const& get(std::string const& key) const
    {
        if (!j_.contains(key))
            bad(at(key), "missing required field");
        return j_.at(key);
    }

    double number(std::string const& key) const
    {
        auto const& v = get(key);
        if (!v.is_number())
            bad(at(key), "expected a number");
        return v.get<double>();
    }
    double number(std::string const& key, double dflt) const
    {
        return has(key) ? number(key) : dflt;
    }
    std::uint64_t count(std::string const& key) const
    {
        auto const& v = get(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            bad(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(std::string const& key, bool dflt) const
    {
        if (!has(key))
            return dflt;
        auto const& v = get(key);
        if (!v.is_boolean())
            bad(at(key), "expected true or false");
        return v.get<bool>();
    }
    std::string string(std::string const& key, std::string dflt) const
    {
        if (!has(key))
            return dflt;
        auto const& v = get(key);
        if (!v.is_string())
            bad(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(std::string const& key) const
    {
        if (!has(key))
            return {};
        return number_array(get(key), at(key));
    }
    static std::vector<double> number_array(json const& v, std::string const& path)
    {
        if (!v.is_array())
            bad(path, "expected an array of numbers");
        std::vector<double> out;
        for (auto const& x : v)
        {
            if (!x.is_number())
                bad(path, "expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

  private:
    json const& j_;
    std::string path_;
};

inline EswForm parse_esw_form(std::string const& s, std::string const& path)
{
    if (s == "linear")
        return EswForm::linear;
    if (s == "log-linear")
        return EswForm::log_linear;
    Fields::bad(path, "expected 'linear' or 'log-linear'");
}

inline ZFit parse_z_fit(std::string const& s, std::string const& path)
{
    if (s == "regression")
        return ZFit::regression;
    if (s == "saturated")
        return ZFit::saturated;
    if (s == "auto")
        return ZFit::automatic;
    Fields::bad(path, "expected 'regression', 'saturated' or 'auto'");
}

inline char const* to_string(EswForm f)
{
    return f == EswForm::linear ? "linear" : "log-linear";
}

inline char const* to_string(ZFit f)
{
    switch (f)
    {
        case ZFit::regression: return "regression";
        case ZFit::saturated: return "saturated";
        case ZFit::constant: return "constant";
        default: return "auto";
    }
}
}  // namespace detail

inline WeightMode parse_weight_mode(std::string const& s)
{
    if (s == "true" || s == "true-combined")
        return WeightMode::true_combined;
    if (s == "selection-only")
        return WeightMode::selection_only;
    fail(ErrorKind::invalid_argument,
         "weight_mode: expected 'true' or 'selection-only', got '" + s + "'");
}

inline EstimatorSpec parse_estimator_spec(json const& j, std::string const& path)
{
    if (j.is_string())
    {
        EstimatorSpec e;
        e.name = j.get<std::string>();
        return e;
    }
    detail::Fields f(j, path);
    EstimatorSpec e;
    auto const& name = f.get("name");
    if (!name.is_string())
        detail::Fields::bad(f.at("name"), "expected a string");
    e.name = name.get<std::string>();
    e.esw_form = detail::parse_esw_form(f.string("esw_form", "log-linear"), f.at("esw_form"));
    e.z_fit = detail::parse_z_fit(f.string("z_fit", "auto"), f.at("z_fit"));
    e.drop_empty_cells = f.boolean("drop_empty_cells", false);
    if (f.has("columns"))
    {
        std::vector<std::size_t> cols;
        for (double c : f.numbers("columns"))
        {
            if (c < 0 || c != std::floor(c))
                detail::Fields::bad(f.at("columns"), "expected column indices");
            cols.push_back(static_cast<std::size_t>(c));
        }
        e.columns = cols;
    }
    return e;
}

/*!
 * ExperimentConfig from JSON. Errors name the offending field path, e.g.
 * "population.sigma_eps: expected a number".
 */
inline ExperimentConfig config_from_json(json const& j)
{
    using detail::Fields;
    Fields root(j, "");
    ExperimentConfig cfg;

    Fields pop(root.get("population"), "population");
    cfg.population_size = pop.count("size");
    cfg.regenerate_population = pop.boolean("regenerate", false);
    cfg.population.beta = Fields::number_array(pop.get("beta"), pop.at("beta"));
    cfg.population.sigma_eps = pop.number("sigma_eps", 1.0);
    if (pop.has("covariates"))
    {
        auto const& covs = pop.get("covariates");
        if (!covs.is_array())
            Fields::bad(pop.at("covariates"), "expected an array");
        for (std::size_t k = 0; k < covs.size(); ++k)
        {
            Fields c(covs[k], pop.at("covariates") + "[" + std::to_string(k) + "]");
            auto type = c.string("type", "normal");
            if (type == "normal")
                cfg.population.covariates.push_back(CovariateSpec::standard_normal());
            else if (type == "discrete")
                cfg.population.covariates.push_back(
                    CovariateSpec::discrete(Fields::number_array(c.get("probs"), c.at("probs"))));
            else
                Fields::bad(c.at("type"), "expected 'normal' or 'discrete'");
        }
    }
    for (double k : pop.numbers("cell_covariates"))
        cfg.population.cell_covariates.push_back(static_cast<std::size_t>(k));

    Fields des(root.get("design"), "design");
    cfg.census = des.boolean("census", false);
    cfg.design.a0 = des.number("a0", 0.0);
    cfg.design.a_y = des.number("a_y", 0.0);
    cfg.design.a_z = des.numbers("a_z");
    cfg.design.target_n = cfg.census ? 0.0 : des.number("target_n");
    if (des.has("response") && !des.get("response").is_null())
    {
        Fields r(des.get("response"), des.at("response"));
        ResponseModel m;
        m.b0 = r.number("b0", 0.0);
        m.b_y = r.number("b_y", 0.0);
        m.b_z = r.numbers("b_z");
        cfg.design.response = m;
    }

    cfg.weight_mode = parse_weight_mode(root.string("weight_mode", "true"));
    auto const& ests = root.get("estimators");
    if (!ests.is_array())
        Fields::bad("estimators", "expected an array");
    for (std::size_t k = 0; k < ests.size(); ++k)
        cfg.estimators.push_back(
            parse_estimator_spec(ests[k], "estimators[" + std::to_string(k) + "]"));
    cfg.replications = root.count("replications");
    cfg.seed = root.has("seed") ? root.count("seed") : 0;
    if (root.has("domain_column"))
        cfg.domain_column = root.count("domain_column");
    if (root.has("two_step"))
    {
        Fields t(root.get("two_step"), "two_step");
        cfg.two_step = TwoStepColumns{t.count("z_col"), t.count("x_col")};
    }
    cfg.threads = root.has("threads") ? static_cast<unsigned>(root.count("threads")) : 0;

    try
    {
        cfg.validate();
    }
    catch (Error const& e)
    {
        fail(ErrorKind::invalid_argument, std::string("config: ") + e.what());
    }
    if (!cfg.census)
    {
        if (!(cfg.design.target_n > 0
              && cfg.design.target_n < static_cast<double>(cfg.population_size)))
            Fields::bad("design.target_n", "must lie in (0, population.size)");
    }
    return cfg;
}

//! Fully resolved config, defaults filled in; unset optional fields are omitted.
inline json config_to_json(ExperimentConfig const& cfg)
{
    json covs = json::array();
    for (auto const& c : cfg.population.covariates)
    {
        if (c.kind == CovariateSpec::Kind::normal)
            covs.push_back({{"type", "normal"}});
        else
            covs.push_back({{"type", "discrete"}, {"probs", c.probs}});
    }
    json design = {{"census", cfg.census},
                   {"a0", cfg.design.a0},
                   {"a_y", cfg.design.a_y},
                   {"a_z", cfg.design.a_z},
                   {"target_n", cfg.design.target_n}};
    if (cfg.design.response)
        design["response"] = {{"b0", cfg.design.response->b0},
                              {"b_y", cfg.design.response->b_y},
                              {"b_z", cfg.design.response->b_z}};

    json ests = json::array();
    for (auto const& e : cfg.estimators)
    {
        json o = {{"name", e.name},
                  {"esw_form", detail::to_string(e.esw_form)},
                  {"z_fit", detail::to_string(e.z_fit)},
                  {"drop_empty_cells", e.drop_empty_cells}};
        if (e.columns)
            o["columns"] = *e.columns;
        ests.push_back(o);
    }
    json j = {{"population",
               {{"size", cfg.population_size},
                {"regenerate", cfg.regenerate_population},
                {"beta", cfg.population.beta},
                {"sigma_eps", cfg.population.sigma_eps},
                {"covariates", covs},
                {"cell_covariates", cfg.population.cell_covariates}}},
              {"design", design},
              {"weight_mode", to_string(cfg.weight_mode)},
              {"estimators", ests},
              {"replications", cfg.replications},
              {"seed", cfg.seed}};
    if (cfg.domain_column)
        j["domain_column"] = *cfg.domain_column;
    if (cfg.two_step)
        j["two_step"] = {{"z_col", cfg.two_step->z_col}, {"x_col", cfg.two_step->x_col}};
    return j;
}

//---------------------------------------------------------------------------//
/*!
 * Discrete instance from JSON:
 *   {"y_support": [..], "z_support": [[..], ..] or [..],
 *    "p":  [[p(y_0, z_0), p(y_0, z_1), ..], ..],   // one row per y
 *    "pi": same shape as p}
 */
inline std::pair<DiscreteJointDist, PiFunction> discrete_from_json(json const& j)
{
    using detail::Fields;
    Fields root(j, "");
    DiscreteJointDist d;
    d.y_support = Fields::number_array(root.get("y_support"), "y_support");
    auto const& zs = root.get("z_support");
    if (!zs.is_array())
        Fields::bad("z_support", "expected an array");
    for (std::size_t k = 0; k < zs.size(); ++k)
    {
        if (zs[k].is_number())
            d.z_support.push_back({zs[k].get<double>()});
        else
            d.z_support.push_back(
                Fields::number_array(zs[k], "z_support[" + std::to_string(k) + "]"));
    }
    auto table = [&](std::string const& key) {
        auto const& rows = root.get(key);
        if (!rows.is_array() || rows.size() != d.y_support.size())
            Fields::bad(key, "expected one row per y_support value");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(d.y_support.size()),
                          static_cast<Eigen::Index>(d.z_support.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            auto path = key + "[" + std::to_string(i) + "]";
            auto row = Fields::number_array(rows[i], path);
            if (row.size() != d.z_support.size())
                Fields::bad(path, "expected one entry per z_support value");
            for (std::size_t c = 0; c < row.size(); ++c)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
        }
        return m;
    };
    d.p = table("p");
    PiFunction pi{table("pi")};
    try
    {
        d.validate();
        pi.validate(d);
    }
    catch (Error const& e)
    {
        fail(ErrorKind::invalid_argument, std::string("distribution: ") + e.what());
    }
    return {std::move(d), std::move(pi)};
}

inline json table_to_json(Eigen::MatrixXd const& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(i, c));
        rows.push_back(row);
    }
    return rows;
}

inline json identity_report_to_json(IdentityReport const& rep, double tolerance)
{
    auto opt = [](std::optional<double> const& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["residuals"] = {{"sample_normalization", rep.sample_normalization},
                      {"roundtrip", rep.roundtrip},
                      {"dual_form", opt(rep.dual_form)},
                      {"mixture", opt(rep.mixture)},
                      {"fixed_point", opt(rep.fixed_point)}};
    j["ignorable"] = rep.ignorable;
    j["tolerance"] = tolerance;
    j["complement_error"]
        = rep.complement_error ? json(*rep.complement_error) : json(nullptr);
    j["f_s"] = table_to_json(rep.fs.p);
    j["f_s_conditional"] = table_to_json(rep.fs.conditional());
    if (rep.fc)
    {
        j["f_c"] = table_to_json(rep.fc->p);
        j["f_c_conditional"] = table_to_json(rep.fc->conditional());
    }
    else
    {
        j["f_c"] = nullptr;
        j["f_c_conditional"] = nullptr;
    }
    j["passed"] = !rep.complement_error && rep.max_residual() < tolerance;
    return j;
}

}  // namespace infsamp

#endif  // INFSAMP_IO_HPP
