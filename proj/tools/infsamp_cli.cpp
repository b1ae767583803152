// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file tools/infsamp_cli.cpp
//! Batch front end: simulate, exact, estimate.
//---------------------------------------------------------------------------//
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "infsamp/infsamp.hpp"
#include "infsamp/io.hpp"

namespace fs = std::filesystem;
using namespace infsamp;

namespace
{
enum ExitCode : int
{
    exit_ok = 0,
    exit_input = 2,
    exit_runtime = 3,
    exit_residual = 4,
};

int verbosity = 0;

void note(std::string const& msg)
{
    if (verbosity > 0)
        std::cerr << msg << '\n';
}

json load_json(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::invalid_argument, "cannot open '" + path + "'");
    try
    {
        return json::parse(in);
    }
    catch (json::parse_error const& e)
    {
        fail(ErrorKind::invalid_argument, path + ": " + e.what());
    }
}

CsvTable load_csv(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::invalid_argument, "cannot open '" + path + "'");
    return read_csv(in);
}

std::vector<std::string> split_list(std::string const& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

std::ofstream open_out(fs::path const& path)
{
    std::ofstream os(path);
    if (!os)
        fail(ErrorKind::invalid_argument, "cannot write '" + path.string() + "'");
    return os;
}

//---------------------------------------------------------------------------//
struct SimulateArgs
{
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::string estimators;
    std::string weight_mode;
};

int cmd_simulate(SimulateArgs const& a)
{
    ExperimentConfig cfg;
    try
    {
        cfg = config_from_json(load_json(a.config));
        if (a.seed)
            cfg.seed = *a.seed;
        if (a.reps)
            cfg.replications = *a.reps;
        if (!a.estimators.empty())
        {
            cfg.estimators.clear();
            for (auto const& name : split_list(a.estimators))
            {
                EstimatorSpec e;
                e.name = name;
                cfg.estimators.push_back(e);
            }
        }
        if (!a.weight_mode.empty())
            cfg.weight_mode = parse_weight_mode(a.weight_mode);
        cfg.validate();
        fs::create_directories(a.out);
    }
    catch (std::exception const& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_input;
    }

    try
    {
        note("running " + std::to_string(cfg.replications) + " replications");
        auto rep = run_replications(cfg);
        fs::path out(a.out);
        {
            auto os = open_out(out / "replications.csv");
            write_replications_csv(os, rep);
        }
        {
            auto os = open_out(out / "summary.csv");
            write_summary_csv(os, rep);
        }
        {
            auto os = open_out(out / "config.json");
            os << config_to_json(cfg).dump(2) << '\n';
        }
        note("wrote " + (out / "summary.csv").string());
    }
    catch (std::exception const& e)
    {
        std::cerr << "runtime error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_ok;
}

//---------------------------------------------------------------------------//
constexpr double exact_tolerance = 1e-10;

int cmd_exact(std::string const& config, std::string const& out)
{
    std::pair<DiscreteJointDist, PiFunction> inst;
    try
    {
        inst = discrete_from_json(load_json(config));
    }
    catch (std::exception const& e)
    {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_input;
    }
    json report;
    try
    {
        report = identity_report_to_json(identity_residuals(inst.first, inst.second),
                                         exact_tolerance);
    }
    catch (std::exception const& e)
    {
        std::cerr << "identity evaluation failed: " << e.what() << '\n';
        return exit_residual;
    }
    std::cout << report.dump(2) << '\n';
    if (!out.empty())
    {
        try
        {
            fs::create_directories(out);
            auto os = open_out(fs::path(out) / "exact_report.json");
            os << report.dump(2) << '\n';
        }
        catch (std::exception const& e)
        {
            std::cerr << e.what() << '\n';
            return exit_input;
        }
    }
    return report["passed"].get<bool>() ? exit_ok : exit_residual;
}

//---------------------------------------------------------------------------//
struct EstimateArgs
{
    std::string input;
    std::string estimators = "hajek";
    std::string out;
    std::string cell_sizes;
    std::string nonsample_counts;
    std::string pop_x;
    std::size_t z_col = 0;
    std::string esw_form = "log-linear";
    std::string z_fit = "auto";
    bool drop_empty_cells = false;
};

bool needs_weights(std::string const& name)
{
    return name == "hajek" || name == "domain_difference" || name == "bw" || name == "bq"
           || name == "predict_total" || name == "predict_total_modeled";
}

int cmd_estimate(EstimateArgs const& a)
{
    SampleTable table;
    std::vector<std::string> names;
    std::vector<double> cell_sizes;
    std::map<LevelKey, double> counts;
    TwoStepSpec two_step;
    EswForm form{};
    ZFit zfit{};
    try
    {
        table = sample_from_csv(load_csv(a.input));
        names = split_list(a.estimators);
        if (names.empty())
            fail(ErrorKind::invalid_argument, "no estimators requested");
        auto const& known = known_estimators();
        for (auto const& n : names)
        {
            if (std::find(known.begin(), known.end(), n) == known.end())
                fail(ErrorKind::invalid_argument, "unknown estimator '" + n + "'");
            if (needs_weights(n) && !table.has_w)
                fail(ErrorKind::invalid_argument,
                     "missing required column 'w' for estimator " + n);
            if (n == "poststratified")
            {
                if (table.sample.cell_id.empty())
                    fail(ErrorKind::invalid_argument,
                         "missing required column 'cell_id' for poststratified");
                if (a.cell_sizes.empty())
                    fail(ErrorKind::invalid_argument, "poststratified needs --cell-sizes");
                auto t = load_csv(a.cell_sizes);
                auto c = t.column("cell_id"), nn = t.column("N");
                if (!c || !nn)
                    fail(ErrorKind::invalid_argument,
                         "cell sizes file needs columns 'cell_id' and 'N'");
                for (auto const& row : t.rows)
                {
                    auto j = static_cast<std::size_t>(parse_double(row[*c], "cell_id"));
                    if (cell_sizes.size() <= j)
                        cell_sizes.resize(j + 1, 0.0);
                    cell_sizes[j] = parse_double(row[*nn], "N");
                }
            }
            if (n == "domain_difference" && !table.domain)
                fail(ErrorKind::invalid_argument,
                     "missing required column 'domain' for domain_difference");
            if (n == "two_step")
            {
                if (!table.x_col)
                    fail(ErrorKind::invalid_argument,
                         "missing required column 'x' for two_step");
                if (a.pop_x.empty())
                    fail(ErrorKind::invalid_argument, "two_step needs --pop-x");
                auto t = load_csv(a.pop_x);
                auto zc = t.column("z"), p0 = t.column("p_x0"), p1 = t.column("p_x1");
                if (!zc || !p0 || !p1)
                    fail(ErrorKind::invalid_argument,
                         "pop-x file needs columns 'z', 'p_x0', 'p_x1'");
                for (auto const& row : t.rows)
                    two_step.pop_x_dist[parse_double(row[*zc], "z")]
                        = {parse_double(row[*p0], "p_x0"), parse_double(row[*p1], "p_x1")};
                two_step.z_col = a.z_col;
                two_step.x_col = *table.x_col;
            }
            if (n == "predict_total" || n == "predict_total_modeled")
            {
                if (a.nonsample_counts.empty())
                    fail(ErrorKind::invalid_argument,
                         n + " needs --nonsample-counts");
                auto t = load_csv(a.nonsample_counts);
                auto cc = t.column("count");
                if (!cc)
                    fail(ErrorKind::invalid_argument,
                         "nonsample counts file needs a 'count' column");
                std::vector<std::size_t> zc;
                for (Eigen::Index k = 0; k < table.sample.z.cols(); ++k)
                {
                    auto c = t.column("z_" + std::to_string(k + 1));
                    if (!c)
                        fail(ErrorKind::invalid_argument,
                             "missing required column 'z_" + std::to_string(k + 1)
                                 + "' in nonsample counts");
                    zc.push_back(*c);
                }
                for (auto const& row : t.rows)
                {
                    LevelKey key;
                    for (auto c : zc)
                        key.push_back(parse_double(row[c], "z"));
                    counts[key] += parse_double(row[*cc], "count");
                }
            }
        }
        form = detail::parse_esw_form(a.esw_form, "--esw-form");
        zfit = detail::parse_z_fit(a.z_fit, "--z-fit");
    }
    catch (std::exception const& e)
    {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_input;
    }

    Sample const& s = table.sample;
    std::vector<EstimatorResult> results;
    std::vector<std::pair<std::string, std::string>> errors;
    for (auto const& n : names)
    {
        try
        {
            if (n == "sample_mean")
                results.push_back(sample_mean(s));
            else if (n == "hajek")
                results.push_back(hajek_mean(s));
            else if (n == "poststratified")
                results.push_back(poststratified_mean(s, cell_sizes, {a.drop_empty_cells}));
            else if (n == "domain_difference")
                results.push_back(weighted_domain_difference(s, *table.domain));
            else if (n == "ols")
                results.push_back(ols_fit(s));
            else if (n == "bw")
                results.push_back(weighted_regression_bw(s));
            else if (n == "bq")
                results.push_back(q_weighted_regression_bq(s, estimate_esw(s, form, zfit)));
            else if (n == "two_step")
                results.push_back(two_step_regression(s, two_step));
            else if (n == "predict_total")
                results.push_back(predict_total(s, counts));
            else if (n == "predict_total_modeled")
            {
                auto esw = estimate_esw(s, form, zfit);
                results.push_back(predict_total(s, counts, PredictMode::modeled, &esw));
            }
        }
        catch (Error const& e)
        {
            note(n + ": " + e.what());
            errors.emplace_back(n, to_string(e.kind()));
        }
    }

    try
    {
        if (a.out.empty())
        {
            write_estimates_csv(std::cout, results, errors);
        }
        else
        {
            fs::path p(a.out);
            if (fs::is_directory(p))
                p /= "estimates.csv";
            auto os = open_out(p);
            write_estimates_csv(os, results, errors);
        }
    }
    catch (std::exception const& e)
    {
        std::cerr << e.what() << '\n';
        return exit_input;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Estimators and exact identities for informative survey sampling"};
    app.require_subcommand(1);
    app.add_flag("-v,--verbose", verbosity, "Progress messages on stderr");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment");
    simulate->add_option("--config", sim.config, "Experiment JSON")->required();
    simulate->add_option("--out", sim.out, "Output directory");
    simulate->add_option("--seed", sim.seed, "Master seed override");
    simulate->add_option("--reps", sim.reps, "Replication count override");
    simulate->add_option("--estimators", sim.estimators, "Comma-separated estimator list");
    simulate->add_option("--weight-mode", sim.weight_mode, "true | selection-only");

    std::string exact_config, exact_out;
    auto* exact = app.add_subcommand("exact", "Check exact identities on a discrete instance");
    exact->add_option("--config", exact_config, "Discrete instance JSON")->required();
    exact->add_option("--out", exact_out, "Also write exact_report.json here");

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate from a sample CSV");
    estimate->add_option("--input,--config", est.input, "Sample CSV")->required();
    estimate->add_option("--estimators", est.estimators, "Comma-separated estimator list");
    estimate->add_option("--out", est.out, "Output file or directory (default stdout)");
    estimate->add_option("--cell-sizes", est.cell_sizes, "CSV with cell_id,N");
    estimate->add_option("--nonsample-counts", est.nonsample_counts,
                         "CSV with z_1..z_p,count");
    estimate->add_option("--pop-x", est.pop_x, "CSV with z,p_x0,p_x1");
    estimate->add_option("--z-col", est.z_col, "Zero-based z column for two_step");
    estimate->add_option("--esw-form", est.esw_form, "linear | log-linear");
    estimate->add_option("--z-fit", est.z_fit, "regression | saturated | auto");
    estimate->add_flag("--drop-empty-cells", est.drop_empty_cells,
                       "Drop unsampled poststratification cells");

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_input;
    }

    if (*simulate)
        return cmd_simulate(sim);
    if (*exact)
        return cmd_exact(exact_config, exact_out);
    return cmd_estimate(est);
}
