// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "infsamp/io.hpp"
#include "test_util.hpp"

using namespace infsamp;
using nlohmann::json;

namespace
{
std::string error_text(auto&& fn)
{
    try
    {
        fn();
    }
    catch (Error const& e)
    {
        return e.what();
    }
    return {};
}

json minimal_config()
{
    return json::parse(R"({
      "population": {"size": 100, "beta": [1, 1], "covariates": [{"type": "normal"}]},
      "design": {"a_y": 0.5, "target_n": 10},
      "estimators": ["hajek", {"name": "bq", "esw_form": "linear", "z_fit": "regression"}],
      "replications": 4,
      "seed": 11
    })");
}
}  // namespace

TEST(FormatDouble, RoundTripsAtSeventeenDigits)
{
    for (double v : {0.1, 1.0 / 3, -2.5e-300, 12345678.901234567, 0.0})
        EXPECT_EQ(std::stod(infsamp::format_double(v)), v);
    EXPECT_EQ(infsamp::format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_EQ(infsamp::format_double(0.5), "0.5");
}

TEST(Csv, ReadsAndRejectsRaggedRows)
{
    std::istringstream ok("y,w\r\n1,2\n\n3,4\n");
    auto t = infsamp::read_csv(ok);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.header[1], "w");
    EXPECT_EQ(*t.column("w"), 1u);
    EXPECT_FALSE(t.column("x"));

    std::istringstream bad("y,w\n1,2,3\n");
    EXPECT_NE(error_text([&] { infsamp::read_csv(bad); }).find("line 2"), std::string::npos);
    std::istringstream empty("");
    EXPECT_THROW(infsamp::read_csv(empty), Error);
    EXPECT_THROW(infsamp::parse_double("1.5x", "here"), Error);
    EXPECT_THROW(infsamp::parse_double("", "here"), Error);
}

TEST(Csv, SampleRoundTrip)
{
    auto pop = generate_population(
        PopulationModel{{1, 1, 0.5},
                        1.0,
                        {CovariateSpec::standard_normal(), CovariateSpec::discrete({0.3, 0.7})},
                        {1}},
        200,
        4);
    std::vector<double> pi(pop.size(), 0.3);
    auto s = draw_sample(pop, pi, 9);
    std::stringstream ss;
    infsamp::write_sample_csv(ss, s);
    auto back = infsamp::sample_from_csv(infsamp::read_csv(ss));
    ASSERT_TRUE(back.has_w);
    EXPECT_EQ(back.sample.unit_ids, s.unit_ids);
    EXPECT_EQ(back.sample.cell_id, s.cell_id);
    EXPECT_TRUE(back.sample.y == s.y);
    EXPECT_TRUE(back.sample.w == s.w);
    EXPECT_TRUE(back.sample.z == s.z);
}

TEST(Csv, SampleColumnsAndErrors)
{
    std::istringstream in("x,y,z_1,domain\n1,2,0.5,1\n0,3,1.5,0\n");
    auto t = infsamp::sample_from_csv(infsamp::read_csv(in));
    EXPECT_FALSE(t.has_w);
    EXPECT_TRUE(t.sample.w.isOnes());
    ASSERT_EQ(t.sample.z.cols(), 2);
    EXPECT_EQ(*t.x_col, 1u);
    EXPECT_EQ(t.sample.z(0, 1), 1.0);
    EXPECT_EQ(*t.domain, (std::vector<int>{1, 0}));

    std::istringstream noy("w\n1\n");
    EXPECT_NE(error_text([&] { infsamp::sample_from_csv(infsamp::read_csv(noy)); }).find("'y'"),
              std::string::npos);
}

TEST(Config, ParsesAndEchoes)
{
    auto cfg = infsamp::config_from_json(minimal_config());
    EXPECT_EQ(cfg.population_size, 100u);
    EXPECT_EQ(cfg.replications, 4u);
    EXPECT_EQ(cfg.seed, 11u);
    ASSERT_EQ(cfg.estimators.size(), 2u);
    EXPECT_EQ(cfg.estimators[1].esw_form, EswForm::linear);
    EXPECT_EQ(cfg.estimators[1].z_fit, ZFit::regression);
    EXPECT_EQ(cfg.weight_mode, WeightMode::true_combined);

    auto again = infsamp::config_from_json(infsamp::config_to_json(cfg));
    EXPECT_EQ(infsamp::config_to_json(again), infsamp::config_to_json(cfg));
}

TEST(Config, ErrorsNameTheField)
{
    auto expect_field = [](json j, std::string const& field) {
        auto msg = error_text([&] { infsamp::config_from_json(j); });
        EXPECT_NE(msg.find(field), std::string::npos) << msg;
    };
    auto j = minimal_config();
    j["population"]["sigma_eps"] = "one";
    expect_field(j, "population.sigma_eps");

    j = minimal_config();
    j["population"].erase("beta");
    expect_field(j, "population.beta");

    j = minimal_config();
    j["design"]["response"] = {{"b0", 0}, {"b_y", "x"}};
    expect_field(j, "design.response.b_y");

    j = minimal_config();
    j["estimators"][1]["esw_form"] = "cubic";
    expect_field(j, "estimators[1].esw_form");

    j = minimal_config();
    j["weight_mode"] = "sometimes";
    expect_field(j, "weight_mode");

    j = minimal_config();
    j["estimators"] = {"nope"};
    expect_field(j, "nope");
}

TEST(Config, WeightModeNames)
{
    EXPECT_EQ(infsamp::parse_weight_mode("true"), WeightMode::true_combined);
    EXPECT_EQ(infsamp::parse_weight_mode("selection-only"), WeightMode::selection_only);
    EXPECT_THROW(infsamp::parse_weight_mode("other"), Error);
}

TEST(Discrete, ParsesScalarAndTupleLevels)
{
    auto [d, pi] = infsamp::discrete_from_json(json::parse(R"({
      "y_support": [0, 1], "z_support": [0, [1]],
      "p": [[0.25, 0.25], [0.25, 0.25]], "pi": [[0.5, 0.5], [0.5, 0.5]]})"));
    ASSERT_EQ(d.z_support.size(), 2u);
    EXPECT_EQ(d.z_support[1], (LevelKey{1.0}));
    EXPECT_DOUBLE_EQ(d.p.sum(), 1.0);
    EXPECT_EQ(pi.pi(1, 1), 0.5);
}

TEST(Discrete, RejectsBadTables)
{
    auto bad = [](char const* text) {
        return error_text([&] { infsamp::discrete_from_json(json::parse(text)); });
    };
    EXPECT_NE(bad(R"({"y_support": [0, 1], "z_support": [0],
                      "p": [[0.5], [0.4]], "pi": [[0.2], [0.4]]})")
                  .find("distribution"),
              std::string::npos);
    EXPECT_NE(bad(R"({"y_support": [0, 1], "z_support": [0],
                      "p": [[0.5], [0.5]], "pi": [[0.2], [1.5]]})")
                  .find("distribution"),
              std::string::npos);
    EXPECT_NE(bad(R"({"y_support": [0, 1], "z_support": [0],
                      "p": [[0.5, 0.1], [0.4]], "pi": [[0.2], [0.4]]})")
                  .find("p[0]"),
              std::string::npos);
    EXPECT_NE(bad(R"({"y_support": [0, 1], "z_support": [0], "p": [[1], [0]]})").find("pi"),
              std::string::npos);
}

TEST(Report, PassedFlag)
{
    DiscreteJointDist d{{0, 1}, {{0}}, Eigen::MatrixXd::Constant(2, 1, 0.5)};
    Eigen::MatrixXd p(2, 1);
    p << 0.2, 0.4;
    auto j = infsamp::identity_report_to_json(identity_residuals(d, PiFunction{p}), 1e-10);
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_FALSE(j["ignorable"].get<bool>());
}
