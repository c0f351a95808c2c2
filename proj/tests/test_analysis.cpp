#include "ebtd/analysis.hpp"
#include "ebtd/error.hpp"
#include "ebtd/experiments.hpp"
#include "ebtd/report.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <sstream>

namespace ebtd {
namespace {

TEST(Loss, WorkedExample)
{
    const Dataset ds = table1_dataset();
    const AnswerVector avg = run_td(parse_td_algorithm("mean"), ds.matrix);
    EXPECT_EQ(loss(avg, *ds.ground_truth, LossConvention::MeanSquared), 9.40625);
    const AnswerVector blue = blue_aggregate(ds.matrix, *ds.worker_variances).answers;
    double direct = 0;
    for (std::size_t j = 0; j < 4; ++j) {
        direct += (blue[j] - (*ds.ground_truth)[j]) * (blue[j] - (*ds.ground_truth)[j]);
    }
    EXPECT_NEAR(loss(blue, *ds.ground_truth, LossConvention::MeanSquared), direct / 4, 1e-12);
    // printed as 8.22
    EXPECT_NEAR(loss(blue, *ds.ground_truth, LossConvention::MeanSquared), 8.22, 0.005);
    EXPECT_EQ(loss(avg, avg), 0.0);
    EXPECT_THROW(loss(avg, AnswerVector{1}), Error);
    EXPECT_EQ(parse_loss_convention("mean"), LossConvention::MeanSquared);
    EXPECT_EQ(to_string(LossConvention::SumSquared), "sum");
}

TEST(McRisk, AnalyticMeans)
{
    SyntheticSpec spec;
    spec.sigmas = ExplicitSigmas{VarianceVector{2.0}};
    spec.workers = 1;
    spec.questions = 6;
    spec.seed = 1;
    const RiskReport id = mc_risk(spec, TruthMode::Fresh, blue_pipeline(), {.replicates = 20000});
    EXPECT_LT(std::abs(id.mean_loss - 12.0), 3 * id.std_error);
    EXPECT_EQ(id.replicates, 20000u);

    spec.sigmas = ExplicitSigmas{VarianceVector{2.0, 2.0, 2.0, 2.0}};
    spec.workers = 4;
    const RiskReport blue = mc_risk(spec, TruthMode::Fresh, blue_pipeline(), {.replicates = 20000});
    EXPECT_LT(std::abs(blue.mean_loss - 3.0), 3 * blue.std_error);

    EXPECT_THROW(mc_risk(spec, TruthMode::Fresh, blue_pipeline(), {.replicates = 1}), Error);
}

TEST(McRisk, EbBlueBeatsBlueOnConstantTruth)
{
    SyntheticSpec spec;
    spec.truth = ConstantTruth{2.0};
    spec.sigmas = ExplicitSigmas{VarianceVector{1.0}};
    spec.workers = 1;
    spec.questions = 10;
    const std::vector<PipelineSpec> p{blue_pipeline(), eb_blue_pipeline()};
    const PairedRisk risk = mc_risk(spec, TruthMode::Fixed, p, {.replicates = 20000});
    const Summary gap = risk.difference(0, 1);
    EXPECT_GT(gap.mean, 3 * gap.std_error);
    EXPECT_LT(risk.reports[1].mean_loss / risk.reports[0].mean_loss, 1.0);
}

TEST(McRisk, ThreadCountDoesNotChangeBits)
{
    SyntheticSpec spec;
    spec.workers = 3;
    spec.questions = 8;
    spec.seed = 9;
    const std::vector<PipelineSpec> p{blue_pipeline(), eb_blue_pipeline(),
                                      eb_wrap_pipeline(parse_td_algorithm("crh"), VarianceEstimator::heuristic())};
    const PairedRisk one = mc_risk(spec, TruthMode::Fresh, p, {.replicates = 3000, .threads = 1});
    const PairedRisk many = mc_risk(spec, TruthMode::Fresh, p, {.replicates = 3000, .threads = 7});
    for (std::size_t k = 0; k < p.size(); ++k) {
        EXPECT_EQ(one.reports[k].mean_loss, many.reports[k].mean_loss);
        EXPECT_EQ(one.reports[k].std_error, many.reports[k].std_error);
    }
}

TEST(ImprovementRatioTest, ZeroPsiIsExactlyOne)
{
    SyntheticSpec spec;
    spec.sigmas = GaussianSqSigmas{};
    spec.workers = 6;
    spec.questions = 30;
    spec.seed = 2;
    const Dataset ds = gen_synthetic(spec);
    for (const char* name : {"mean", "median", "crh", "catd", "distance"}) {
        const ImprovementRatio ir = improvement_ratio(ds, parse_td_algorithm(name), VarianceEstimator::constant(0.0),
                                                      4, 20, 50, 1, 0);
        EXPECT_EQ(ir.ratio, 1.0) << name;
    }
    const ImprovementRatio synth = improvement_ratio(synthetic_replicates(spec, TruthMode::Fresh),
                                                     parse_td_algorithm("mean"), VarianceEstimator::constant(0.0),
                                                     50, 0);
    EXPECT_EQ(synth.ratio, 1.0);
}

TEST(ImprovementRatioTest, Errors)
{
    Dataset ds = table1_dataset();
    try {
        improvement_ratio(ds, parse_td_algorithm("mean"), VarianceEstimator::heuristic(), 5, 4, 1, 0, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
    }
    ds.ground_truth.reset();
    try {
        improvement_ratio(ds, parse_td_algorithm("mean"), VarianceEstimator::heuristic(), 4, 4, 1, 0, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoGroundTruth);
    }
}

ConditionStream constant_stream(double psi, std::size_t m, std::uint64_t seed, std::size_t reps = 20000)
{
    SyntheticSpec spec;
    spec.truth = ConstantTruth{2.0};
    spec.sigmas = ExplicitSigmas{VarianceVector{1.0}};
    spec.workers = 1;
    spec.questions = m;
    spec.seed = seed;
    return collect_condition_stream(spec, parse_td_algorithm("mean"), VarianceEstimator::constant(psi), reps, 0);
}

TEST(Conditions, GainConditionExamples)
{
    const ConditionReport zero = thm3_condition(constant_stream(0.0, 10, 1));
    EXPECT_EQ(zero.lhs, 0.0);
    EXPECT_FALSE(zero.satisfied);

    const ConditionStream good = constant_stream(1.0, 10, 2);
    EXPECT_TRUE(thm3_condition(good).satisfied);
    const Summary gain = summarize_difference(good.loss_base, good.loss_eb);
    EXPECT_GT(gain.mean, 3 * gain.std_error);

    const ConditionStream bad = constant_stream(3.0, 10, 3);
    EXPECT_FALSE(thm3_condition(bad).satisfied);
    const Summary loss_gap = summarize_difference(bad.loss_eb, bad.loss_base);
    EXPECT_GT(loss_gap.mean, 3 * loss_gap.std_error);
}

TEST(Conditions, RiskDecompositionExamples)
{
    const Decomposition zero = thm4_decomposition(constant_stream(0.0, 10, 4), 1.0);
    EXPECT_EQ(zero.lhs.mean, 0.0);
    EXPECT_EQ(zero.rhs.mean, 0.0);

    const ConditionStream known = constant_stream(1.0, 10, 5);
    const Decomposition gap = independent_estimator_gap(known, 1.0);
    EXPECT_TRUE(gap.agree);
    double inv_ss = 0;
    for (const AggregateDraw& d : known.draws) {
        inv_ss += 1.0 / dispersion(d.x_a).ss;
    }
    inv_ss /= known.draws.size();
    EXPECT_NEAR(gap.rhs.mean, -49.0 * inv_ss, 1e-9);
    EXPECT_TRUE(thm4_decomposition(known, 1.0).agree);

    SyntheticSpec spec;
    spec.truth = GaussianTruth{0.0, 1.0};
    spec.sigmas = ExplicitSigmas{VarianceVector{1.0}};
    spec.workers = 1;
    spec.questions = 10;
    spec.seed = 6;
    const ConditionStream sample = collect_condition_stream(spec, parse_td_algorithm("mean"),
                                                            VarianceEstimator::sample_scaled(1.0), 100000, 0);
    EXPECT_TRUE(thm4_decomposition(sample, 1.0).agree);
    EXPECT_THROW(independent_estimator_gap(sample, 1.0), Error);
}

TEST(Conditions, RatioConditionExamples)
{
    const auto find = [](const std::vector<ConditionReport>& all, const std::string& name) {
        for (const auto& c : all) {
            if (c.name == name) {
                return c;
            }
        }
        ADD_FAILURE() << "missing " << name;
        return ConditionReport{};
    };
    const auto constant = corollary_conditions(constant_stream(1.0, 10, 7), 1.0);
    EXPECT_DOUBLE_EQ(find(constant, "constant").lhs, 1.0);
    EXPECT_TRUE(find(constant, "constant").satisfied);
    EXPECT_TRUE(find(constant, "general").satisfied);

    SyntheticSpec spec;
    spec.truth = ConstantTruth{5.0};
    spec.sigmas = ExplicitSigmas{VarianceVector{1.0}};
    spec.workers = 1;
    spec.questions = 10;
    spec.seed = 8;
    const auto flat = corollary_conditions(collect_condition_stream(spec, parse_td_algorithm("mean"),
                                                                    VarianceEstimator::sample_scaled(1.0), 20000, 0),
                                           1.0);
    EXPECT_TRUE(find(flat, "mean_adjusted").satisfied);

    // truth with S^2(mu) = 10
    std::vector<double> mu(10);
    for (std::size_t j = 0; j < 10; ++j) {
        mu[j] = j % 2 == 0 ? 0.0 : 2 * std::sqrt(10.0 * 9 / 10);
    }
    spec.truth = ExplicitTruth{AnswerVector(mu)};
    ASSERT_NEAR(dispersion(AnswerVector(mu)).sample_variance.value(), 10.0, 1e-9);
    const ConditionStream spread = collect_condition_stream(spec, parse_td_algorithm("mean"),
                                                            VarianceEstimator::sample_scaled(1.0), 20000, 0);
    EXPECT_FALSE(find(corollary_conditions(spread, 1.0), "mean_adjusted").satisfied);
    const Summary worse = summarize_difference(spread.loss_eb, spread.loss_base);
    EXPECT_GT(worse.mean, 3 * worse.std_error);

    const auto bracketed = corollary_conditions(constant_stream(1.2, 10, 9), 1.0,
                                                {.epsilon = 0.5, .delta = 0.5, .bound = 2.0});
    EXPECT_TRUE(find(bracketed, "epsilon_bracket").satisfied);
    find(bracketed, "epsilon_delta_bracket");
}

// Across random configurations, a significant paired risk difference always
// carries the sign the gain condition predicts.
TEST(Conditions, SignConsistency)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 5 + static_cast<std::size_t>(unit(rng) * 20);
        const double psi = unit(rng) * 3.5;
        const ConditionStream s = constant_stream(psi, m, 1000 + trial, 5000);
        const Summary gain = summarize_difference(s.loss_base, s.loss_eb);
        if (std::abs(gain.mean) > 3 * gain.std_error) {
            EXPECT_EQ(thm3_condition(s).satisfied, gain.mean > 0) << "m=" << m << " psi=" << psi;
        }
    }
}

// Gap over constant guesses is a parabola opening downward with its best point
// at the true variance and a sign change at twice it.
TEST(Conditions, ConstantGuessParabola)
{
    const double s2 = 1.0;
    std::vector<double> gaps;
    for (double g : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const ConditionStream s = constant_stream(g * s2, 10, 31);
        const Decomposition d = independent_estimator_gap(s, s2);
        EXPECT_TRUE(d.agree) << g;
        gaps.push_back(d.lhs.mean);
    }
    EXPECT_EQ(gaps[0], 0.0);
    EXPECT_LT(gaps[2], gaps[1]);
    EXPECT_LT(gaps[2], gaps[3]);
    EXPECT_LT(gaps[3], 0.0);
    EXPECT_GT(gaps[5], 0.0);
}

TEST(BayesRiskGap, Examples)
{
    EXPECT_EQ(bayes_risk_gap(1, 1), 0.5);
    EXPECT_EQ(bayes_risk_gap(2, 2), 1.0);
    EXPECT_LT(bayes_risk_gap(1, 1e15), 1e-14);
    EXPECT_THROW(bayes_risk_gap(0, 1), Error);
}

TEST(Report, JsonlAndCsv)
{
    const RunHeader header{"simulate", 7, R"({"a":1})"};
    const std::string jsonl = format_records_jsonl(header, {{"x", 1.5, std::nullopt, 0.25, 7}, {"y", 2, 3, 0, 7}});
    std::istringstream in(jsonl);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(nlohmann::json::parse(line)["seed"], 7);
    std::getline(in, line);
    const auto first = nlohmann::json::parse(line);
    EXPECT_EQ(first["name"], "x");
    EXPECT_TRUE(first["rhs"].is_null());
    std::getline(in, line);
    EXPECT_EQ(nlohmann::json::parse(line)["rhs"], 3.0);

    const std::string csv = format_table_csv(header, {{"a", "b"}, {{"1", "x, \"y\""}}});
    EXPECT_NE(csv.find("1,\"x, \"\"y\"\"\"\n"), std::string::npos);
    EXPECT_EQ(format_number(0.1), "0.1");
}

} // namespace
} // namespace ebtd
