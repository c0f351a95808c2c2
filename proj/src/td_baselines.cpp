#include "ebtd/td_baselines.hpp"

#include "ebtd/detail/overloaded.hpp"
#include "ebtd/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace ebtd {

namespace {

using detail::overloaded;

std::vector<double> weighted_column_means(const ObservationMatrix& x, std::span<const double> weights)
{
    const std::size_t n = x.workers();
    const std::size_t m = x.questions();
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw Error(ErrorCode::IterationDivergence, fmt::format("worker weights sum to {}", total));
    }
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            out[j] += weights[i] * row[j];
        }
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

std::vector<double> squared_distances(const ObservationMatrix& x, std::span<const double> truth)
{
    std::vector<double> d(x.workers());
    for (std::size_t i = 0; i < x.workers(); ++i) {
        const auto row = x.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < x.questions(); ++j) {
            const double r = row[j] - truth[j];
            s += r * r;
        }
        d[i] = s + kDistanceEpsilon;
    }
    return d;
}

void require_finite(std::span<const double> weights)
{
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!std::isfinite(weights[i])) {
            throw Error(ErrorCode::IterationDivergence, fmt::format("weight of worker {} is {}", i, weights[i]));
        }
    }
}

std::vector<double> normalized(std::span<const double> w)
{
    double total = 0.0;
    for (double v : w) {
        total += v;
    }
    std::vector<double> out(w.begin(), w.end());
    for (double& v : out) {
        v /= total;
    }
    return out;
}

// Alternates truth and weight updates, starting from column means.
template <class WeightRule>
AnswerVector reweighted_mean(const TdAlgorithm& alg, const ObservationMatrix& x, WeightRule rule)
{
    const std::size_t n = x.workers();
    std::vector<double> uniform(n, 1.0);
    std::vector<double> truth = weighted_column_means(x, uniform);
    if (n == 1) {
        return AnswerVector(std::move(truth));
    }
    std::vector<double> previous = normalized(uniform);
    for (int it = 0; it < alg.max_iterations; ++it) {
        std::vector<double> w = rule(squared_distances(x, truth));
        require_finite(w);
        truth = weighted_column_means(x, w);
        std::vector<double> current = normalized(w);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            change = std::max(change, std::abs(current[i] - previous[i]));
        }
        previous = std::move(current);
        if (change < alg.convergence_tol) {
            break;
        }
    }
    return AnswerVector(std::move(truth));
}

AnswerVector column_medians(const ObservationMatrix& x)
{
    const std::size_t n = x.workers();
    std::vector<double> out(x.questions());
    for (std::size_t j = 0; j < x.questions(); ++j) {
        std::vector<double> col = x.column(j);
        const auto mid = col.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(col.begin(), mid, col.end());
        double value = *mid;
        if (n % 2 == 0) {
            value = 0.5 * (value + *std::max_element(col.begin(), mid));
        }
        out[j] = value;
    }
    return AnswerVector(std::move(out));
}

AnswerVector distance_weighted(const ObservationMatrix& x)
{
    const std::size_t n = x.workers();
    const std::size_t m = x.questions();
    std::vector<double> uniform(n, 1.0);
    if (n == 1) {
        return AnswerVector(weighted_column_means(x, uniform));
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) {
                continue;
            }
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double r = x(i, j) - x(k, j);
                s += r * r;
            }
            total += s / static_cast<double>(m);
        }
        w[i] = 1.0 / (total / static_cast<double>(n - 1) + kDistanceEpsilon);
    }
    require_finite(w);
    return AnswerVector(weighted_column_means(x, w));
}

} // namespace

std::string TdAlgorithm::name() const
{
    return std::visit(overloaded{
                          [](const BlueTd&) { return std::string("blue"); },
                          [](const MeanTd&) { return std::string("mean"); },
                          [](const MedianTd&) { return std::string("median"); },
                          [](const CrhTd&) { return std::string("crh"); },
                          [](const CatdTd&) { return std::string("catd"); },
                          [](const DistanceWeightedTd&) { return std::string("distance"); },
                          [](const ExternalTd&) { return std::string("external"); },
                      },
                      kind);
}

TdAlgorithm parse_td_algorithm(const std::string& text)
{
    TdAlgorithm alg;
    if (text == "blue") {
        alg.kind = BlueTd{};
    } else if (text == "mean") {
        alg.kind = MeanTd{};
    } else if (text == "median") {
        alg.kind = MedianTd{};
    } else if (text == "crh") {
        alg.kind = CrhTd{};
    } else if (text == "catd") {
        alg.kind = CatdTd{};
    } else if (text == "distance") {
        alg.kind = DistanceWeightedTd{};
    } else {
        throw Error(ErrorCode::InvalidArgument,
                    "unknown algorithm '" + text + "' (expected blue, mean, median, crh, catd, distance)");
    }
    return alg;
}

BlueResult blue_aggregate(const ObservationMatrix& x, const VarianceVector& variances)
{
    if (variances.size() != x.workers()) {
        throw Error(ErrorCode::LengthMismatch, fmt::format("{} variances for {} workers", variances.size(),
                                                           x.workers()));
    }
    std::vector<double> precision(x.workers());
    double total = 0.0;
    for (std::size_t i = 0; i < x.workers(); ++i) {
        precision[i] = 1.0 / variances[i];
        total += precision[i];
    }
    const double aggregated = 1.0 / total;
    std::vector<double> answers(x.questions(), 0.0);
    for (std::size_t i = 0; i < x.workers(); ++i) {
        const auto row = x.row(i);
        for (std::size_t j = 0; j < x.questions(); ++j) {
            answers[j] += row[j] * precision[i];
        }
    }
    for (double& a : answers) {
        a *= aggregated;
    }
    return {AnswerVector(std::move(answers)), aggregated};
}

AnswerVector run_td(const TdAlgorithm& alg, const ObservationMatrix& x)
{
    return std::visit(
        overloaded{
            [&](const BlueTd& k) {
                if (!k.variances) {
                    throw Error(ErrorCode::InvalidArgument, "BLUE needs the workers' variances");
                }
                return blue_aggregate(x, *k.variances).answers;
            },
            [&](const MeanTd&) {
                std::vector<double> uniform(x.workers(), 1.0);
                return AnswerVector(weighted_column_means(x, uniform));
            },
            [&](const MedianTd&) { return column_medians(x); },
            [&](const CrhTd&) {
                return reweighted_mean(alg, x, [](std::vector<double> d) {
                    double total = 0.0;
                    for (double v : d) {
                        total += v;
                    }
                    for (double& v : d) {
                        v = -std::log(v / total);
                    }
                    return d;
                });
            },
            [&](const CatdTd& k) {
                const boost::math::chi_squared chi2(static_cast<double>(x.questions()));
                const double upper = boost::math::quantile(chi2, k.confidence);
                return reweighted_mean(alg, x, [upper](std::vector<double> d) {
                    for (double& v : d) {
                        v = upper / v;
                    }
                    return d;
                });
            },
            [&](const DistanceWeightedTd&) { return distance_weighted(x); },
            [&](const ExternalTd& k) {
                if (k.answers.size() != x.questions()) {
                    throw Error(ErrorCode::LengthMismatch,
                                fmt::format("external answers have {} entries, matrix has {} questions",
                                            k.answers.size(), x.questions()));
                }
                return k.answers;
            },
        },
        alg.kind);
}

AnswerVector load_external_answers(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1) {
            if (line != "answer") {
                throw ParseError(1, 1, "expected header 'answer'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc() || ptr != line.data() + line.size() || !std::isfinite(v)) {
            throw ParseError(line_no, 1, "not a finite number: '" + line + "'");
        }
        values.push_back(v);
    }
    if (line_no == 0) {
        throw ParseError(1, 1, "empty file");
    }
    if (values.empty()) {
        throw Error(ErrorCode::EmptyMatrix, path.string() + " has no answers");
    }
    return AnswerVector(std::move(values));
}

} // namespace ebtd
