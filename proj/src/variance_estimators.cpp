#include "ebtd/variance_estimators.hpp"

#include "ebtd/detail/overloaded.hpp"
#include "ebtd/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace ebtd {

namespace {

using detail::overloaded;

double checked_scale(double c)
{
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("estimator constant must be >= 0, got {}", c));
    }
    return c;
}

double parse_number(const std::string& text)
{
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw Error(ErrorCode::InvalidArgument, "not a number: '" + text + "'");
    }
    return value;
}

void require_length(const AnswerVector& v, std::size_t m)
{
    if (v.size() != m) {
        throw Error(ErrorCode::LengthMismatch,
                    fmt::format("aggregate has {} entries, matrix has {} questions", v.size(), m));
    }
}

void require_two_questions(std::size_t m)
{
    if (m < 2) {
        throw Error(ErrorCode::InvalidArgument, "variance estimation needs at least two questions");
    }
}

} // namespace

VarianceEstimator VarianceEstimator::sample_scaled(double c)
{
    return VarianceEstimator(SampleScaledPsi{checked_scale(c)});
}

VarianceEstimator VarianceEstimator::constant(double c)
{
    return VarianceEstimator(ConstantPsi{checked_scale(c)});
}

VarianceEstimator VarianceEstimator::oracle_reduced(VarianceVector guesses)
{
    if (guesses.size() == 0) {
        throw Error(ErrorCode::InvalidArgument, "oracle estimator needs at least one guess");
    }
    return VarianceEstimator(OracleReducedPsi{std::move(guesses)});
}

bool VarianceEstimator::data_independent() const noexcept
{
    return std::holds_alternative<ConstantPsi>(kind_) || std::holds_alternative<OracleReducedPsi>(kind_);
}

std::string VarianceEstimator::name() const
{
    return std::visit(overloaded{
                          [](const HeuristicPsi&) { return std::string("heuristic"); },
                          [](const SampleScaledPsi& k) { return fmt::format("sample(c={})", k.c); },
                          [](const ConstantPsi& k) { return fmt::format("constant(c={})", k.c); },
                          [](const OracleReducedPsi& k) {
                              return fmt::format("oracle({})", fmt::join(k.guesses.values(), ";"));
                          },
                      },
                      kind_);
}

VarianceEstimator parse_variance_estimator(const std::string& text)
{
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
    if (head == "heuristic" && arg.empty()) {
        return VarianceEstimator::heuristic();
    }
    if (head == "sample") {
        return VarianceEstimator::sample_scaled(arg.empty() ? 1.0 : parse_number(arg));
    }
    if (head == "constant" && !arg.empty()) {
        return VarianceEstimator::constant(parse_number(arg));
    }
    if (head == "oracle" && !arg.empty()) {
        std::vector<double> guesses;
        std::stringstream ss(arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            guesses.push_back(parse_number(item));
        }
        return VarianceEstimator::oracle_reduced(VarianceVector(std::move(guesses)));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown variance estimator '" + text +
                                                "' (expected heuristic, sample[:c], constant:c, oracle:g1,g2,...)");
}

double psi_h(const ObservationMatrix& x, const AnswerVector& x_a)
{
    const std::size_t n = x.workers();
    const std::size_t m = x.questions();
    require_length(x_a, m);
    require_two_questions(m);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        double worker = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double r = row[j] - x_a[j];
            worker += r * r;
        }
        total += worker / static_cast<double>(m - 1);
    }
    return total / static_cast<double>(n);
}

double psi_s(const AnswerVector& v, double c)
{
    require_two_questions(v.size());
    return checked_scale(c) * dispersion(v).sample_variance.value();
}

double psi_value(const VarianceEstimator& est, const ObservationMatrix& x, const AnswerVector& x_a)
{
    return std::visit(overloaded{
                          [&](const HeuristicPsi&) { return psi_h(x, x_a); },
                          [&](const SampleScaledPsi& k) { return psi_s(x_a, k.c); },
                          [](const ConstantPsi& k) { return k.c; },
                          [](const OracleReducedPsi& k) {
                              double precision = 0.0;
                              for (double g : k.guesses.values()) {
                                  precision += 1.0 / g;
                              }
                              return 1.0 / precision;
                          },
                      },
                      est.kind());
}

double central_difference(const ScalarField& f, const AnswerVector& v, std::size_t j)
{
    const double h = 1e-5 * std::max(1.0, std::abs(v[j]));
    AnswerVector plus = v;
    AnswerVector minus = v;
    plus[j] += h;
    minus[j] -= h;
    // Divide by the realized step so rounding in v_j +/- h does not bias it.
    return (f(plus) - f(minus)) / (plus[j] - minus[j]);
}

double psi_derivative(const VarianceEstimator& est, const ObservationMatrix& x,
                      const AnswerVector& x_a, std::size_t j)
{
    if (std::holds_alternative<HeuristicPsi>(est.kind())) {
        require_length(x_a, x.questions());
        return central_difference([&](const AnswerVector& v) { return psi_h(x, v); }, x_a, j);
    }
    return psi_derivative(est, x_a, j);
}

double psi_derivative(const VarianceEstimator& est, const AnswerVector& v, std::size_t j)
{
    return std::visit(overloaded{
                          [](const HeuristicPsi&) -> double {
                              throw Error(ErrorCode::InvalidArgument,
                                          "heuristic estimator derivative needs the observation matrix");
                          },
                          [&](const SampleScaledPsi& k) {
                              require_two_questions(v.size());
                              const double mean = dispersion(v).mean;
                              return 2.0 * k.c * (v[j] - mean) / static_cast<double>(v.size() - 1);
                          },
                          [](const ConstantPsi&) { return 0.0; },
                          [](const OracleReducedPsi&) { return 0.0; },
                      },
                      est.kind());
}

double derivative_projection(const VarianceEstimator& est, const ObservationMatrix& x,
                             const AnswerVector& x_a)
{
    if (est.data_independent()) {
        return 0.0;
    }
    if (const auto* k = std::get_if<SampleScaledPsi>(&est.kind())) {
        // sum_j 2c (v_j - mean)^2 / (m-1) = 2c ss / (m-1)
        require_two_questions(x_a.size());
        return 2.0 * k->c * dispersion(x_a).ss / static_cast<double>(x_a.size() - 1);
    }
    const double mean = dispersion(x_a).mean;
    double total = 0.0;
    for (std::size_t j = 0; j < x_a.size(); ++j) {
        total += psi_derivative(est, x, x_a, j) * (x_a[j] - mean);
    }
    return total;
}

bool is_mean_adjusted(const PartialDerivative& derivative, const AnswerVector& v, double tol)
{
    const double mean = dispersion(v).mean;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double d = derivative(v, j);
        if (v[j] <= mean ? d > tol : d < -tol) {
            return false;
        }
    }
    return true;
}

bool is_mean_adjusted(const VarianceEstimator& est, const ObservationMatrix& x, const AnswerVector& v)
{
    return is_mean_adjusted(
        [&](const AnswerVector& p, std::size_t j) { return psi_derivative(est, x, p, j); }, v);
}

bool is_mean_adjusted(const VarianceEstimator& est, const AnswerVector& v)
{
    return is_mean_adjusted(
        [&](const AnswerVector& p, std::size_t j) { return psi_derivative(est, p, j); }, v);
}

} // namespace ebtd
