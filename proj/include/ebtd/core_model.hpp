#pragma once

// Data containers shared by every module: the worker-by-question response
// matrix, answer and variance vectors, and the dispersion statistics that the
// shrinkage formulas are written in terms of.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ebtd {

// Length-m vector of answers: ground truth, an aggregate, or estimator output.
class AnswerVector {
public:
    AnswerVector() = default;
    explicit AnswerVector(std::vector<double> values) : values_(std::move(values)) {}
    AnswerVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double operator[](std::size_t j) const { return values_[j]; }
    double& operator[](std::size_t j) { return values_[j]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& vec() const noexcept { return values_; }

    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    friend bool operator==(const AnswerVector&, const AnswerVector&) = default;

private:
    std::vector<double> values_;
};

// Per-worker variances; every entry is strictly positive and finite.
class VarianceVector {
public:
    VarianceVector() = default;
    // Throws NonPositiveVariance on an entry <= 0 or non-finite.
    explicit VarianceVector(std::vector<double> values);
    VarianceVector(std::initializer_list<double> values)
        : VarianceVector(std::vector<double>(values))
    {
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const VarianceVector&, const VarianceVector&) = default;

private:
    std::vector<double> values_;
};

// n x m matrix of finite answers, row = worker, column = question.
// Ids are optional; unnamed rows report "w<i>" and unnamed columns "<j>".
class ObservationMatrix {
public:
    std::size_t workers() const noexcept { return workers_; }
    std::size_t questions() const noexcept { return questions_; }

    double operator()(std::size_t i, std::size_t j) const { return values_[i * questions_ + j]; }
    std::span<const double> row(std::size_t i) const
    {
        return std::span<const double>(values_).subspan(i * questions_, questions_);
    }
    std::vector<double> column(std::size_t j) const;
    std::span<const double> data() const noexcept { return values_; }

    std::string worker_id(std::size_t i) const;
    std::string question_id(std::size_t j) const;
    bool has_worker_ids() const noexcept { return !worker_ids_.empty(); }
    bool has_question_ids() const noexcept { return !question_ids_.empty(); }

private:
    friend ObservationMatrix validate_matrix(std::vector<double>, std::size_t, std::size_t,
                                             std::vector<std::string>, std::vector<std::string>);

    std::size_t workers_ = 0;
    std::size_t questions_ = 0;
    std::vector<double> values_;
    std::vector<std::string> worker_ids_;
    std::vector<std::string> question_ids_;
};

// Validates a row-major n x m buffer. Throws EmptyMatrix when n or m is zero,
// NonFiniteError(row, col) on the first NaN/inf, LengthMismatch when the buffer
// or the id lists have the wrong size. Data is never repaired.
ObservationMatrix validate_matrix(std::vector<double> row_major, std::size_t workers,
                                  std::size_t questions,
                                  std::vector<std::string> worker_ids = {},
                                  std::vector<std::string> question_ids = {});

// Convenience overload for nested rows; ragged input is a LengthMismatch.
ObservationMatrix validate_matrix(const std::vector<std::vector<double>>& rows);

struct DispersionStats {
    double mean = 0.0;
    // Sum of squared deviations from the mean.
    double ss = 0.0;
    // ss / (m - 1); empty when m < 2.
    std::optional<double> sample_variance;
};

DispersionStats dispersion(std::span<const double> values);
inline DispersionStats dispersion(const AnswerVector& v) { return dispersion(v.values()); }

// Summation by recursive halving; the result depends only on element order.
double pairwise_sum(std::span<const double> values);

} // namespace ebtd
