#include "ebtd/core_model.hpp"

#include "ebtd/error.hpp"

#include <algorithm>
#include <cmath>

namespace ebtd {

VarianceVector::VarianceVector(std::vector<double> values) : values_(std::move(values))
{
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
            throw Error(ErrorCode::NonPositiveVariance,
                        "variance " + std::to_string(i) + " is " + std::to_string(values_[i]));
        }
    }
}

std::vector<double> ObservationMatrix::column(std::size_t j) const
{
    std::vector<double> out(workers_);
    for (std::size_t i = 0; i < workers_; ++i) {
        out[i] = (*this)(i, j);
    }
    return out;
}

std::string ObservationMatrix::worker_id(std::size_t i) const
{
    return worker_ids_.empty() ? "w" + std::to_string(i) : worker_ids_[i];
}

std::string ObservationMatrix::question_id(std::size_t j) const
{
    return question_ids_.empty() ? std::to_string(j) : question_ids_[j];
}

ObservationMatrix validate_matrix(std::vector<double> row_major, std::size_t workers,
                                  std::size_t questions, std::vector<std::string> worker_ids,
                                  std::vector<std::string> question_ids)
{
    if (workers == 0 || questions == 0) {
        throw Error(ErrorCode::EmptyMatrix, "matrix must have at least one worker and one question");
    }
    if (row_major.size() != workers * questions) {
        throw Error(ErrorCode::LengthMismatch, "buffer holds " + std::to_string(row_major.size()) +
                                                   " values, expected " +
                                                   std::to_string(workers * questions));
    }
    if (!worker_ids.empty() && worker_ids.size() != workers) {
        throw Error(ErrorCode::LengthMismatch, "worker id count differs from row count");
    }
    if (!question_ids.empty() && question_ids.size() != questions) {
        throw Error(ErrorCode::LengthMismatch, "question id count differs from column count");
    }
    for (std::size_t k = 0; k < row_major.size(); ++k) {
        if (!std::isfinite(row_major[k])) {
            throw NonFiniteError(k / questions, k % questions);
        }
    }
    ObservationMatrix out;
    out.workers_ = workers;
    out.questions_ = questions;
    out.values_ = std::move(row_major);
    out.worker_ids_ = std::move(worker_ids);
    out.question_ids_ = std::move(question_ids);
    return out;
}

ObservationMatrix validate_matrix(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty() || rows.front().empty()) {
        throw Error(ErrorCode::EmptyMatrix, "matrix must have at least one worker and one question");
    }
    const std::size_t m = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * m);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m) {
            throw Error(ErrorCode::LengthMismatch, "row " + std::to_string(i) + " has " +
                                                       std::to_string(rows[i].size()) +
                                                       " entries, expected " + std::to_string(m));
        }
        flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    return validate_matrix(std::move(flat), rows.size(), m);
}

DispersionStats dispersion(std::span<const double> values)
{
    DispersionStats out;
    const std::size_t m = values.size();
    if (m == 0) {
        return out;
    }
    // Rounding in sum/m can leave a constant vector with a tiny nonzero ss.
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        out.mean = values[0];
        if (m >= 2) {
            out.sample_variance = 0.0;
        }
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (double v : values) {
        const double d = v - out.mean;
        ss += d * d;
    }
    out.ss = ss;
    if (m >= 2) {
        out.sample_variance = ss / static_cast<double>(m - 1);
    }
    return out;
}

double pairwise_sum(std::span<const double> values)
{
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace ebtd
