#pragma once

#include "ebtd/experiments.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ebtd {

// replicates x columns of per-replicate values, stored column-major so each
// column can be reduced in replicate order.
class ReplicateTable {
public:
    ReplicateTable(std::size_t replicates, std::size_t columns)
        : replicates_(replicates), columns_(columns), values_(replicates * columns, 0.0)
    {
    }

    std::size_t replicates() const noexcept { return replicates_; }
    std::size_t columns() const noexcept { return columns_; }

    double& at(std::size_t replicate, std::size_t column) { return values_[column * replicates_ + replicate]; }
    double at(std::size_t replicate, std::size_t column) const { return values_[column * replicates_ + replicate]; }

    std::span<const double> column(std::size_t c) const
    {
        return std::span<const double>(values_).subspan(c * replicates_, replicates_);
    }

private:
    std::size_t replicates_;
    std::size_t columns_;
    std::vector<double> values_;
};

struct Summary {
    double mean = 0.0;
    // Standard error of the mean (sample SD / sqrt(R)); 0 for R < 2.
    double std_error = 0.0;
};

Summary summarize(std::span<const double> values);
// Summary of a[r] - b[r].
Summary summarize_difference(std::span<const double> a, std::span<const double> b);

// Resolves 0 to the hardware concurrency.
unsigned resolve_threads(unsigned requested);

/// Fills one row per replicate by calling fn(r, row) with contiguous blocks of
/// replicates on each thread. The first exception (lowest replicate) is
/// rethrown. The table is identical for every thread count as long as fn
/// derives its randomness from r alone.
ReplicateTable run_replicates(std::size_t replicates, std::size_t columns, unsigned threads,
                              const std::function<void(std::size_t, std::span<double>)>& fn);

// Produces the dataset for replicate r.
using ReplicateSource = std::function<Dataset(std::uint64_t)>;

enum class TruthMode {
    // mu and worker variances drawn once; only the noise changes per replicate.
    Fixed,
    // mu, worker variances and noise all redrawn per replicate.
    Fresh,
};

ReplicateSource synthetic_replicates(SyntheticSpec spec, TruthMode mode);

} // namespace ebtd
