#include "ebtd/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace ebtd {

Summary summarize(std::span<const double> values)
{
    Summary s;
    const std::size_t r = values.size();
    if (r == 0) {
        return s;
    }
    s.mean = pairwise_sum(values) / static_cast<double>(r);
    if (r < 2) {
        return s;
    }
    std::vector<double> sq(r);
    for (std::size_t k = 0; k < r; ++k) {
        const double d = values[k] - s.mean;
        sq[k] = d * d;
    }
    const double variance = pairwise_sum(sq) / static_cast<double>(r - 1);
    s.std_error = std::sqrt(variance / static_cast<double>(r));
    return s;
}

Summary summarize_difference(std::span<const double> a, std::span<const double> b)
{
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        d[k] = a[k] - b[k];
    }
    return summarize(d);
}

unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) {
        return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ReplicateTable run_replicates(std::size_t replicates, std::size_t columns, unsigned threads,
                              const std::function<void(std::size_t, std::span<double>)>& fn)
{
    ReplicateTable table(replicates, columns);
    const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(replicates, 1));

    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::size_t first_error_replicate = replicates;

    auto run_block = [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(columns);
        for (std::size_t r = begin; r < end; ++r) {
            try {
                std::fill(row.begin(), row.end(), 0.0);
                fn(r, row);
                for (std::size_t c = 0; c < columns; ++c) {
                    table.at(r, c) = row[c];
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (r < first_error_replicate) {
                    first_error_replicate = r;
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };

    if (workers <= 1) {
        run_block(0, replicates);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (replicates + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(replicates, w * chunk);
            const std::size_t end = std::min(replicates, begin + chunk);
            pool.emplace_back(run_block, begin, end);
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    return table;
}

ReplicateSource synthetic_replicates(SyntheticSpec spec, TruthMode mode)
{
    return [spec = std::move(spec), mode](std::uint64_t r) {
        DrawKeys keys;
        keys.noise = r;
        if (mode == TruthMode::Fresh) {
            keys.truth = r;
            keys.variances = r;
        }
        return gen_synthetic(spec, keys);
    };
}

} // namespace ebtd
