#pragma once

// Synthetic AWG data, dataset CSV I/O, subsampling and question partitioning.

#include "ebtd/core_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ebtd {

struct ConstantTruth {
    double value = 0.0;
};
struct GaussianTruth {
    double mean = 0.0;
    double variance = 1.0;
};
// A fixed truth vector; its length must equal the question count.
struct ExplicitTruth {
    AnswerVector values;
};
using TruthSpec = std::variant<ConstantTruth, GaussianTruth, ExplicitTruth>;

// sigma_i = i for workers i = 1..n.
struct IndexedSigmas {};
// sigma_i^2 ~ N(mean, variance), redrawn while below floor.
struct GaussianSqSigmas {
    double mean = 1.0;
    double variance = 0.5;
    double floor = 0.05;
};
struct ExplicitSigmas {
    VarianceVector variances;
};
using WorkerSigmaSpec = std::variant<IndexedSigmas, GaussianSqSigmas, ExplicitSigmas>;

struct SyntheticSpec {
    TruthSpec truth = GaussianTruth{2.0, 1.0};
    WorkerSigmaSpec sigmas = IndexedSigmas{};
    std::size_t workers = 1;
    std::size_t questions = 1;
    std::uint64_t seed = 0;
};

struct Dataset {
    ObservationMatrix matrix;
    std::optional<AnswerVector> ground_truth;
    // Known only for synthetic data.
    std::optional<VarianceVector> worker_variances;
    // Number of GaussianSq draws rejected for falling below the floor.
    std::size_t variance_redraws = 0;
};

// Stream indices for the three random roles. Monte Carlo code varies these
// per replicate; a plain gen_synthetic(spec) uses all zeros.
struct DrawKeys {
    std::uint64_t truth = 0;
    std::uint64_t variances = 0;
    std::uint64_t noise = 0;
};

/// Draws mu, worker variances and X_ij ~ N(mu_j, sigma_i^2) from keyed
/// streams; bit-identical for identical (spec, keys).
Dataset gen_synthetic(const SyntheticSpec& spec, DrawKeys keys = {});

// The four-worker, four-question worked example with its ground truth and the
// workers' variances relative to it.
Dataset table1_dataset();

inline constexpr const char* kGroundTruthRowId = "__GROUND_TRUTH__";

/// Reads `worker_id,q_<id>,...` with one row per worker and an optional final
/// `__GROUND_TRUTH__` row. Throws Io, ParseError(line, col),
/// DuplicateGroundTruth or EmptyMatrix.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);

/// Writes the same format with round-trip (17 significant digit) precision.
void save_csv(const Dataset& ds, const std::filesystem::path& path);
std::string format_csv(const Dataset& ds);

/// Uniform without-replacement sample of n workers and m questions in draw
/// order; ground truth and variances are sliced consistently.
/// Throws RequestTooLarge when n or m exceeds the dataset.
Dataset subsample(const Dataset& ds, std::size_t n, std::size_t m, std::uint64_t seed);

enum class PartitionKey { GroundTruth, Aggregate };

struct QuestionBucket {
    Dataset data;
    // Original column indices in their original order.
    std::vector<std::size_t> questions;
    // Sample variance of the key over the bucket; empty for singletons.
    std::optional<double> key_sample_variance;
    PartitionKey key = PartitionKey::GroundTruth;
};

/// Sorts questions by ground truth and cuts them into `buckets` contiguous
/// groups of near-equal size; each bucket keeps its columns in original order,
/// so one bucket is the original dataset. Throws NoGroundTruth without ground
/// truth.
std::vector<QuestionBucket> partition_questions(const Dataset& ds, std::size_t buckets);

/// Same, keyed by a caller-supplied vector (typically aggregated answers when
/// no ground truth exists); buckets are labelled PartitionKey::Aggregate.
std::vector<QuestionBucket> partition_questions_by(const Dataset& ds, std::size_t buckets,
                                                   const AnswerVector& key);

} // namespace ebtd
