#include "ebtd/experiments.hpp"

#include "ebtd/detail/overloaded.hpp"
#include "ebtd/error.hpp"
#include "ebtd/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ebtd {

namespace {

using detail::overloaded;

std::vector<double> draw_truth(const SyntheticSpec& spec, std::uint64_t key)
{
    const std::size_t m = spec.questions;
    return std::visit(overloaded{
                          [&](const ConstantTruth& t) { return std::vector<double>(m, t.value); },
                          [&](const GaussianTruth& t) {
                              KeyedStream stream(spec.seed, StreamRole::Truth, key);
                              const double sd = std::sqrt(t.variance);
                              std::vector<double> mu(m);
                              for (double& v : mu) {
                                  v = stream.normal(t.mean, sd);
                              }
                              return mu;
                          },
                          [&](const ExplicitTruth& t) {
                              if (t.values.size() != m) {
                                  throw Error(ErrorCode::LengthMismatch,
                                              fmt::format("truth has {} entries for {} questions",
                                                          t.values.size(), m));
                              }
                              return t.values.vec();
                          },
                      },
                      spec.truth);
}

VarianceVector draw_variances(const SyntheticSpec& spec, std::uint64_t key, std::size_t& redraws)
{
    const std::size_t n = spec.workers;
    return std::visit(overloaded{
                          [&](const IndexedSigmas&) {
                              std::vector<double> v(n);
                              for (std::size_t i = 0; i < n; ++i) {
                                  const double sigma = static_cast<double>(i + 1);
                                  v[i] = sigma * sigma;
                              }
                              return VarianceVector(std::move(v));
                          },
                          [&](const GaussianSqSigmas& g) {
                              KeyedStream stream(spec.seed, StreamRole::WorkerVariance, key);
                              const double sd = std::sqrt(g.variance);
                              std::vector<double> v(n);
                              for (double& s : v) {
                                  s = stream.normal(g.mean, sd);
                                  while (s < g.floor) {
                                      ++redraws;
                                      s = stream.normal(g.mean, sd);
                                  }
                              }
                              return VarianceVector(std::move(v));
                          },
                          [&](const ExplicitSigmas& e) {
                              if (e.variances.size() != n) {
                                  throw Error(ErrorCode::LengthMismatch,
                                              fmt::format("{} explicit variances for {} workers",
                                                          e.variances.size(), n));
                              }
                              return e.variances;
                          },
                      },
                      spec.sigmas);
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_cells(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(trim(cell));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse_cell(const std::string& cell, std::size_t line, std::size_t col)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(line, col, "not a number: '" + cell + "'");
    }
    if (!std::isfinite(v)) {
        throw ParseError(line, col, "non-finite value '" + cell + "'");
    }
    return v;
}

Dataset slice(const Dataset& ds, std::span<const std::size_t> rows, std::span<const std::size_t> cols)
{
    const ObservationMatrix& x = ds.matrix;
    std::vector<double> values;
    values.reserve(rows.size() * cols.size());
    for (std::size_t i : rows) {
        for (std::size_t j : cols) {
            values.push_back(x(i, j));
        }
    }
    std::vector<std::string> worker_ids;
    std::vector<std::string> question_ids;
    if (x.has_worker_ids()) {
        for (std::size_t i : rows) {
            worker_ids.push_back(x.worker_id(i));
        }
    }
    if (x.has_question_ids()) {
        for (std::size_t j : cols) {
            question_ids.push_back(x.question_id(j));
        }
    }
    Dataset out;
    out.matrix = validate_matrix(std::move(values), rows.size(), cols.size(), std::move(worker_ids),
                                 std::move(question_ids));
    if (ds.ground_truth) {
        std::vector<double> gt;
        for (std::size_t j : cols) {
            gt.push_back((*ds.ground_truth)[j]);
        }
        out.ground_truth = AnswerVector(std::move(gt));
    }
    if (ds.worker_variances) {
        std::vector<double> v;
        for (std::size_t i : rows) {
            v.push_back((*ds.worker_variances)[i]);
        }
        out.worker_variances = VarianceVector(std::move(v));
    }
    return out;
}

// First k entries of a Fisher-Yates shuffle of 0..total-1.
std::vector<std::size_t> draw_without_replacement(KeyedStream& stream, std::size_t total, std::size_t k)
{
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t pick = i + static_cast<std::size_t>(stream.below(total - i));
        std::swap(idx[i], idx[pick]);
    }
    idx.resize(k);
    return idx;
}

std::vector<QuestionBucket> partition_impl(const Dataset& ds, std::size_t buckets,
                                           const AnswerVector& key, PartitionKey label)
{
    const std::size_t m = ds.matrix.questions();
    if (key.size() != m) {
        throw Error(ErrorCode::LengthMismatch, "partition key length differs from question count");
    }
    if (buckets == 0 || buckets > m) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("bucket count must be in [1, {}], got {}", m, buckets));
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

    std::vector<std::size_t> all_rows(ds.matrix.workers());
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

    std::vector<QuestionBucket> out;
    const std::size_t base = m / buckets;
    const std::size_t extra = m % buckets;
    std::size_t start = 0;
    for (std::size_t b = 0; b < buckets; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        std::vector<std::size_t> cols(order.begin() + static_cast<std::ptrdiff_t>(start),
                                      order.begin() + static_cast<std::ptrdiff_t>(start + size));
        start += size;
        std::sort(cols.begin(), cols.end());
        std::vector<double> key_values;
        for (std::size_t j : cols) {
            key_values.push_back(key[j]);
        }
        QuestionBucket bucket;
        bucket.data = slice(ds, all_rows, cols);
        bucket.key_sample_variance = dispersion(key_values).sample_variance;
        bucket.questions = std::move(cols);
        bucket.key = label;
        out.push_back(std::move(bucket));
    }
    return out;
}

} // namespace

Dataset gen_synthetic(const SyntheticSpec& spec, DrawKeys keys)
{
    if (spec.workers == 0 || spec.questions == 0) {
        throw Error(ErrorCode::EmptyMatrix, "synthetic spec needs n >= 1 and m >= 1");
    }
    Dataset ds;
    const std::vector<double> mu = draw_truth(spec, keys.truth);
    ds.worker_variances = draw_variances(spec, keys.variances, ds.variance_redraws);

    const std::size_t n = spec.workers;
    const std::size_t m = spec.questions;
    KeyedStream noise(spec.seed, StreamRole::Noise, keys.noise);
    std::vector<double> values(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double sd = std::sqrt((*ds.worker_variances)[i]);
        for (std::size_t j = 0; j < m; ++j) {
            values[i * m + j] = noise.normal(mu[j], sd);
        }
    }
    ds.matrix = validate_matrix(std::move(values), n, m);
    ds.ground_truth = AnswerVector(mu);
    return ds;
}

Dataset table1_dataset()
{
    Dataset ds;
    ds.matrix = validate_matrix({20, 2, 3, 4, 10, 11, 18, 14, 8, 11, 23, 19, 6, 13, 7, 3}, 4, 4,
                                {"1", "2", "3", "4"}, {"1", "2", "3", "4"});
    ds.ground_truth = AnswerVector{10, 9, 12, 16};
    ds.worker_variances = VarianceVector{93.5, 11, 34.5, 56.5};
    return ds;
}

Dataset parse_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> question_ids;
    std::vector<std::string> worker_ids;
    std::vector<double> values;
    std::optional<AnswerVector> ground_truth;
    bool have_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const std::vector<std::string> cells = split_cells(line);
        if (!have_header) {
            if (cells.empty() || cells[0] != "worker_id") {
                throw ParseError(line_no, 1, "header must start with 'worker_id'");
            }
            for (std::size_t c = 1; c < cells.size(); ++c) {
                if (cells[c].rfind("q_", 0) != 0 || cells[c].size() == 2) {
                    throw ParseError(line_no, c + 1, "question column must be named q_<id>, got '" + cells[c] + "'");
                }
                question_ids.push_back(cells[c].substr(2));
            }
            have_header = true;
            continue;
        }
        if (cells.size() != question_ids.size() + 1) {
            throw ParseError(line_no, std::min(cells.size(), question_ids.size() + 1) + 1,
                             fmt::format("expected {} cells, found {}", question_ids.size() + 1, cells.size()));
        }
        if (cells[0] == kGroundTruthRowId) {
            if (ground_truth) {
                throw Error(ErrorCode::DuplicateGroundTruth,
                            fmt::format("second ground-truth row at line {}", line_no));
            }
            std::vector<double> gt;
            for (std::size_t c = 1; c < cells.size(); ++c) {
                gt.push_back(parse_cell(cells[c], line_no, c + 1));
            }
            ground_truth = AnswerVector(std::move(gt));
            continue;
        }
        if (ground_truth) {
            throw ParseError(line_no, 1, "the ground-truth row must be the last row");
        }
        if (cells[0].empty()) {
            throw ParseError(line_no, 1, "empty worker id");
        }
        worker_ids.push_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            values.push_back(parse_cell(cells[c], line_no, c + 1));
        }
    }
    if (!have_header) {
        throw ParseError(1, 1, "missing header");
    }
    Dataset ds;
    const std::size_t n = worker_ids.size();
    const std::size_t m = question_ids.size();
    ds.matrix = validate_matrix(std::move(values), n, m, std::move(worker_ids), std::move(question_ids));
    ds.ground_truth = std::move(ground_truth);
    return ds;
}

Dataset load_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_csv(buffer.str());
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.col(), e.detail() + " in " + path.string());
    }
}

std::string format_csv(const Dataset& ds)
{
    const ObservationMatrix& x = ds.matrix;
    std::string out = "worker_id";
    for (std::size_t j = 0; j < x.questions(); ++j) {
        out += ",q_" + x.question_id(j);
    }
    out += '\n';
    for (std::size_t i = 0; i < x.workers(); ++i) {
        out += x.worker_id(i);
        for (double v : x.row(i)) {
            out += fmt::format(",{:.17g}", v);
        }
        out += '\n';
    }
    if (ds.ground_truth) {
        out += kGroundTruthRowId;
        for (double v : *ds.ground_truth) {
            out += fmt::format(",{:.17g}", v);
        }
        out += '\n';
    }
    return out;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    out << format_csv(ds);
}

Dataset subsample(const Dataset& ds, std::size_t n, std::size_t m, std::uint64_t seed)
{
    const std::size_t rows = ds.matrix.workers();
    const std::size_t cols = ds.matrix.questions();
    if (n > rows || m > cols) {
        throw Error(ErrorCode::RequestTooLarge,
                    fmt::format("requested {}x{} from a {}x{} dataset", n, m, rows, cols));
    }
    if (n == 0 || m == 0) {
        throw Error(ErrorCode::EmptyMatrix, "subsample needs n >= 1 and m >= 1");
    }
    KeyedStream stream(seed, StreamRole::Subsample, 0);
    const std::vector<std::size_t> pick_rows = draw_without_replacement(stream, rows, n);
    const std::vector<std::size_t> pick_cols = draw_without_replacement(stream, cols, m);
    return slice(ds, pick_rows, pick_cols);
}

std::vector<QuestionBucket> partition_questions(const Dataset& ds, std::size_t buckets)
{
    if (!ds.ground_truth) {
        throw Error(ErrorCode::NoGroundTruth, "partitioning by ground truth needs a ground-truth row");
    }
    return partition_impl(ds, buckets, *ds.ground_truth, PartitionKey::GroundTruth);
}

std::vector<QuestionBucket> partition_questions_by(const Dataset& ds, std::size_t buckets,
                                                   const AnswerVector& key)
{
    return partition_impl(ds, buckets, key, PartitionKey::Aggregate);
}

} // namespace ebtd
