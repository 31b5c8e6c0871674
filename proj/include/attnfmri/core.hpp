#ifndef ATTNFMRI_CORE_HPP
#define ATTNFMRI_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

/**
 * @file core.hpp
 *
 * @brief Shared numeric aliases, the error type and seed derivation.
 */

namespace attnfmri {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Random engine used everywhere. `std::mt19937_64` has a fully specified
 * output sequence, so a seed pins every stream.
 */
using Rng = std::mt19937_64;

/**
 * Every failure mode that a caller might want to branch on.
 */
enum class ErrorCode {
    // data_model
    RowCountMismatch,
    NonNumericCell,
    NonFiniteValue,
    DuplicateIndex,
    GapInIndices,
    EmptyName,
    Asymmetric,
    OutOfRangeEntry,
    Io,
    Format,
    // synth
    InvalidSpec,
    // fcn
    ZeroVarianceRow,
    PerfectCorrelation,
    PerplexityTooLarge,
    TooFewNeighbors,
    EmptyEmbedding,
    InvalidParams,
    // attention
    DimensionMismatch,
    SingleClassDataset,
    TooFewSubjects,
    // group features / summary
    InconsistentR,
    EmptyCandidates,
    UnknownFormat,
    // lsirm
    NonPositiveVariance,
    InvalidConfig,
    EmptyChain,
    // cli
    UnknownKey,
    TypeMismatch,
    MissingRequired,
    StageFailure
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::RowCountMismatch: return "RowCountMismatch";
        case ErrorCode::NonNumericCell: return "NonNumericCell";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::DuplicateIndex: return "DuplicateIndex";
        case ErrorCode::GapInIndices: return "GapInIndices";
        case ErrorCode::EmptyName: return "EmptyName";
        case ErrorCode::Asymmetric: return "Asymmetric";
        case ErrorCode::OutOfRangeEntry: return "OutOfRangeEntry";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Format: return "Format";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::ZeroVarianceRow: return "ZeroVarianceRow";
        case ErrorCode::PerfectCorrelation: return "PerfectCorrelation";
        case ErrorCode::PerplexityTooLarge: return "PerplexityTooLarge";
        case ErrorCode::TooFewNeighbors: return "TooFewNeighbors";
        case ErrorCode::EmptyEmbedding: return "EmptyEmbedding";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::SingleClassDataset: return "SingleClassDataset";
        case ErrorCode::TooFewSubjects: return "TooFewSubjects";
        case ErrorCode::InconsistentR: return "InconsistentR";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::UnknownFormat: return "UnknownFormat";
        case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::EmptyChain: return "EmptyChain";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::TypeMismatch: return "TypeMismatch";
        case ErrorCode::MissingRequired: return "MissingRequired";
        case ErrorCode::StageFailure: return "StageFailure";
    }
    return "Unknown";
}

/**
 * Exception thrown by every operation in the library.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/**
 * @cond
 */
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}
/**
 * @endcond
 */

/**
 * Derive an independent stream seed from a parent seed and an ordinal.
 * Child streams do not depend on how many siblings exist.
 */
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t ordinal) {
    return splitmix64(splitmix64(parent) ^ splitmix64(ordinal + 0x632be59bd9b4e019ULL));
}

/**
 * Derive a stream seed from a parent seed and a stage or role name.
 */
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view name) {
    return derive_seed(parent, fnv1a(name));
}

}

#endif
