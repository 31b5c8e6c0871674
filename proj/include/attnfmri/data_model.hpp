#ifndef ATTNFMRI_DATA_MODEL_HPP
#define ATTNFMRI_DATA_MODEL_HPP

#include "aal116.hpp"
#include "core.hpp"
#include "text.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

/**
 * @file data_model.hpp
 *
 * @brief ROI tables, BOLD matrices, cohorts and adjacency matrices, with their file formats.
 */

namespace attnfmri {

struct RoiEntry {
    int index = 0; ///< 1-based.
    std::string name;

    bool operator==(const RoiEntry&) const = default;
};

/**
 * Ordered ROI labels. Indices are always 1..R and names are unique.
 */
class RoiTable {
public:
    RoiTable() = default;

    /**
     * @param entries Entries in any order; they are sorted by index.
     * Throws `DuplicateIndex`, `GapInIndices` or `EmptyName`.
     */
    explicit RoiTable(std::vector<RoiEntry> entries) : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(), [](const RoiEntry& a, const RoiEntry& b) { return a.index < b.index; });
        std::set<std::string> names;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& e = entries_[i];
            if (i > 0 && entries_[i - 1].index == e.index) {
                throw Error(ErrorCode::DuplicateIndex, "ROI index " + std::to_string(e.index) + " appears twice");
            }
            if (e.index != static_cast<int>(i) + 1) {
                throw Error(ErrorCode::GapInIndices, "expected ROI index " + std::to_string(i + 1) + ", found " + std::to_string(e.index));
            }
            if (trim(e.name).empty()) {
                throw Error(ErrorCode::EmptyName, "ROI " + std::to_string(e.index) + " has an empty name");
            }
            if (!names.insert(e.name).second) {
                throw Error(ErrorCode::Format, "ROI name '" + e.name + "' is not unique");
            }
        }
    }

    /// The bundled AAL-116 table.
    static RoiTable aal116() {
        return default_for(aal116_labels.size());
    }

    /**
     * First R AAL labels when R <= 116, otherwise "ROI_1".."ROI_R".
     */
    static RoiTable default_for(std::size_t r) {
        std::vector<RoiEntry> entries;
        entries.reserve(r);
        for (std::size_t i = 0; i < r; ++i) {
            std::string name = r <= aal116_labels.size() ? std::string(aal116_labels[i]) : "ROI_" + std::to_string(i + 1);
            entries.push_back({static_cast<int>(i) + 1, std::move(name)});
        }
        return RoiTable(std::move(entries));
    }

    std::size_t size() const { return entries_.size(); }
    const std::vector<RoiEntry>& entries() const { return entries_; }

    /// Name of the ROI at 0-based position `i`.
    const std::string& name(std::size_t i) const { return entries_.at(i).name; }

    bool operator==(const RoiTable&) const = default;

private:
    std::vector<RoiEntry> entries_;
};

/**
 * Parse a two-column `index,name` CSV. A first line whose index cell is not
 * an integer is treated as a header.
 */
inline RoiTable parse_roi_labels(const std::string& content) {
    auto lines = nonempty_lines(content);
    std::vector<RoiEntry> entries;
    for (std::size_t l = 0; l < lines.size(); ++l) {
        auto cells = split(lines[l], ',');
        auto idx = parse_int(cells[0]);
        if (!idx) {
            if (l == 0) {
                continue;
            }
            throw Error(ErrorCode::Format, "line " + std::to_string(l + 1) + ": ROI index is not an integer");
        }
        if (cells.size() != 2) {
            throw Error(ErrorCode::Format, "line " + std::to_string(l + 1) + ": expected 'index,name'");
        }
        entries.push_back({static_cast<int>(*idx), std::string(trim(cells[1]))});
    }
    return RoiTable(std::move(entries));
}

/// Loads ROI labels from a file, or returns the bundled AAL-116 table when `path` is empty.
inline RoiTable load_roi_labels(const std::string& path = "") {
    if (path.empty()) {
        return RoiTable::aal116();
    }
    return parse_roi_labels(read_file(path));
}

inline std::string write_roi_labels(const RoiTable& table) {
    std::string out = "index,name\n";
    for (const auto& e : table.entries()) {
        out += std::to_string(e.index) + "," + e.name + "\n";
    }
    return out;
}

/**
 * Per-subject ROI x time signal matrix.
 */
struct BoldMatrix {
    std::string subject_id;
    std::string group;
    Matrix values; ///< R x T.
    std::shared_ptr<const RoiTable> roi_table;

    Eigen::Index rois() const { return values.rows(); }
    Eigen::Index timepoints() const { return values.cols(); }
};

/**
 * Throws unless R >= 2, T >= 3, all values are finite and the ROI table (if any) matches R.
 */
inline void validate_bold(const BoldMatrix& b) {
    if (b.values.rows() < 2 || b.values.cols() < 3) {
        throw Error(ErrorCode::InvalidParams, "BOLD matrix for '" + b.subject_id + "' must have at least 2 ROIs and 3 timepoints");
    }
    if (b.roi_table && b.roi_table->size() != static_cast<std::size_t>(b.values.rows())) {
        throw Error(ErrorCode::RowCountMismatch, "BOLD matrix for '" + b.subject_id + "' has " + std::to_string(b.values.rows()) +
                                                     " rows but the ROI table has " + std::to_string(b.roi_table->size()));
    }
    if (!b.values.allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "BOLD matrix for '" + b.subject_id + "' contains non-finite values");
    }
}

/**
 * Parse a BOLD CSV (rows = ROIs, columns = timepoints). An optional first row
 * of timepoint labels is recognised by containing no numeric cell.
 */
inline BoldMatrix parse_bold_csv(const std::string& content, std::shared_ptr<const RoiTable> roi_table, std::string subject_id = "", std::string group = "") {
    auto lines = nonempty_lines(content);
    std::size_t first = 0;
    if (!lines.empty()) {
        auto cells = split(lines[0], ',');
        bool any_numeric = std::any_of(cells.begin(), cells.end(), [](std::string_view c) { return parse_double(c).has_value(); });
        if (!any_numeric) {
            first = 1;
        }
    }

    const std::size_t nrows = lines.size() - first;
    if (roi_table && nrows != roi_table->size()) {
        throw Error(ErrorCode::RowCountMismatch, "expected " + std::to_string(roi_table->size()) + " ROI rows, found " + std::to_string(nrows));
    }
    if (nrows == 0) {
        throw Error(ErrorCode::RowCountMismatch, "BOLD file has no data rows");
    }

    std::vector<std::vector<double>> rows;
    rows.reserve(nrows);
    for (std::size_t l = first; l < lines.size(); ++l) {
        auto cells = split(lines[l], ',');
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::string_view cell = trim(cells[c]);
            auto v = parse_double(cell);
            if (!v) {
                throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(l + 1) + ", column " + std::to_string(c + 1) + ": '" + std::string(cell) + "'");
            }
            if (!std::isfinite(*v)) {
                throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(l + 1) + ", column " + std::to_string(c + 1));
            }
            row.push_back(*v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(ErrorCode::Format, "row " + std::to_string(l + 1) + " has " + std::to_string(row.size()) + " columns, expected " + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }

    BoldMatrix out;
    out.subject_id = std::move(subject_id);
    out.group = std::move(group);
    out.roi_table = roi_table ? std::move(roi_table) : std::make_shared<const RoiTable>(RoiTable::default_for(rows.size()));
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    validate_bold(out);
    return out;
}

/**
 * Load a BOLD CSV. The subject id defaults to the file stem.
 */
inline BoldMatrix load_bold_csv(const std::string& path, std::shared_ptr<const RoiTable> roi_table, std::string subject_id = "", std::string group = "") {
    if (subject_id.empty()) {
        subject_id = std::filesystem::path(path).stem().string();
    }
    return parse_bold_csv(read_file(path), std::move(roi_table), std::move(subject_id), std::move(group));
}

inline std::string write_bold_csv(const BoldMatrix& b) {
    std::string out;
    for (Eigen::Index i = 0; i < b.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.values.cols(); ++j) {
            if (j) {
                out += ',';
            }
            out += format_double(b.values(i, j));
        }
        out += '\n';
    }
    return out;
}

struct CohortGroup {
    std::string label;
    std::vector<BoldMatrix> subjects;
};

/**
 * Subjects grouped by label, in first-seen label order.
 */
struct Cohort {
    std::vector<CohortGroup> groups;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& g : groups) {
            n += g.subjects.size();
        }
        return n;
    }

    const CohortGroup* find(const std::string& label) const {
        for (const auto& g : groups) {
            if (g.label == label) {
                return &g;
            }
        }
        return nullptr;
    }
};

/**
 * Throws unless subject ids are unique and every subject uses the same ROI table.
 */
inline void validate_cohort(const Cohort& c) {
    std::set<std::string> ids;
    const RoiTable* table = nullptr;
    for (const auto& g : c.groups) {
        for (const auto& s : g.subjects) {
            if (!ids.insert(s.subject_id).second) {
                throw Error(ErrorCode::Format, "subject id '" + s.subject_id + "' is not unique in the cohort");
            }
            if (!s.roi_table) {
                throw Error(ErrorCode::Format, "subject '" + s.subject_id + "' has no ROI table");
            }
            if (table == nullptr) {
                table = s.roi_table.get();
            } else if (!(*table == *s.roi_table)) {
                throw Error(ErrorCode::InconsistentR, "subject '" + s.subject_id + "' uses a different ROI table");
            }
        }
    }
}

enum class AdjacencyKind { binary, weighted };

inline const char* to_string(AdjacencyKind k) { return k == AdjacencyKind::binary ? "binary" : "weighted"; }

/**
 * Symmetric R x R connectivity matrix with zero diagonal.
 */
struct FcnAdjacency {
    std::string subject_id;
    AdjacencyKind kind = AdjacencyKind::binary;
    Matrix values;

    Eigen::Index size() const { return values.rows(); }
};

inline constexpr double adjacency_symmetry_tolerance = 1e-9;

/**
 * Symmetrize (by averaging), zero the diagonal and infer the kind.
 * Throws `Asymmetric` beyond 1e-9 and `OutOfRangeEntry` for entries outside [0,1].
 */
inline FcnAdjacency validate_adjacency(const Matrix& m, std::string subject_id = "") {
    if (m.rows() != m.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "adjacency must be square");
    }
    if (!m.allFinite()) {
        throw Error(ErrorCode::OutOfRangeEntry, "adjacency contains non-finite entries");
    }
    const double asym = m.rows() ? (m - m.transpose()).cwiseAbs().maxCoeff() : 0.0;
    if (asym > adjacency_symmetry_tolerance) {
        throw Error(ErrorCode::Asymmetric, "max asymmetry " + format_double(asym));
    }

    FcnAdjacency out;
    out.subject_id = std::move(subject_id);
    out.values = 0.5 * (m + m.transpose());
    out.values.diagonal().setZero();

    bool binary = true;
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
            double v = out.values(i, j);
            if (v < 0.0 || v > 1.0) {
                throw Error(ErrorCode::OutOfRangeEntry, "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") = " + format_double(v));
            }
            if (v != 0.0 && v != 1.0) {
                binary = false;
            }
        }
    }
    out.kind = binary ? AdjacencyKind::binary : AdjacencyKind::weighted;
    return out;
}

/// @cond
inline nlohmann::json matrix_rows_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_rows_json(const nlohmann::json& rows) {
    if (!rows.is_array()) {
        throw Error(ErrorCode::Format, "'rows' must be an array of arrays");
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = n ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
    Matrix out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
            throw Error(ErrorCode::Format, "ragged 'rows' at row " + std::to_string(i + 1));
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            out(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
        }
    }
    return out;
}
/// @endcond

inline nlohmann::json adjacency_to_json(const FcnAdjacency& a) {
    return {{"subject_id", a.subject_id}, {"kind", to_string(a.kind)}, {"n", a.size()}, {"rows", matrix_rows_json(a.values)}};
}

/**
 * Reads `{"subject_id", "kind", "n", "rows"}` and re-validates the matrix.
 */
inline FcnAdjacency adjacency_from_json(const nlohmann::json& j) {
    try {
        Matrix m = matrix_from_rows_json(j.at("rows"));
        if (m.rows() != j.at("n").get<Eigen::Index>()) {
            throw Error(ErrorCode::Format, "'n' does not match the number of rows");
        }
        auto out = validate_adjacency(m, j.at("subject_id").get<std::string>());
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "weighted") {
            out.kind = AdjacencyKind::weighted;
        } else if (kind != "binary") {
            throw Error(ErrorCode::Format, "unknown adjacency kind '" + kind + "'");
        } else if (out.kind != AdjacencyKind::binary) {
            throw Error(ErrorCode::OutOfRangeEntry, "adjacency declared binary has non-binary entries");
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, std::string("adjacency JSON: ") + e.what());
    }
}

}

#endif
