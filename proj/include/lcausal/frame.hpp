#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lcausal {

enum class ColumnKind { continuous, binary };

std::string to_string(ColumnKind kind);

struct Column {
    ColumnKind kind = ColumnKind::continuous;
    std::vector<double> values;

    bool operator==(const Column&) const = default;
};

/// Columnar dataset. Every column has n_rows finite values; binary columns
/// hold only 0/1. Optional cluster labels group rows (twin pairs, families).
class Frame {
public:
    Frame() = default;

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    bool empty() const { return columns_.empty(); }

    /// Appends a column, or replaces an existing one of the same name.
    void set_column(const std::string& name, ColumnKind kind, std::vector<double> values);

    bool has(const std::string& name) const { return index_.contains(name); }
    const Column& column(const std::string& name) const;
    std::span<const double> values(const std::string& name) const { return column(name).values; }
    ColumnKind kind(const std::string& name) const { return column(name).kind; }
    const std::vector<std::string>& names() const { return names_; }

    bool has_clusters() const { return !cluster_codes_.empty(); }
    /// Cluster codes are dense integers 0..n_clusters()-1 in order of first appearance.
    const std::vector<std::size_t>& cluster_codes() const { return cluster_codes_; }
    std::size_t n_clusters() const { return n_clusters_; }
    void set_clusters(const std::vector<std::string>& labels);
    void set_cluster_codes(std::vector<std::size_t> codes);

    /// Rows in the given order (repeats allowed). Cluster codes are carried over.
    Frame take_rows(std::span<const std::size_t> rows) const;
    Frame select_columns(const std::vector<std::string>& names) const;

    bool operator==(const Frame& other) const = default;

private:
    std::size_t n_rows_ = 0;
    std::vector<std::string> names_;
    std::vector<Column> columns_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> cluster_codes_;
    std::size_t n_clusters_ = 0;
};

/// Column kinds accepted by load_frame. A "cluster" entry names the column
/// holding cluster labels (kept as strings, not as a data column).
enum class SchemaKind { continuous, binary, cluster };

using Schema = std::vector<std::pair<std::string, SchemaKind>>;

SchemaKind parse_schema_kind(const std::string& text);

struct LoadResult {
    Frame frame;
    std::size_t dropped_rows = 0;
};

/// Reads comma-separated text with a header row. Rows with a missing cell
/// (empty, NA, NaN or ".") in any schema column are dropped.
LoadResult load_frame(const std::string& path, const Schema& schema);
LoadResult read_frame(std::istream& in, const Schema& schema);

void write_csv(std::ostream& out, const Frame& frame, const std::string& cluster_column = "");

struct StandardizationReport {
    /// name -> (mean, sd), sd with denominator n-1.
    std::map<std::string, std::pair<double, double>> constants;
};

std::pair<Frame, StandardizationReport> standardize(const Frame& frame,
                                                    const std::vector<std::string>& cols);
Frame destandardize(const Frame& frame, const StandardizationReport& report);

/// Natural log of strictly positive continuous columns, in place.
Frame log_transform(const Frame& frame, const std::vector<std::string>& cols);

double mean(std::span<const double> x);
/// Sample standard deviation, denominator n-1.
double sample_sd(std::span<const double> x);

}  // namespace lcausal
