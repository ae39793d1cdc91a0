#include "lcausal/frame.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lcausal/error.hpp"

namespace lcausal {

std::string to_string(ColumnKind kind)
{
    return kind == ColumnKind::binary ? "binary" : "continuous";
}

void Frame::set_column(const std::string& name, ColumnKind kind, std::vector<double> values)
{
    if (name.empty()) throw InputError("column name must be nonempty");
    if (values.empty()) throw InputError("column '" + name + "' has no rows");
    const bool replacing = has(name);
    const bool only_column = replacing && columns_.size() == 1;
    if (!columns_.empty() && !only_column && values.size() != n_rows_) {
        throw InputError("column '" + name + "' has " + std::to_string(values.size()) +
                         " rows, frame has " + std::to_string(n_rows_));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw InputError("column '" + name + "' contains a non-finite value");
        if (kind == ColumnKind::binary && v != 0.0 && v != 1.0) {
            throw InputError("binary column '" + name + "' contains value " + std::to_string(v));
        }
    }
    if (has_clusters() && values.size() != cluster_codes_.size()) {
        throw InputError("column '" + name + "' length does not match cluster labels");
    }
    n_rows_ = values.size();
    if (replacing) {
        columns_[index_.at(name)] = Column{kind, std::move(values)};
    } else {
        index_.emplace(name, columns_.size());
        names_.push_back(name);
        columns_.push_back(Column{kind, std::move(values)});
    }
}

const Column& Frame::column(const std::string& name) const
{
    const auto it = index_.find(name);
    if (it == index_.end()) throw InputError("unknown column '" + name + "'");
    return columns_[it->second];
}

void Frame::set_clusters(const std::vector<std::string>& labels)
{
    std::unordered_map<std::string, std::size_t> codes;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
        if (label.empty()) throw InputError("missing cluster label");
        const auto [it, inserted] = codes.emplace(label, codes.size());
        out.push_back(it->second);
    }
    set_cluster_codes(std::move(out));
}

void Frame::set_cluster_codes(std::vector<std::size_t> codes)
{
    if (!columns_.empty() && codes.size() != n_rows_) {
        throw InputError("cluster labels must cover every row");
    }
    // Re-densify in order of first appearance.
    std::unordered_map<std::size_t, std::size_t> dense;
    for (auto& c : codes) {
        const auto [it, inserted] = dense.emplace(c, dense.size());
        c = it->second;
    }
    n_clusters_ = dense.size();
    cluster_codes_ = std::move(codes);
    if (columns_.empty()) n_rows_ = cluster_codes_.size();
}

Frame Frame::take_rows(std::span<const std::size_t> rows) const
{
    Frame out;
    out.n_rows_ = rows.size();
    out.names_ = names_;
    out.index_ = index_;
    out.columns_.reserve(columns_.size());
    for (const auto& col : columns_) {
        Column c{col.kind, {}};
        c.values.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) c.values[i] = col.values[rows[i]];
        out.columns_.push_back(std::move(c));
    }
    if (has_clusters()) {
        std::vector<std::size_t> codes(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) codes[i] = cluster_codes_[rows[i]];
        out.set_cluster_codes(std::move(codes));
    }
    return out;
}

Frame Frame::select_columns(const std::vector<std::string>& names) const
{
    Frame out;
    for (const auto& name : names) {
        if (out.has(name)) continue;
        const auto& col = column(name);
        out.set_column(name, col.kind, col.values);
    }
    if (has_clusters()) out.set_cluster_codes(cluster_codes_);
    return out;
}

SchemaKind parse_schema_kind(const std::string& text)
{
    if (text == "continuous") return SchemaKind::continuous;
    if (text == "binary") return SchemaKind::binary;
    if (text == "cluster") return SchemaKind::cluster;
    throw InputError("unknown column kind '" + text + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& cell)
{
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".";
}

double parse_number(const std::string& cell, const std::string& column, std::size_t line)
{
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && cell.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw InputError("non-numeric cell '" + cell + "' in column '" + column + "' at line " +
                         std::to_string(line));
    }
    return value;
}

}  // namespace

LoadResult read_frame(std::istream& in, const Schema& schema)
{
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty input: missing header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = split_csv_line(line);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < header.size(); ++i) position.emplace(trim(header[i]), i);

    std::vector<std::size_t> source(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto it = position.find(schema[j].first);
        if (it == position.end()) throw InputError("column '" + schema[j].first + "' not in header");
        source[j] = it->second;
    }

    std::vector<std::vector<double>> data(schema.size());
    std::vector<std::string> labels;
    bool has_cluster = false;
    for (const auto& [name, kind] : schema) has_cluster = has_cluster || kind == SchemaKind::cluster;

    std::size_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        bool missing = false;
        std::vector<double> row(schema.size(), 0.0);
        std::string label;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const std::string cell = source[j] < cells.size() ? trim(cells[source[j]]) : std::string{};
            if (is_missing(cell)) {
                missing = true;
                continue;
            }
            const auto& [name, kind] = schema[j];
            if (kind == SchemaKind::cluster) {
                label = cell;
                continue;
            }
            row[j] = parse_number(cell, name, line_no);
            if (kind == SchemaKind::binary && row[j] != 0.0 && row[j] != 1.0) {
                throw InputError("binary column '" + name + "' has value '" + cell + "' at line " +
                                 std::to_string(line_no));
            }
        }
        if (missing) {
            ++dropped;
            continue;
        }
        for (std::size_t j = 0; j < schema.size(); ++j) data[j].push_back(row[j]);
        if (has_cluster) labels.push_back(label);
    }

    const std::size_t kept = data.empty() ? labels.size() : data.front().size();
    if (kept == 0) throw InputError("no complete rows after dropping missing values");

    LoadResult result;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& [name, kind] = schema[j];
        if (kind == SchemaKind::cluster) continue;
        result.frame.set_column(name, kind == SchemaKind::binary ? ColumnKind::binary : ColumnKind::continuous,
                                std::move(data[j]));
    }
    if (has_cluster) result.frame.set_clusters(labels);
    result.dropped_rows = dropped;
    return result;
}

LoadResult load_frame(const std::string& path, const Schema& schema)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_frame(in, schema);
}

void write_csv(std::ostream& out, const Frame& frame, const std::string& cluster_column)
{
    const bool clusters = !cluster_column.empty() && frame.has_clusters();
    bool first = true;
    if (clusters) {
        out << cluster_column;
        first = false;
    }
    for (const auto& name : frame.names()) {
        out << (first ? "" : ",") << name;
        first = false;
    }
    out << '\n';
    std::vector<std::span<const double>> cols;
    for (const auto& name : frame.names()) cols.push_back(frame.values(name));
    char buf[64];
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
        first = true;
        if (clusters) {
            out << frame.cluster_codes()[i] + 1;
            first = false;
        }
        for (const auto& col : cols) {
            // Shortest round-trip representation.
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), col[i]);
            out << (first ? "" : ",") << std::string_view(buf, ptr - buf);
            first = false;
        }
        out << '\n';
    }
}

double mean(std::span<const double> x)
{
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x)
{
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::pair<Frame, StandardizationReport> standardize(const Frame& frame,
                                                    const std::vector<std::string>& cols)
{
    Frame out = frame;
    StandardizationReport report;
    for (const auto& name : cols) {
        const auto& col = frame.column(name);
        if (col.kind != ColumnKind::continuous) {
            throw InputError("cannot standardize binary column '" + name + "'");
        }
        const double m = mean(col.values);
        const double sd = sample_sd(col.values);
        if (!(sd > 0.0)) throw InputError("column '" + name + "' has zero variance");
        std::vector<double> z(col.values.size());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = (col.values[i] - m) / sd;
        out.set_column(name, ColumnKind::continuous, std::move(z));
        report.constants[name] = {m, sd};
    }
    return {std::move(out), std::move(report)};
}

Frame destandardize(const Frame& frame, const StandardizationReport& report)
{
    Frame out = frame;
    for (const auto& [name, c] : report.constants) {
        const auto& col = frame.column(name);
        std::vector<double> x(col.values.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = col.values[i] * c.second + c.first;
        out.set_column(name, ColumnKind::continuous, std::move(x));
    }
    return out;
}

Frame log_transform(const Frame& frame, const std::vector<std::string>& cols)
{
    Frame out = frame;
    for (const auto& name : cols) {
        const auto& col = frame.column(name);
        if (col.kind != ColumnKind::continuous) throw InputError("cannot log binary column '" + name + "'");
        std::vector<double> x(col.values.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(col.values[i] > 0.0)) throw InputError("log of non-positive value in '" + name + "'");
            x[i] = std::log(col.values[i]);
        }
        out.set_column(name, ColumnKind::continuous, std::move(x));
    }
    return out;
}

}  // namespace lcausal
