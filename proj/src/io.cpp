#include "nmfrank/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace nmfrank {

namespace {

std::vector<std::string> split_record(const std::string& line, char delim, std::size_t lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted)
        throw DataError("unterminated quote on line " + std::to_string(lineno));
    fields.push_back(cur);
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& raw) {
    std::string s = trimmed(raw);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

DataMatrix parse_matrix(std::istream& in, TableFormat format) {
    const char delim = format == TableFormat::csv ? ',' : '\t';

    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && rows.empty()) continue;
        if (line.empty()) continue;
        auto fields = split_record(line, delim, lineno);
        if (!rows.empty() && fields.size() != rows.front().size())
            throw DataError("line " + std::to_string(lineno) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(rows.front().size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw DataError("no data rows found");

    const std::size_t ncols = rows.front().size();

    // Header row / label column detection: a leading row or column is a
    // label block when any of its non-corner cells fails numeric parsing.
    bool header_row = false;
    for (std::size_t j = 1; j < ncols; ++j)
        if (!parse_number(rows[0][j])) header_row = true;
    bool label_col = false;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!parse_number(rows[i][0])) label_col = true;
    if (!header_row && !label_col && !parse_number(rows[0][0])) {
        if (rows.size() == 1)
            label_col = true;
        else if (ncols == 1)
            header_row = true;
        else
            header_row = label_col = true;
    }

    const std::size_t r0 = header_row ? 1 : 0;
    const std::size_t c0 = label_col ? 1 : 0;
    if (rows.size() <= r0 || ncols <= c0) throw DataError("no numeric cells found");

    DataMatrix m;
    if (header_row)
        for (std::size_t j = c0; j < ncols; ++j) m.col_labels.push_back(trimmed(rows[0][j]));
    if (label_col)
        for (std::size_t i = r0; i < rows.size(); ++i) m.row_labels.push_back(trimmed(rows[i][0]));

    const Index p = static_cast<Index>(rows.size() - r0);
    const Index n = static_cast<Index>(ncols - c0);
    m.values.resize(p, n);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < n; ++j) {
            const std::string& cell = rows[r0 + i][c0 + j];
            auto v = parse_number(cell);
            std::string where = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
            if (!v)
                throw DataError("cell " + where + " does not parse as a number: '" + cell + "'");
            if (!(*v >= 0.0))
                throw DataError("negative entry at cell " + where + ": " + cell);
            m.values(i, j) = *v;
        }
    }

    m = remove_zero_rows(std::move(m));
    if (m.rows() == 0) throw DataError("matrix is empty after removing all-zero rows");
    return m;
}

DataMatrix load_matrix(const std::string& path, TableFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_matrix(in, format);
}

void write_matrix(const DataMatrix& m, std::ostream& out, TableFormat format) {
    const char delim = format == TableFormat::csv ? ',' : '\t';
    const bool header = !m.col_labels.empty();
    const bool labels = !m.row_labels.empty();
    if (header) {
        if (labels) out << "id" << delim;
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << delim;
            out << m.col_labels[j];
        }
        out << "\n";
    }
    for (Index i = 0; i < m.rows(); ++i) {
        if (labels) out << m.row_labels[i] << delim;
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << delim;
            out << format_double(m.values(i, j));
        }
        out << "\n";
    }
}

void save_matrix(const DataMatrix& m, const std::string& path, TableFormat format) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    write_matrix(m, out, format);
}

}  // namespace nmfrank
