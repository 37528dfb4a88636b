#ifndef NMFRANK_IO_HPP
#define NMFRANK_IO_HPP

#include <iosfwd>
#include <string>

#include "nmfrank/types.hpp"

namespace nmfrank {

enum class TableFormat { csv, tsv };

// Loads a non-negative matrix from an RFC-4180-style delimited file. The
// first row / first column are treated as labels when non-numeric. Numbers
// are parsed in the C locale. All-zero rows are removed and recorded in
// DataMatrix::removed_rows. Throws DataError naming the offending cell
// (1-based row,col of the numeric block) on parse failures or negative
// entries, and when nothing remains after zero-row removal.
DataMatrix load_matrix(const std::string& path, TableFormat format);
DataMatrix parse_matrix(std::istream& in, TableFormat format);

// Writes values (and any labels) back out. Numbers use the shortest decimal
// representation that round-trips exactly, so save-then-load reproduces the
// matrix bit for bit.
void save_matrix(const DataMatrix& m, const std::string& path, TableFormat format);
void write_matrix(const DataMatrix& m, std::ostream& out, TableFormat format);

// Shortest exact decimal representation of a double.
std::string format_double(double v);

}  // namespace nmfrank

#endif  // NMFRANK_IO_HPP
