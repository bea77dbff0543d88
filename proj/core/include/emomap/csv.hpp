#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace emomap::csv {

using Row = std::vector<std::string>;

/// One physical record read from a delimited file.
struct Record {
    Row fields;
    std::size_t line = 0;  // 1-based line where the record starts
    bool malformed = false;
    std::string problem;
};

/// RFC 4180 style reader: quoted fields may contain the delimiter, newlines
/// and doubled quotes. CRLF line endings are accepted.
class Reader {
public:
    explicit Reader(std::istream& in, char delimiter = ',');

    /// Next record, or nullopt at end of input. Blank lines are skipped.
    std::optional<Record> next();

private:
    std::istream& in_;
    char delim_;
    std::size_t line_ = 0;
};

/// Reads a whole file; throws IoError if it cannot be opened.
std::vector<Record> read_file(const std::string& path, char delimiter = ',');

/// Quotes a field when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const Row& row, char delimiter = ',');

/// Index of `name` in a header row, or nullopt.
std::optional<std::size_t> column(const Row& header, std::string_view name);

}  // namespace emomap::csv
