#include "emomap/csv.hpp"

#include <fstream>

#include "emomap/error.hpp"

namespace emomap::csv {

Reader::Reader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

std::optional<Record> Reader::next() {
    std::string line;
    while (true) {
        if (!std::getline(in_, line)) return std::nullopt;
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) break;
    }

    Record rec;
    rec.line = line_;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    std::size_t i = 0;

    while (true) {
        if (i >= line.size()) {
            if (in_quotes) {
                // quoted field continues on the next physical line
                std::string more;
                if (!std::getline(in_, more)) {
                    rec.malformed = true;
                    rec.problem = "unterminated quoted field";
                    break;
                }
                ++line_;
                if (!more.empty() && more.back() == '\r') more.pop_back();
                field.push_back('\n');
                line = std::move(more);
                i = 0;
                continue;
            }
            break;
        }
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            field.push_back(c);
            ++i;
            continue;
        }
        if (c == '"') {
            if (field.empty() && !was_quoted) {
                in_quotes = true;
                was_quoted = true;
            } else {
                rec.malformed = true;
                rec.problem = "stray quote inside unquoted field";
                field.push_back(c);
            }
            ++i;
            continue;
        }
        if (c == delim_) {
            rec.fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
            ++i;
            continue;
        }
        if (was_quoted) {
            rec.malformed = true;
            rec.problem = "text after closing quote";
        }
        field.push_back(c);
        ++i;
    }
    rec.fields.push_back(std::move(field));
    return rec;
}

std::vector<Record> read_file(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    Reader reader(in, delimiter);
    std::vector<Record> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return out;
}

std::string escape(std::string_view field, char delimiter) {
    const bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) !=
                       std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.put(delimiter);
        out << escape(row[i], delimiter);
    }
    out.put('\n');
}

std::optional<std::size_t> column(const Row& header, std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

}  // namespace emomap::csv
