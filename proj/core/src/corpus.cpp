#include "emomap/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emomap/csv.hpp"
#include "emomap/error.hpp"
#include "emomap/text.hpp"

namespace emomap {

namespace {

std::string file_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

std::size_t require_column(const csv::Row& header, const std::string& name, const std::string& path) {
    auto idx = csv::column(header, name);
    if (!idx) throw ParseError("'" + path + "': mapped column '" + name + "' not found in header");
    return *idx;
}

LoadResult load_delimited(const std::string& path, char delim, const CorpusSchema& schema) {
    LoadResult result;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    csv::Reader reader(in, delim);

    auto header_rec = reader.next();
    if (!header_rec) return result;  // empty file
    auto header = std::move(header_rec->fields);
    for (auto& h : header) h = std::string(text::trim(h));
    // a UTF-8 BOM on the first header cell is not part of the name
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

    const std::size_t text_col = require_column(header, schema.text, path);
    std::optional<std::size_t> id_col, group_col, label_col;
    if (schema.id) id_col = require_column(header, *schema.id, path);
    if (schema.group) group_col = require_column(header, *schema.group, path);
    if (schema.label) label_col = require_column(header, *schema.label, path);

    const std::string stem = file_stem(path);
    std::size_t row = 0;
    while (auto rec = reader.next()) {
        ++row;
        if (rec->malformed) {
            result.skipped.push_back({row, "line " + std::to_string(rec->line) + ": " + rec->problem});
            continue;
        }
        if (rec->fields.size() != header.size()) {
            result.skipped.push_back({row, "line " + std::to_string(rec->line) + ": expected " +
                                               std::to_string(header.size()) + " fields, got " +
                                               std::to_string(rec->fields.size())});
            continue;
        }
        for (auto& f : rec->fields) result.invalid_utf8_replacements += text::sanitize_utf8(f);

        Document doc;
        doc.id = id_col ? rec->fields[*id_col] : stem + ":" + std::to_string(row);
        if (text::trim(doc.id).empty()) {
            result.skipped.push_back({row, "line " + std::to_string(rec->line) + ": empty id"});
            continue;
        }
        doc.text = rec->fields[text_col];
        doc.group = group_col ? rec->fields[*group_col] : schema.default_group;
        if (label_col && !rec->fields[*label_col].empty()) doc.label = rec->fields[*label_col];
        result.documents.push_back(std::move(doc));
    }
    return result;
}

std::optional<std::string> json_scalar(const nlohmann::json& obj, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    if (it->is_number() || it->is_boolean()) return it->dump();
    return std::nullopt;
}

LoadResult load_jsonl(const std::string& path, const CorpusSchema& schema) {
    LoadResult result;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");

    const std::string stem = file_stem(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        result.invalid_utf8_replacements += text::sanitize_utf8(line);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            result.skipped.push_back({lineno, std::string("invalid JSON: ") + e.what()});
            continue;
        }
        if (!obj.is_object()) {
            result.skipped.push_back({lineno, "record is not a JSON object"});
            continue;
        }
        auto txt = json_scalar(obj, schema.text);
        if (!txt) {
            result.skipped.push_back({lineno, "missing text field '" + schema.text + "'"});
            continue;
        }
        Document doc;
        doc.text = std::move(*txt);
        if (schema.id) {
            auto id = json_scalar(obj, *schema.id);
            if (!id || text::trim(*id).empty()) {
                result.skipped.push_back({lineno, "missing id field '" + *schema.id + "'"});
                continue;
            }
            doc.id = std::move(*id);
        } else {
            doc.id = stem + ":" + std::to_string(lineno);
        }
        doc.group = schema.default_group;
        if (schema.group) {
            if (auto g = json_scalar(obj, *schema.group)) doc.group = std::move(*g);
        }
        if (schema.label) {
            auto l = json_scalar(obj, *schema.label);
            if (l && !l->empty()) doc.label = std::move(*l);
        }
        result.documents.push_back(std::move(doc));
    }
    return result;
}

LoadResult load_plain(const std::string& path, const CorpusSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    LoadResult result;
    std::string body = ss.str();
    if (body.empty()) return result;
    result.invalid_utf8_replacements = text::sanitize_utf8(body);
    Document doc;
    doc.id = file_stem(path);
    doc.group = schema.default_group;
    doc.text = std::move(body);
    result.documents.push_back(std::move(doc));
    return result;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "csv") return CorpusFormat::csv;
    if (name == "tsv") return CorpusFormat::tsv;
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "plain") return CorpusFormat::plain;
    throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected csv, tsv, jsonl or plain)");
}

LoadResult load_corpus(const std::string& path, CorpusFormat format, const CorpusSchema& schema) {
    switch (format) {
        case CorpusFormat::csv: return load_delimited(path, ',', schema);
        case CorpusFormat::tsv: return load_delimited(path, '\t', schema);
        case CorpusFormat::jsonl: return load_jsonl(path, schema);
        case CorpusFormat::plain: return load_plain(path, schema);
    }
    throw ConfigError("unhandled corpus format");
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto dot = text.find('.', start);
        const bool terminated = dot != std::string_view::npos;
        const auto end = terminated ? dot : text.size();
        auto piece = text::trim(text.substr(start, end - start));
        if (!piece.empty()) {
            std::string s(piece);
            if (terminated) s.push_back('.');
            out.push_back(std::move(s));
        }
        if (!terminated) break;
        start = dot + 1;
    }
    return out;
}

std::vector<TextChunk> chunk_document(const Document& doc, std::size_t chunk_limit) {
    if (chunk_limit == 0) throw ValidationError("chunk_limit must be >= 1");
    std::vector<TextChunk> chunks;
    auto emit = [&](std::string body) {
        TextChunk c;
        c.doc_id = doc.id;
        c.chunk_index = chunks.size();
        c.text = std::move(body);
        c.group = doc.group;
        c.label = doc.label;
        chunks.push_back(std::move(c));
    };

    std::string current;
    std::size_t current_len = 0;
    for (auto& sentence : split_sentences(doc.text)) {
        const std::size_t len = text::utf8_length(sentence);
        if (current.empty()) {
            current = std::move(sentence);
            current_len = len;
            continue;
        }
        if (current_len + 1 + len > chunk_limit) {
            emit(std::move(current));
            current = std::move(sentence);
            current_len = len;
        } else {
            current.push_back(' ');
            current += sentence;
            current_len += 1 + len;
        }
    }
    if (!current.empty()) emit(std::move(current));
    return chunks;
}

std::vector<TextChunk> chunk_corpus(const std::vector<Document>& docs, std::size_t chunk_limit) {
    std::vector<TextChunk> out;
    for (const auto& d : docs) {
        auto c = chunk_document(d, chunk_limit);
        out.insert(out.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
    }
    return out;
}

}  // namespace emomap
