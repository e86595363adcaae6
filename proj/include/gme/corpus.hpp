#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gme/error.hpp"
#include "gme/types.hpp"

namespace gme {

// Corpora are line-delimited JSON: one object per line, JSON escaping rules.
// Pair records carry "id", "context", "response"; item records carry "id"
// plus "text" and/or a pre-embedded "tokens" matrix (array of equal-length
// number arrays).

namespace detail {

inline nlohmann::json parse_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("record is not a JSON object", line_no);
    return j;
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string())
        throw ParseError(std::string("missing string field '") + key + "'", line_no);
    return j[key].get<std::string>();
}

}  // namespace detail

inline std::vector<PairItem> parse_pairs(std::istream& in) {
    std::vector<PairItem> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = detail::parse_line(line, line_no);
        PairItem p;
        p.id = detail::require_string(j, "id", line_no);
        p.context = detail::require_string(j, "context", line_no);
        p.response = detail::require_string(j, "response", line_no);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::vector<PairItem> read_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_pairs(in);
}

/// text_fields lists the record fields tried (in order) for the raw text, so
/// `embed --side resp` can read the response column of a pairs file.
inline std::vector<CorpusItem> parse_corpus_items(std::istream& in,
                                                  const std::vector<std::string>& text_fields = {"text"}) {
    std::vector<CorpusItem> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = detail::parse_line(line, line_no);
        CorpusItem item;
        item.id = detail::require_string(j, "id", line_no);
        for (const std::string& key : text_fields)
            if (j.contains(key) && j[key].is_string() && !item.text) item.text = j[key].get<std::string>();
        if (j.contains("tokens")) {
            const nlohmann::json& rows = j["tokens"];
            if (!rows.is_array() || rows.empty()) throw ParseError("'tokens' must be a nonempty array", line_no);
            TokenMatrix X(rows.size(), rows[0].is_array() ? rows[0].size() : 0);
            for (std::size_t i = 0; i < X.tokens; ++i) {
                if (!rows[i].is_array() || rows[i].size() != X.dim)
                    throw ParseError("'tokens' rows must be equal-length number arrays", line_no);
                for (std::size_t c = 0; c < X.dim; ++c) X.at(i, c) = rows[i][c].get<double>();
            }
            try {
                X.validate();
            } catch (const Error& e) {
                throw ParseError(e.what(), line_no);
            }
            item.tokens = std::move(X);
        }
        if (!item.text && !item.tokens) throw ParseError("record needs 'text' or 'tokens'", line_no);
        items.push_back(std::move(item));
    }
    return items;
}

inline std::vector<CorpusItem> read_corpus_items(const std::string& path,
                                                 const std::vector<std::string>& text_fields = {"text"}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_corpus_items(in, text_fields);
}

/// Pairs serialized back to the line-delimited format (used by `gme synth`).
inline std::string pairs_to_jsonl(std::span<const PairItem> pairs) {
    std::string out;
    for (const PairItem& p : pairs) {
        nlohmann::json j{{"id", p.id}, {"context", p.context}, {"response", p.response}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace gme
