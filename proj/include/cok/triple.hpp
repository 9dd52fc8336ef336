#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include "cok/errors.hpp"
#include "cok/text.hpp"

namespace cok {

// A (subject, relation, object) statement. Fields hold the normalized surface
// form (trimmed, whitespace-collapsed, composed), case preserved for
// rendering; comparisons go through fold_key().
struct Triple {
    std::string subject;
    std::string relation;
    std::string object;

    // Normalizes all fields; nullopt if any field is empty afterwards.
    static std::optional<Triple> normalized(std::string_view s, std::string_view r,
                                            std::string_view o) {
        Triple t{normalize_surface(s), normalize_surface(r), normalize_surface(o)};
        if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
            return std::nullopt;
        }
        return t;
    }

    std::string render() const {
        return "(" + subject + ", " + relation + ", " + object + ")";
    }

    bool operator==(const Triple& other) const = default;
};

inline bool lex_less(const Triple& a, const Triple& b) {
    return std::tie(a.subject, a.relation, a.object) <
           std::tie(b.subject, b.relation, b.object);
}

// Folded alias text -> folded canonical relation text. Chains are flattened
// at load time, so resolution is a single lookup.
using AliasMap = std::unordered_map<std::string, std::string>;

// The paper's prompt tables misspell the letters relation; the KB entry is
// spelled correctly. Exact verification has to bridge the two.
inline AliasMap default_alias_table() {
    return {{"last latter", "last letter"}};
}

inline std::string resolve_alias(const AliasMap& aliases, const std::string& folded) {
    auto it = aliases.find(folded);
    return it == aliases.end() ? folded : it->second;
}

inline AliasMap load_alias_table(const std::string& path, bool include_defaults = true) {
    AliasMap aliases = include_defaults ? default_alias_table() : AliasMap{};
    std::ifstream in(path);
    if (!in) throw DataError("cannot open alias table " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tsv_line(line);
        if (fields.size() != 2) {
            throw ParseError(path, line_no,
                             "expected 2 tab-separated columns, got " +
                                 std::to_string(fields.size()));
        }
        const std::string alias = fold_key(fields[0]);
        const std::string canonical = fold_key(fields[1]);
        if (alias.empty() || canonical.empty()) {
            throw ParseError(path, line_no, "empty field after normalization");
        }
        if (alias == canonical) continue;
        aliases[alias] = canonical;
    }
    // Flatten chains (a -> b, b -> c becomes a -> c); a cycle is a data error.
    for (auto& [alias, canonical] : aliases) {
        std::string cur = canonical;
        std::size_t hops = 0;
        while (true) {
            auto it = aliases.find(cur);
            if (it == aliases.end()) break;
            cur = it->second;
            if (++hops > aliases.size()) {
                throw DataError(path + ": alias cycle involving \"" + alias + "\"");
            }
        }
        canonical = cur;
    }
    return aliases;
}

}  // namespace cok
