#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cok/encoder.hpp"
#include "cok/errors.hpp"
#include "cok/text.hpp"
#include "cok/triple.hpp"

namespace cok {

inline constexpr std::array<std::string_view, 6> kKbDomains = {
    "dictionary", "commonsense", "causality", "entity", "event", "script"};

inline bool is_kb_domain(std::string_view d) {
    return std::find(kKbDomains.begin(), kKbDomains.end(), d) != kKbDomains.end();
}

struct KbSource {
    std::string path;
    std::string domain;
};

// Immutable after load; all lookups go through case-folded, alias-resolved
// keys while the stored triples keep their original surface for rendering.
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(AliasMap aliases) : aliases_(std::move(aliases)) {}

    // Returns false when the triple was already present.
    bool add(const Triple& t, const std::string& domain) {
        const std::string key = canonical_key(t);
        if (!members_.insert(key).second) return false;
        const int idx = static_cast<int>(triples_.size());
        triples_.push_back(t);
        domains_.push_back(domain);
        const auto [s, r, o] = folded_fields(t);
        by_sr_[join(s, r)].push_back(idx);
        by_so_[join(s, o)].push_back(idx);
        by_ro_[join(r, o)].push_back(idx);
        by_s_[s].push_back(idx);
        return true;
    }

    std::size_t size() const { return triples_.size(); }
    bool empty() const { return triples_.empty(); }
    const std::vector<Triple>& triples() const { return triples_; }
    const std::string& domain_of(std::size_t i) const { return domains_[i]; }
    const AliasMap& aliases() const { return aliases_; }

    // Exact verification: set membership after normalization and alias
    // resolution.
    bool contains(const Triple& t) const {
        return members_.count(canonical_key(t)) != 0;
    }

    // Correction lookup for knowledge injection. Candidates are searched in
    // tiers: same (subject, relation), then (subject, object), then
    // (relation, object), then same subject; within a tier ranked by encoder
    // similarity to the query triple. The query itself is never returned.
    std::vector<Triple> find_corrections(const Triple& t, int k,
                                         const TextEncoder& encoder) const {
        if (k < 1) throw ConfigError("find_corrections: k must be >= 1");
        const auto [s, r, o] = folded_fields(t);
        const std::string self_key = canonical_key(t);
        const SparseVec query_vec = encoder.encode(t.render());

        std::vector<Triple> out;
        std::unordered_set<int> seen;
        auto add_tier = [&](const std::unordered_map<std::string, std::vector<int>>& index,
                            const std::string& key) {
            if (static_cast<int>(out.size()) >= k) return;
            auto it = index.find(key);
            if (it == index.end()) return;
            std::vector<std::pair<double, int>> ranked;
            for (int idx : it->second) {
                if (seen.count(idx)) continue;
                if (member_key(idx) == self_key) continue;
                ranked.emplace_back(cosine(encoder.encode(triples_[idx].render()), query_vec), idx);
            }
            std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return lex_less(triples_[a.second], triples_[b.second]);
            });
            for (const auto& [score, idx] : ranked) {
                if (static_cast<int>(out.size()) >= k) break;
                out.push_back(triples_[idx]);
                seen.insert(idx);
            }
        };

        add_tier(by_sr_, join(s, r));
        add_tier(by_so_, join(s, o));
        add_tier(by_ro_, join(r, o));
        add_tier(by_s_, s);
        return out;
    }

    // Exact brute-force top-k by inner product between the encoded query and
    // encoded triple renderings; ties broken by lexicographic triple order.
    std::vector<std::pair<Triple, double>> retrieve_similar(
        std::string_view text, int k, const TextEncoder& encoder) const {
        if (k < 1) throw ConfigError("retrieve_similar: k must be >= 1");
        const SparseVec query_vec = encoder.encode(text);
        std::vector<std::pair<double, int>> scored;
        scored.reserve(triples_.size());
        for (int i = 0; i < static_cast<int>(triples_.size()); ++i) {
            scored.emplace_back(query_vec.dot(encoder.encode(triples_[i].render())), i);
        }
        std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return lex_less(triples_[a.second], triples_[b.second]);
        });
        std::vector<std::pair<Triple, double>> out;
        const int n = std::min<int>(k, static_cast<int>(scored.size()));
        out.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            out.emplace_back(triples_[scored[i].second], scored[i].first);
        }
        return out;
    }

    std::string canonical_key(const Triple& t) const {
        const auto [s, r, o] = folded_fields(t);
        return join(join(s, r), o);
    }

private:
    std::array<std::string, 3> folded_fields(const Triple& t) const {
        return {fold_key(t.subject), resolve_alias(aliases_, fold_key(t.relation)),
                fold_key(t.object)};
    }

    std::string member_key(int idx) const { return canonical_key(triples_[idx]); }

    static std::string join(const std::string& a, const std::string& b) {
        std::string out;
        out.reserve(a.size() + b.size() + 1);
        out.append(a);
        out.push_back('\x1f');
        out.append(b);
        return out;
    }

    std::vector<Triple> triples_;
    std::vector<std::string> domains_;
    AliasMap aliases_;
    std::unordered_set<std::string> members_;
    std::unordered_map<std::string, std::vector<int>> by_sr_;
    std::unordered_map<std::string, std::vector<int>> by_so_;
    std::unordered_map<std::string, std::vector<int>> by_ro_;
    std::unordered_map<std::string, std::vector<int>> by_s_;
};

// Loads UTF-8 TSV files (3 columns, "\t" escapes, "#" comments, LF endings)
// into one deduplicated, indexed KnowledgeBase.
inline KnowledgeBase load_kb(const std::vector<KbSource>& sources,
                             const std::optional<std::string>& alias_path = std::nullopt) {
    AliasMap aliases =
        alias_path ? load_alias_table(*alias_path) : default_alias_table();
    KnowledgeBase kb(std::move(aliases));
    for (const auto& src : sources) {
        if (!is_kb_domain(src.domain)) {
            throw DataError("unknown KB domain tag \"" + src.domain + "\" for " +
                            src.path);
        }
        std::ifstream in(src.path);
        if (!in) throw DataError("cannot open KB file " + src.path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            auto fields = split_tsv_line(line);
            if (fields.size() != 3) {
                throw ParseError(src.path, line_no,
                                 "expected 3 tab-separated columns, got " +
                                     std::to_string(fields.size()));
            }
            auto t = Triple::normalized(fields[0], fields[1], fields[2]);
            if (!t) {
                throw ParseError(src.path, line_no, "empty field after normalization");
            }
            kb.add(*t, src.domain);
        }
    }
    return kb;
}

inline KnowledgeBase load_kb(const std::string& path, const std::string& domain,
                             const std::optional<std::string>& alias_path = std::nullopt) {
    return load_kb(std::vector<KbSource>{{path, domain}}, alias_path);
}

// Manifest: {"kbs": [{"path": ..., "domain": ...}, ...], "aliases": optional}.
// Relative paths are resolved against the manifest's directory.
inline KnowledgeBase load_kb_manifest(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    nlohmann::json doc;
    {
        std::ifstream in(manifest_path);
        if (!in) throw DataError("cannot open manifest " + manifest_path);
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(manifest_path + ": invalid JSON: " + e.what());
        }
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    if (!doc.contains("kbs") || !doc["kbs"].is_array()) {
        throw DataError(manifest_path + ": missing \"kbs\" array");
    }
    std::vector<KbSource> sources;
    for (const auto& entry : doc["kbs"]) {
        if (!entry.contains("path") || !entry.contains("domain")) {
            throw DataError(manifest_path + ": each kb entry needs path and domain");
        }
        sources.push_back({resolve(entry["path"].get<std::string>()),
                           entry["domain"].get<std::string>()});
    }
    std::optional<std::string> alias_path;
    if (doc.contains("aliases")) {
        alias_path = resolve(doc["aliases"].get<std::string>());
    }
    return load_kb(sources, alias_path);
}

// Canonical TSV re-serialization (insertion order). load -> save -> load
// yields the identical triple set.
inline void save_kb(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& t : kb.triples()) {
        out << tsv_escape(t.subject) << '\t' << tsv_escape(t.relation) << '\t'
            << tsv_escape(t.object) << '\n';
    }
    if (!out) throw DataError("short write to " + path);
}

}  // namespace cok
