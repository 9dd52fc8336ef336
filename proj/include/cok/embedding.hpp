#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cok/encoder.hpp"
#include "cok/errors.hpp"
#include "cok/hashing.hpp"
#include "cok/io.hpp"
#include "cok/kb.hpp"
#include "cok/linalg.hpp"
#include "cok/rng.hpp"
#include "cok/triple.hpp"

namespace cok {

struct TrainConfig {
    int dim = 64;
    double margin = 1.0;
    double learning_rate = 0.01;
    int epochs = 100;
    int negatives_per_positive = 1;
    int clusters_per_relation = 1;
    double alpha = 1.0;
    std::uint64_t seed = 42;

    void validate() const {
        if (dim < 1) throw ConfigError("dim must be positive");
        if (margin <= 0.0) throw ConfigError("margin must be positive");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (epochs < 0) throw ConfigError("epochs must be non-negative");
        if (negatives_per_positive < 1) {
            throw ConfigError("negatives_per_positive must be positive");
        }
        if (clusters_per_relation < 1) {
            throw ConfigError("clusters_per_relation must be positive");
        }
        if (alpha <= 0.0) throw ConfigError("alpha must be positive");
    }
};

struct IdTriple {
    int head = -1;
    int rel = -1;
    int tail = -1;
};

// Entity/relation embeddings with per-relation projection matrices and
// cluster prototype vectors. Vocab strings are the case-folded,
// alias-resolved forms used for exact lookups.
struct EmbeddingModel {
    int dim = 0;
    double alpha = 1.0;
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    std::unordered_map<std::string, int> entity_index;
    std::unordered_map<std::string, int> relation_index;
    std::vector<Vec> entity_emb;
    std::vector<Vec> relation_emb;
    std::vector<std::vector<Vec>> prototypes;  // [relation][cluster]
    std::vector<Mat> projections;              // [relation]

    int num_entities() const { return static_cast<int>(entities.size()); }
    int num_relations() const { return static_cast<int>(relations.size()); }
};

// ||s M + proto - o M||^2 + alpha * ||proto - r||^2
inline double energy(const Vec& s_vec, const Vec& r_vec, const Vec& proto,
                     const Vec& o_vec, const Mat& m, double alpha) {
    const std::size_t d = s_vec.size();
    if (r_vec.size() != d || proto.size() != d || o_vec.size() != d ||
        m.rows != static_cast<int>(d) || m.cols != static_cast<int>(d)) {
        throw ContractViolation("energy: dimension mismatch");
    }
    const Vec diff = sub(s_vec, o_vec);
    Vec u = row_times_mat(diff, m);
    for (std::size_t i = 0; i < d; ++i) u[i] += proto[i];
    double translation = norm2_sq(u);
    double cluster = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double x = proto[i] - r_vec[i];
        cluster += x * x;
    }
    return translation + alpha * cluster;
}

inline double energy_ids(const EmbeddingModel& model, const IdTriple& t, int proto) {
    return energy(model.entity_emb[t.head], model.relation_emb[t.rel],
                  model.prototypes[t.rel][proto], model.entity_emb[t.tail],
                  model.projections[t.rel], model.alpha);
}

// Prototype minimizing the energy for this triple; ties keep the lowest index.
inline int best_prototype(const EmbeddingModel& model, const IdTriple& t) {
    const auto& protos = model.prototypes[t.rel];
    int best = 0;
    double best_e = std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(protos.size()); ++c) {
        const double e = energy_ids(model, t, c);
        if (e < best_e) {
            best_e = e;
            best = c;
        }
    }
    return best;
}

inline double hinge_loss(const EmbeddingModel& model, const IdTriple& pos,
                         int proto_pos, const IdTriple& neg, int proto_neg,
                         double margin) {
    const double l =
        margin + energy_ids(model, pos, proto_pos) - energy_ids(model, neg, proto_neg);
    return l > 0.0 ? l : 0.0;
}

// Gradients of the hinge loss for one (positive, negative) pair, accumulated
// per distinct parameter so shared entities/prototypes combine correctly.
struct PairGradient {
    double loss = 0.0;
    bool active = false;
    std::vector<std::pair<int, Vec>> entity_grads;
    std::vector<std::pair<int, Vec>> relation_grads;
    std::vector<std::pair<std::pair<int, int>, Vec>> prototype_grads;  // (rel, cluster)
    std::vector<std::pair<int, Mat>> projection_grads;
};

namespace detail {

template <typename Key, typename Value>
inline Value& accumulate_slot(std::vector<std::pair<Key, Value>>& slots, const Key& key,
                              const Value& zero) {
    for (auto& [k, v] : slots) {
        if (k == key) return v;
    }
    slots.emplace_back(key, zero);
    return slots.back().second;
}

struct TripleTerms {
    Vec diff;   // head - tail
    Vec u;      // diff * M + proto
    Vec resid;  // proto - r
};

inline TripleTerms triple_terms(const EmbeddingModel& model, const IdTriple& t,
                                int proto) {
    TripleTerms terms;
    terms.diff = sub(model.entity_emb[t.head], model.entity_emb[t.tail]);
    terms.u = row_times_mat(terms.diff, model.projections[t.rel]);
    const Vec& c = model.prototypes[t.rel][proto];
    const Vec& r = model.relation_emb[t.rel];
    for (std::size_t i = 0; i < terms.u.size(); ++i) terms.u[i] += c[i];
    terms.resid = sub(c, r);
    return terms;
}

// Adds sign * dE/dθ for one triple into the accumulator.
inline void accumulate_energy_gradient(const EmbeddingModel& model, const IdTriple& t,
                                       int proto, double sign, PairGradient& out) {
    const int d = model.dim;
    const TripleTerms terms = triple_terms(model, t, proto);
    const Mat& m = model.projections[t.rel];
    const double alpha = model.alpha;

    // dE/d(head)_i = 2 sum_j M(i,j) u_j ; tail gets the opposite sign.
    Vec mu(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += m(i, j) * terms.u[j];
        mu[i] = s;
    }
    const Vec zero_vec(static_cast<std::size_t>(d), 0.0);
    add_scaled(accumulate_slot(out.entity_grads, t.head, zero_vec), mu, 2.0 * sign);
    add_scaled(accumulate_slot(out.entity_grads, t.tail, zero_vec), mu, -2.0 * sign);

    // dE/dc = 2u + 2 alpha (c - r); dE/dr = -2 alpha (c - r)
    Vec& proto_grad =
        accumulate_slot(out.prototype_grads, std::make_pair(t.rel, proto), zero_vec);
    add_scaled(proto_grad, terms.u, 2.0 * sign);
    add_scaled(proto_grad, terms.resid, 2.0 * alpha * sign);
    add_scaled(accumulate_slot(out.relation_grads, t.rel, zero_vec), terms.resid,
               -2.0 * alpha * sign);

    // dE/dM(i,j) = 2 diff_i u_j
    Mat& proj_grad = accumulate_slot(out.projection_grads, t.rel, Mat(d, d));
    for (int i = 0; i < d; ++i) {
        const double di = terms.diff[i];
        if (di == 0.0) continue;
        for (int j = 0; j < d; ++j) proj_grad(i, j) += 2.0 * sign * di * terms.u[j];
    }
}

}  // namespace detail

inline PairGradient hinge_pair_gradient(const EmbeddingModel& model,
                                        const IdTriple& pos, int proto_pos,
                                        const IdTriple& neg, int proto_neg,
                                        double margin) {
    PairGradient out;
    const double l =
        margin + energy_ids(model, pos, proto_pos) - energy_ids(model, neg, proto_neg);
    if (l <= 0.0) return out;
    out.loss = l;
    out.active = true;
    detail::accumulate_energy_gradient(model, pos, proto_pos, 1.0, out);
    detail::accumulate_energy_gradient(model, neg, proto_neg, -1.0, out);
    return out;
}

namespace detail {

// Seeded Lloyd's algorithm; empty clusters keep their previous centroid.
// Centroids are projected onto the unit ball to honor the norm constraint.
inline std::vector<Vec> kmeans(const std::vector<Vec>& points, int k, Rng& rng,
                               int iterations = 10) {
    const int n = static_cast<int>(points.size());
    const int k_eff = std::min(k, n);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<Vec> centroids;
    centroids.reserve(static_cast<std::size_t>(k_eff));
    for (int c = 0; c < k_eff; ++c) {
        centroids.push_back(points[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])]);
    }
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k_eff; ++c) {
                const Vec delta = sub(points[static_cast<std::size_t>(i)], centroids[static_cast<std::size_t>(c)]);
                const double d2 = norm2_sq(delta);
                if (d2 < best_d) {
                    best_d = d2;
                    best = c;
                }
            }
            assign[static_cast<std::size_t>(i)] = best;
        }
        for (int c = 0; c < k_eff; ++c) {
            Vec sum(points[0].size(), 0.0);
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (assign[static_cast<std::size_t>(i)] == c) {
                    add_scaled(sum, points[static_cast<std::size_t>(i)], 1.0);
                    ++count;
                }
            }
            if (count > 0) {
                scale(sum, 1.0 / count);
                centroids[static_cast<std::size_t>(c)] = std::move(sum);
            }
        }
    }
    for (auto& c : centroids) project_unit_ball(c);
    return centroids;
}

inline void recompute_prototypes(EmbeddingModel& model,
                                 const std::vector<IdTriple>& triples,
                                 int clusters_per_relation, Rng& rng) {
    std::vector<std::vector<Vec>> offsets(
        static_cast<std::size_t>(model.num_relations()));
    for (const auto& t : triples) {
        // o_projected - s_projected, the translation the prototype should carry
        const Vec diff = sub(model.entity_emb[t.tail], model.entity_emb[t.head]);
        offsets[static_cast<std::size_t>(t.rel)].push_back(
            row_times_mat(diff, model.projections[t.rel]));
    }
    for (int r = 0; r < model.num_relations(); ++r) {
        auto& pts = offsets[static_cast<std::size_t>(r)];
        if (pts.empty()) continue;  // cannot happen for vocab built from triples
        model.prototypes[static_cast<std::size_t>(r)] =
            kmeans(pts, clusters_per_relation, rng);
    }
}

inline void check_norms(const EmbeddingModel& model) {
    constexpr double kTol = 1.0 + 1e-6;
    for (const auto& v : model.entity_emb) assert(norm2(v) <= kTol);
    for (const auto& v : model.relation_emb) assert(norm2(v) <= kTol);
    for (const auto& protos : model.prototypes) {
        for (const auto& v : protos) assert(norm2(v) <= kTol);
    }
    (void)model;
}

}  // namespace detail

// Margin-ranking training with uniform corruption sampling, norm projection
// after every step, and per-epoch k-means prototype refits. Deterministic for
// a fixed seed.
inline EmbeddingModel train(const KnowledgeBase& kb, const TrainConfig& config) {
    config.validate();
    if (kb.empty()) throw ConfigError("train: knowledge base is empty");

    EmbeddingModel model;
    model.dim = config.dim;
    model.alpha = config.alpha;

    std::vector<IdTriple> triples;
    triples.reserve(kb.size());
    auto entity_id = [&](const std::string& key) {
        auto it = model.entity_index.find(key);
        if (it != model.entity_index.end()) return it->second;
        const int id = model.num_entities();
        model.entity_index.emplace(key, id);
        model.entities.push_back(key);
        return id;
    };
    auto relation_id = [&](const std::string& key) {
        auto it = model.relation_index.find(key);
        if (it != model.relation_index.end()) return it->second;
        const int id = model.num_relations();
        model.relation_index.emplace(key, id);
        model.relations.push_back(key);
        return id;
    };
    for (const auto& t : kb.triples()) {
        IdTriple ids;
        ids.head = entity_id(fold_key(t.subject));
        ids.rel = relation_id(resolve_alias(kb.aliases(), fold_key(t.relation)));
        ids.tail = entity_id(fold_key(t.object));
        triples.push_back(ids);
    }
    if (model.num_entities() >= (1 << 21) || model.num_relations() >= (1 << 21)) {
        throw ConfigError("train: vocabulary too large for this trainer");
    }

    auto pack = [](const IdTriple& t) {
        return (static_cast<std::uint64_t>(t.head) << 42) |
               (static_cast<std::uint64_t>(t.rel) << 21) |
               static_cast<std::uint64_t>(t.tail);
    };
    std::unordered_set<std::uint64_t> member_ids;
    member_ids.reserve(triples.size() * 2);
    for (const auto& t : triples) member_ids.insert(pack(t));

    Rng rng(config.seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(config.dim));
    auto init_vec = [&] {
        Vec v(static_cast<std::size_t>(config.dim));
        for (auto& x : v) x = rng.uniform(-bound, bound);
        const double n = norm2(v);
        if (n > 0.0) scale(v, 1.0 / n);
        return v;
    };
    for (int i = 0; i < model.num_entities(); ++i) model.entity_emb.push_back(init_vec());
    for (int i = 0; i < model.num_relations(); ++i) model.relation_emb.push_back(init_vec());
    model.projections.assign(static_cast<std::size_t>(model.num_relations()),
                             Mat::identity(config.dim));
    model.prototypes.assign(static_cast<std::size_t>(model.num_relations()), {});
    detail::recompute_prototypes(model, triples, config.clusters_per_relation, rng);

    const int num_entities = model.num_entities();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& pos : triples) {
            for (int nsample = 0; nsample < config.negatives_per_positive; ++nsample) {
                IdTriple neg = pos;
                for (int attempt = 0; attempt < 1000; ++attempt) {
                    neg = pos;
                    const bool corrupt_head = rng.coin();
                    const int candidate = static_cast<int>(rng.index(
                        static_cast<std::size_t>(num_entities)));
                    (corrupt_head ? neg.head : neg.tail) = candidate;
                    if (!member_ids.count(pack(neg))) break;
                }
                const int proto = best_prototype(model, pos);
                const PairGradient grads =
                    hinge_pair_gradient(model, pos, proto, neg, proto, config.margin);
                if (!grads.active) continue;
                const double lr = config.learning_rate;
                for (const auto& [idx, g] : grads.entity_grads) {
                    add_scaled(model.entity_emb[static_cast<std::size_t>(idx)], g, -lr);
                    project_unit_ball(model.entity_emb[static_cast<std::size_t>(idx)]);
                }
                for (const auto& [idx, g] : grads.relation_grads) {
                    add_scaled(model.relation_emb[static_cast<std::size_t>(idx)], g, -lr);
                    project_unit_ball(model.relation_emb[static_cast<std::size_t>(idx)]);
                }
                for (const auto& [key, g] : grads.prototype_grads) {
                    Vec& p = model.prototypes[static_cast<std::size_t>(key.first)]
                                             [static_cast<std::size_t>(key.second)];
                    add_scaled(p, g, -lr);
                    project_unit_ball(p);
                }
                for (const auto& [idx, g] : grads.projection_grads) {
                    Mat& m = model.projections[static_cast<std::size_t>(idx)];
                    for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] -= lr * g.a[i];
                }
            }
        }
        detail::recompute_prototypes(model, triples, config.clusters_per_relation, rng);
#ifndef NDEBUG
        detail::check_norms(model);
#endif
    }
    return model;
}

// --- linking generated surface text into model vocabulary ---

struct LinkResult {
    bool linked = false;
    int index = -1;
    double similarity = 0.0;
};

// Grounds free-form surface strings in a vocabulary: exact fold/alias match
// first, then nearest encoder neighbor above a threshold. Vocab encodings are
// cached at construction; linking is read-only afterwards.
class Linker {
public:
    Linker(const std::vector<std::string>& vocab, const TextEncoder& encoder,
           double threshold, AliasMap aliases = {})
        : vocab_(&vocab),
          encoder_(&encoder),
          threshold_(threshold),
          aliases_(std::move(aliases)) {
        encodings_.reserve(vocab.size());
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            exact_.emplace(vocab[i], static_cast<int>(i));
            encodings_.push_back(encoder.encode(vocab[i]));
        }
    }

    LinkResult link(std::string_view surface) const {
        const std::string key = resolve_alias(aliases_, fold_key(surface));
        if (auto it = exact_.find(key); it != exact_.end()) {
            return {true, it->second, 1.0};
        }
        const SparseVec query = encoder_->encode(key);
        int best = -1;
        double best_sim = -2.0;
        for (std::size_t i = 0; i < encodings_.size(); ++i) {
            const double sim = query.dot(encodings_[i]);
            if (sim > best_sim ||
                (sim == best_sim && best >= 0 &&
                 (*vocab_)[i] < (*vocab_)[static_cast<std::size_t>(best)])) {
                best_sim = sim;
                best = static_cast<int>(i);
            }
        }
        if (best >= 0 && best_sim >= threshold_) return {true, best, best_sim};
        return {false, -1, best < 0 ? 0.0 : best_sim};
    }

private:
    const std::vector<std::string>* vocab_;
    const TextEncoder* encoder_;
    double threshold_;
    AliasMap aliases_;
    std::unordered_map<std::string, int> exact_;
    std::vector<SparseVec> encodings_;
};

inline constexpr double kDefaultLinkThreshold = 0.85;

struct ImplicitResult {
    double score = 0.5;
    bool unverifiable = true;
    LinkResult subject_link;
    LinkResult relation_link;
    LinkResult object_link;
};

// Maps a triple to (0, 1] via 1 / (1 + energy) when all three slots ground in
// the vocabulary; otherwise the neutral 0.5, flagged unverifiable.
class ImplicitScorer {
public:
    ImplicitScorer(const EmbeddingModel& model, const TextEncoder& encoder,
                   double threshold = kDefaultLinkThreshold, AliasMap aliases = {})
        : model_(&model),
          entity_linker_(model.entities, encoder, threshold),
          relation_linker_(model.relations, encoder, threshold, std::move(aliases)) {}

    ImplicitResult score(const Triple& t) const {
        ImplicitResult out;
        out.subject_link = entity_linker_.link(t.subject);
        out.relation_link = relation_linker_.link(t.relation);
        out.object_link = entity_linker_.link(t.object);
        if (!out.subject_link.linked || !out.relation_link.linked ||
            !out.object_link.linked) {
            return out;
        }
        IdTriple ids{out.subject_link.index, out.relation_link.index,
                     out.object_link.index};
        const double e = energy_ids(*model_, ids, best_prototype(*model_, ids));
        out.score = 1.0 / (1.0 + e);
        out.unverifiable = false;
        return out;
    }

private:
    const EmbeddingModel* model_;
    Linker entity_linker_;
    Linker relation_linker_;
};

inline ImplicitResult implicit_score(const EmbeddingModel& model, const Triple& t,
                                     const TextEncoder& encoder,
                                     double threshold = kDefaultLinkThreshold,
                                     AliasMap aliases = {}) {
    return ImplicitScorer(model, encoder, threshold, std::move(aliases)).score(t);
}

// --- checkpoint file ---
//
// Layout: "COKE", u16 version, u8 endianness (1 = little-endian), u32 d,
// u32 |E|, u32 |R|, per-relation u32 cluster count, f64 alpha, vocab tables
// (length-prefixed UTF-8, entities then relations), all matrices as f64
// little-endian in declared order (entity_emb, relation_emb, prototypes,
// projections), then a CRC-32 of every preceding byte.

inline constexpr std::string_view kCheckpointMagic = "COKE";
inline constexpr std::uint16_t kCheckpointVersion = 1;

inline void save_model(const EmbeddingModel& model, const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic);
    put_u16(out, kCheckpointVersion);
    out.push_back(static_cast<char>(1));  // little-endian payload
    put_u32(out, static_cast<std::uint32_t>(model.dim));
    put_u32(out, static_cast<std::uint32_t>(model.num_entities()));
    put_u32(out, static_cast<std::uint32_t>(model.num_relations()));
    for (const auto& protos : model.prototypes) {
        put_u32(out, static_cast<std::uint32_t>(protos.size()));
    }
    put_f64(out, model.alpha);
    for (const auto& name : model.entities) put_str(out, name);
    for (const auto& name : model.relations) put_str(out, name);
    for (const auto& v : model.entity_emb) {
        for (double x : v) put_f64(out, x);
    }
    for (const auto& v : model.relation_emb) {
        for (double x : v) put_f64(out, x);
    }
    for (const auto& protos : model.prototypes) {
        for (const auto& v : protos) {
            for (double x : v) put_f64(out, x);
        }
    }
    for (const auto& m : model.projections) {
        for (double x : m.a) put_f64(out, x);
    }
    put_u32(out, crc32(out));
    write_file_bytes(path, out);
}

inline EmbeddingModel load_model(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < kCheckpointMagic.size() + 4) {
        throw CorruptCheckpoint(path + ": too short to be a checkpoint");
    }
    const std::string payload = bytes.substr(0, bytes.size() - 4);
    {
        ByteReader crc_reader(bytes.substr(bytes.size() - 4), path);
        if (crc_reader.u32() != crc32(payload)) {
            throw CorruptCheckpoint(path + ": checksum mismatch");
        }
    }
    ByteReader r(payload, path);
    if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
        throw CorruptCheckpoint(path + ": bad magic");
    }
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw UnsupportedVersion(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }
    if (r.u8() != 1) {
        throw CorruptCheckpoint(path + ": checkpoint is not little-endian");
    }
    EmbeddingModel model;
    model.dim = static_cast<int>(r.u32());
    const auto num_entities = r.u32();
    const auto num_relations = r.u32();
    std::vector<std::uint32_t> cluster_counts(num_relations);
    for (auto& c : cluster_counts) c = r.u32();
    model.alpha = r.f64();
    auto read_vec = [&] {
        Vec v(static_cast<std::size_t>(model.dim));
        for (auto& x : v) x = r.f64();
        return v;
    };
    for (std::uint32_t i = 0; i < num_entities; ++i) {
        std::string name = r.str();
        model.entity_index.emplace(name, static_cast<int>(i));
        model.entities.push_back(std::move(name));
    }
    for (std::uint32_t i = 0; i < num_relations; ++i) {
        std::string name = r.str();
        model.relation_index.emplace(name, static_cast<int>(i));
        model.relations.push_back(std::move(name));
    }
    for (std::uint32_t i = 0; i < num_entities; ++i) model.entity_emb.push_back(read_vec());
    for (std::uint32_t i = 0; i < num_relations; ++i) {
        model.relation_emb.push_back(read_vec());
    }
    for (std::uint32_t i = 0; i < num_relations; ++i) {
        std::vector<Vec> protos;
        protos.reserve(cluster_counts[i]);
        for (std::uint32_t c = 0; c < cluster_counts[i]; ++c) protos.push_back(read_vec());
        model.prototypes.push_back(std::move(protos));
    }
    for (std::uint32_t i = 0; i < num_relations; ++i) {
        Mat m(model.dim, model.dim);
        for (auto& x : m.a) x = r.f64();
        model.projections.push_back(std::move(m));
    }
    if (!r.done()) {
        throw CorruptCheckpoint(path + ": trailing bytes after payload");
    }
    return model;
}

}  // namespace cok
