// Forest file format, version 1 (little-endian):
//   magic "MURALFOR" | u32 version | u64 payload size | payload | u32 crc32
// The payload carries the schema, config, standardization parameters, the
// per-column missingness flags, every tree, and (via leaf row lists) the
// training leaf assignments.

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mural/forest.hpp"

namespace mural {

namespace {

constexpr char kForestMagic[8] = {'M', 'U', 'R', 'A', 'L', 'F', 'O', 'R'};
constexpr std::uint32_t kForestVersion = 1;

std::uint32_t crc32(const std::string& bytes) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xffffffffu;
    for (unsigned char b : bytes) c = table[(c ^ b) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::uint64_t u64() {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const auto n = u32();
        const char* p = take(n);
        return std::string(p, n);
    }
    bool exhausted() const { return pos_ == buf_.size(); }

private:
    const char* take(std::size_t n) {
        if (pos_ + n > buf_.size()) throw UserError("forest file is truncated");
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::string buf_;
    std::size_t pos_ = 0;
};

void write_schema(Writer& w, const Schema& schema) {
    w.u32(static_cast<std::uint32_t>(schema.n_cols()));
    for (const auto& c : schema.columns()) {
        w.str(c.name);
        w.u8(static_cast<std::uint8_t>(c.kind.type));
        w.i32(c.kind.levels);
        w.u8(static_cast<std::uint8_t>(c.hint));
        w.str(c.missing_token);
    }
}

Schema read_schema(Reader& r) {
    const auto n = r.u32();
    std::vector<ColumnSpec> cols(n);
    for (auto& c : cols) {
        c.name = r.str();
        c.kind.type = static_cast<ColumnType>(r.u8());
        c.kind.levels = r.i32();
        c.hint = static_cast<MissingnessHint>(r.u8());
        c.missing_token = r.str();
    }
    return Schema(std::move(cols));
}

void write_config(Writer& w, const ForestConfig& c) {
    w.i32(c.n_trees);
    w.i32(c.max_depth);
    w.i32(c.n_candidate_vars);
    w.u8(static_cast<std::uint8_t>(c.entropy_mode));
    w.i32(c.entropy_dims);
    w.i32(c.n_residual_vars);
    w.i32(c.mnar_restrict_levels);
    w.i32(c.min_leaf);
    w.i32(c.max_threshold_candidates);
    w.i32(c.n_bins_override);
    w.f64(c.four_way_edge_weight);
    w.u8(c.exclude_path_vars ? 1 : 0);
    w.u64(c.seed);
}

ForestConfig read_config(Reader& r) {
    ForestConfig c;
    c.n_trees = r.i32();
    c.max_depth = r.i32();
    c.n_candidate_vars = r.i32();
    c.entropy_mode = static_cast<EntropyMode>(r.u8());
    c.entropy_dims = r.i32();
    c.n_residual_vars = r.i32();
    c.mnar_restrict_levels = r.i32();
    c.min_leaf = r.i32();
    c.max_threshold_candidates = r.i32();
    c.n_bins_override = r.i32();
    c.four_way_edge_weight = r.f64();
    c.exclude_path_vars = r.u8() != 0;
    c.seed = r.u64();
    return c;
}

void write_split(Writer& w, const SplitSpec& s) {
    if (const auto* cs = std::get_if<ContinuousSplit>(&s)) {
        w.u8(1);
        w.i32(cs->var);
        w.f64(cs->threshold);
    } else if (const auto* cat = std::get_if<CategoricalSplit>(&s)) {
        w.u8(2);
        w.i32(cat->var);
        w.i32(cat->category);
    } else if (const auto* m = std::get_if<MnarFourWay>(&s)) {
        w.u8(3);
        w.i32(m->var);
        w.f64(m->measured_threshold);
        w.i32(m->aux_var);
        w.f64(m->aux_threshold);
    } else {
        const auto* b = std::get_if<BinaryFourWay>(&s);
        w.u8(4);
        w.i32(b->var);
        w.i32(b->category);
        w.i32(b->aux_var);
        w.f64(b->aux_threshold_eq);
        w.f64(b->aux_threshold_neq);
    }
}

SplitSpec read_split(Reader& r, std::uint8_t tag) {
    switch (tag) {
        case 1: {
            ContinuousSplit s;
            s.var = r.i32();
            s.threshold = r.f64();
            return s;
        }
        case 2: {
            CategoricalSplit s;
            s.var = r.i32();
            s.category = r.i32();
            return s;
        }
        case 3: {
            MnarFourWay s;
            s.var = r.i32();
            s.measured_threshold = r.f64();
            s.aux_var = r.i32();
            s.aux_threshold = r.f64();
            return s;
        }
        case 4: {
            BinaryFourWay s;
            s.var = r.i32();
            s.category = r.i32();
            s.aux_var = r.i32();
            s.aux_threshold_eq = r.f64();
            s.aux_threshold_neq = r.f64();
            return s;
        }
        default:
            throw UserError("forest file: unknown split tag " + std::to_string(tag));
    }
}

void write_tree(Writer& w, const MuralTree& tree) {
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const auto& node : tree.nodes) {
        w.i32(node.parent);
        w.i32(node.depth);
        w.f64(node.edge_weight);
        if (node.is_leaf()) {
            w.u8(0);
            w.u64(node.rows.size());
            for (auto r : node.rows) w.i64(r);
        } else {
            write_split(w, *node.split);
            w.u32(static_cast<std::uint32_t>(node.children.size()));
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                w.i32(node.children[i]);
                w.i64(node.child_counts[i]);
            }
        }
    }
}

MuralTree read_tree(Reader& r) {
    MuralTree tree;
    const auto n = r.u32();
    tree.nodes.resize(n);
    for (auto& node : tree.nodes) {
        node.parent = r.i32();
        node.depth = r.i32();
        node.edge_weight = r.f64();
        const auto tag = r.u8();
        if (tag == 0) {
            const auto count = r.u64();
            node.rows.resize(count);
            for (auto& row : node.rows) row = r.i64();
        } else {
            node.split = read_split(r, tag);
            const auto n_children = r.u32();
            node.children.resize(n_children);
            node.child_counts.resize(n_children);
            for (std::uint32_t i = 0; i < n_children; ++i) {
                node.children[i] = r.i32();
                node.child_counts[i] = r.i64();
            }
        }
    }
    return tree;
}

}  // namespace

void serialize(const MuralForest& forest, std::ostream& out) {
    Writer w;
    write_schema(w, forest.schema);
    write_config(w, forest.config);
    w.u32(static_cast<std::uint32_t>(forest.standardization.columns.size()));
    for (const auto& p : forest.standardization.columns) {
        w.u8(static_cast<std::uint8_t>((p.scaled ? 1 : 0) | (p.zero_variance ? 2 : 0)));
        w.f64(p.mean);
        w.f64(p.stddev);
    }
    w.u32(static_cast<std::uint32_t>(forest.column_missing_at_fit.size()));
    for (auto v : forest.column_missing_at_fit) w.u8(v);
    w.u64(forest.n_rows);
    w.u32(static_cast<std::uint32_t>(forest.trees.size()));
    for (const auto& tree : forest.trees) write_tree(w, tree);

    const auto& payload = w.bytes();
    out.write(kForestMagic, 8);
    Writer head;
    head.u32(kForestVersion);
    head.u64(payload.size());
    out.write(head.bytes().data(), static_cast<std::streamsize>(head.bytes().size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    Writer tail;
    tail.u32(crc32(payload));
    out.write(tail.bytes().data(), static_cast<std::streamsize>(tail.bytes().size()));
}

MuralForest deserialize(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kForestMagic, 8) != 0)
        throw UserError("not a forest file (bad magic)");
    std::string head(12, '\0');
    in.read(head.data(), 12);
    if (!in) throw UserError("forest file is truncated");
    Reader hr(head);
    const auto version = hr.u32();
    if (version != kForestVersion)
        throw UserError("unsupported forest file version " + std::to_string(version));
    const auto payload_size = hr.u64();
    std::string payload(payload_size, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload_size));
    if (!in) throw UserError("forest file is truncated");
    std::string crc_bytes(4, '\0');
    in.read(crc_bytes.data(), 4);
    if (!in) throw UserError("forest file is truncated");
    Reader cr(crc_bytes);
    if (cr.u32() != crc32(payload)) throw UserError("forest file checksum mismatch");

    Reader r(std::move(payload));
    MuralForest forest;
    forest.schema = read_schema(r);
    forest.config = read_config(r);
    const auto n_std = r.u32();
    forest.standardization.columns.resize(n_std);
    for (auto& p : forest.standardization.columns) {
        const auto flags = r.u8();
        p.scaled = (flags & 1) != 0;
        p.zero_variance = (flags & 2) != 0;
        p.mean = r.f64();
        p.stddev = r.f64();
    }
    const auto n_miss = r.u32();
    forest.column_missing_at_fit.resize(n_miss);
    for (auto& v : forest.column_missing_at_fit) v = r.u8();
    forest.n_rows = r.u64();
    const auto n_trees = r.u32();
    forest.trees.resize(n_trees);
    for (auto& tree : forest.trees) tree = read_tree(r);
    if (!r.exhausted()) throw UserError("forest file has trailing bytes");

    forest.leaf_assignments.assign(n_trees, std::vector<std::int32_t>(forest.n_rows, -1));
    for (std::uint32_t t = 0; t < n_trees; ++t)
        for (std::size_t id = 0; id < forest.trees[t].nodes.size(); ++id)
            for (auto row : forest.trees[t].nodes[id].rows)
                forest.leaf_assignments[t][static_cast<std::size_t>(row)] =
                    static_cast<std::int32_t>(id);
    for (const auto& per_tree : forest.leaf_assignments)
        for (auto a : per_tree)
            if (a < 0) throw UserError("forest file: leaves do not cover all training rows");
    return forest;
}

void save_forest(const MuralForest& forest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write forest file '" + path + "'");
    serialize(forest, out);
}

MuralForest load_forest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open forest file '" + path + "'");
    return deserialize(in);
}

}  // namespace mural
