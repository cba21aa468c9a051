#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mural/distance.hpp"

namespace mural {

namespace {

constexpr char kMatrixMagic[8] = {'M', 'U', 'R', 'A', 'L', 'M', 'T', 'X'};
constexpr std::uint32_t kMatrixVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<unsigned char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

double get_f64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void write_matrix_csv(const SquareMatrix& m, std::ostream& out) {
    const std::size_t n = m.size();
    for (std::size_t j = 0; j < n; ++j) out << ',' << j;
    out << '\n';
    char buf[40];
    for (std::size_t i = 0; i < n; ++i) {
        out << i;
        for (std::size_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m.at(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

SquareMatrix read_matrix_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw UserError("matrix CSV is empty");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::size_t pos = line.find(',');  // skip the row index
        if (pos == std::string::npos) throw UserError("matrix CSV row has no values");
        while (pos != std::string::npos) {
            const std::size_t next = line.find(',', pos + 1);
            const std::string cell =
                line.substr(pos + 1, next == std::string::npos ? next : next - pos - 1);
            double v = 0.0;
            const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size())
                throw UserError("matrix CSV: cannot parse value '" + cell + "'");
            vals.push_back(v);
            pos = next;
        }
        rows.push_back(std::move(vals));
    }
    const std::size_t n = rows.size();
    SquareMatrix m(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n)
            throw UserError("matrix CSV is not square: row " + std::to_string(i) + " has " +
                            std::to_string(rows[i].size()) + " values, expected " +
                            std::to_string(n));
        for (std::size_t j = 0; j < n; ++j) m.at(i, j) = rows[i][j];
    }
    return m;
}

void write_matrix_binary(const SquareMatrix& m, std::ostream& out) {
    out.write(kMatrixMagic, 8);
    put_u32(out, kMatrixVersion);
    put_u32(out, static_cast<std::uint32_t>(m.size()));
    for (double v : m.data()) put_f64(out, v);
}

SquareMatrix read_matrix_binary(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMatrixMagic, 8) != 0)
        throw UserError("not a matrix binary file (bad magic)");
    const auto version = get_u32(in);
    if (version != kMatrixVersion)
        throw UserError("unsupported matrix file version " + std::to_string(version));
    const auto n = get_u32(in);
    SquareMatrix m(n, 0.0);
    for (auto& v : m.data()) v = get_f64(in);
    if (!in) throw UserError("matrix binary file is truncated");
    return m;
}

void save_matrix(const SquareMatrix& m, const std::string& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write matrix file '" + path + "'");
    if (binary)
        write_matrix_binary(m, out);
    else
        write_matrix_csv(m, out);
}

SquareMatrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open matrix file '" + path + "'");
    char magic[8] = {};
    in.read(magic, 8);
    in.clear();
    in.seekg(0);
    if (std::memcmp(magic, kMatrixMagic, 8) == 0) return read_matrix_binary(in);
    return read_matrix_csv(in);
}

}  // namespace mural
