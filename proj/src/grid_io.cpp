#include "czl/error.hpp"
#include "czl/lattice.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace czl {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'Z', 'L', '1'};
constexpr std::uint32_t kMaxAxes = 64;

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<unsigned char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw StructuralError("CZL1: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw StructuralError("CZL1: truncated samples");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void write_czl1(std::ostream& out, const GridFunction& f) {
    const auto& lat = f.lattice();
    out.write(kMagic.data(), 4);
    put_u32(out, static_cast<std::uint32_t>(lat.parameters()));
    for (int d : lat.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (std::size_t n : lat.n_axis()) put_u32(out, static_cast<std::uint32_t>(n));
    for (const auto& v : f.values()) {
        put_f64(out, v.real());
        put_f64(out, v.imag());
    }
    if (!out) throw StructuralError("CZL1: write failed");
}

GridFunction read_czl1(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != kMagic) throw StructuralError("CZL1: bad magic");
    const std::uint32_t t = get_u32(in);
    if (t == 0 || t > kMaxAxes) throw StructuralError("CZL1: implausible parameter count");
    std::vector<int> dims(t);
    std::uint32_t axes = 0;
    for (auto& d : dims) {
        const auto v = get_u32(in);
        if (v == 0 || v > kMaxAxes) throw StructuralError("CZL1: implausible dimension");
        d = static_cast<int>(v);
        axes += v;
    }
    if (axes > kMaxAxes) throw StructuralError("CZL1: too many axes");
    std::vector<std::size_t> n_axis(axes);
    for (auto& n : n_axis) n = get_u32(in);
    // Validates power-of-two axes.
    ProductLattice lattice(std::move(dims), std::move(n_axis));
    std::vector<cplx> values(lattice.size());
    for (auto& v : values) {
        const double re = get_f64(in);
        const double im = get_f64(in);
        v = {re, im};
    }
    return GridFunction(std::move(lattice), std::move(values));
}

void write_czl1_file(const std::string& path, const GridFunction& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StructuralError("cannot open " + path + " for writing");
    write_czl1(out, f);
}

GridFunction read_czl1_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StructuralError("cannot open " + path);
    return read_czl1(in);
}

}  // namespace czl
